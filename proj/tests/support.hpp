#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "pipn/experiment.hpp"

namespace pipn::test {

inline double rel_err(double a, double b, double floor = 1e-8) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

inline Eigen::Matrix2Xd random_cloud(int n, std::uint64_t seed, double half = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-half, half);
  Eigen::Matrix2Xd c(2, n);
  for (int j = 0; j < n; ++j) c.col(j) = Eigen::Vector2d(u(rng), u(rng));
  return c;
}

/// Widths 1, 1, 1, 2, 16 | 8, 4, 2, 2 at n_s = 1/64.
inline ArchDescriptor micro_arch(PoolKind pooling, OutputActivation out = OutputActivation::tanh) {
  return {1.0 / 64.0, 2, 2, pooling, out};
}

/// Rescales weights so a micro-net is not saturated or linear.
inline void scale_weights(PipnModel& m, double s) {
  for (auto& l : m.params.layers) l.W *= s;
}

/// Random small biases so that no pre-activation is identically zero.
inline void randomize_biases(PipnModel& m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  for (auto& l : m.params.layers) {
    for (Eigen::Index i = 0; i < l.b.size(); ++i) l.b(i) = u(rng);
  }
}

/// A synthetic geometry sample over an arbitrary cloud: random temperature
/// gradient and sensor values, no reference fields.
inline GeometrySample synthetic_sample(const Eigen::Matrix2Xd& coords, int m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1, 1);
  GeometrySample g;
  g.name = "synthetic_" + std::to_string(seed);
  g.cloud.coords = coords;
  g.cloud.kinds.assign(coords.cols(), PointKind::interior);
  g.cloud.temperature = Eigen::VectorXd::Zero(coords.cols());
  g.cloud.temp_grad.resize(2, coords.cols());
  for (Eigen::Index j = 0; j < coords.cols(); ++j) g.cloud.temp_grad.col(j) = Eigen::Vector2d(u(rng), u(rng));
  for (int k = 0; k < m; ++k) g.sensors.indices.push_back(k % static_cast<int>(coords.cols()));
  g.sensors.u.resize(m);
  g.sensors.v.resize(m);
  for (int k = 0; k < m; ++k) {
    g.sensors.u(k) = 0.1 * u(rng);
    g.sensors.v(k) = 0.1 * u(rng);
  }
  return g;
}

/// Finite-difference jet of output `channel` at point j, moving only point j
/// (so the path through the pooled feature is included). Central differences
/// at `step` and step/2 are combined by one Richardson step, which removes
/// the h^2 truncation term that otherwise dominates where a slot is small
/// compared with its neighbours. Returns nothing if any max-pool winner
/// changes inside the stencil, where the derivative is not defined.
inline std::optional<Jet2<double>> cloud_fd_probe(const PipnModel& model, const Eigen::Matrix2Xd& coords,
                                                  Eigen::Index j, int channel, double step) {
  std::vector<Eigen::Index> base;
  forward_values(model, coords, nullptr, &base);
  bool stable = true;
  Eigen::Matrix2Xd moved = coords;
  const auto f = [&](double x, double y) {
    moved.col(j) = Eigen::Vector2d(x, y);
    std::vector<Eigen::Index> w;
    const Eigen::MatrixXd out = forward_values(model, moved, nullptr, &w);
    if (model.arch.pooling == PoolKind::max && w != base) stable = false;
    return out(channel, j);
  };
  const auto coarse = finite_difference_probe(f, coords.col(j), step);
  const auto fine = finite_difference_probe(f, coords.col(j), step / 2);
  if (!stable) return std::nullopt;
  const auto extrapolate = [](double c, double f) { return (4 * f - c) / 3; };
  return Jet2<double>{fine.val,
                      extrapolate(coarse.dx, fine.dx),
                      extrapolate(coarse.dy, fine.dy),
                      extrapolate(coarse.dxx, fine.dxx),
                      extrapolate(coarse.dyy, fine.dyy),
                      extrapolate(coarse.dxy, fine.dxy)};
}

}  // namespace pipn::test
