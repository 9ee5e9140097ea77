#include "pipn/model.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <utility>

namespace pipn {

namespace {

// Column count of the widest register panel Eigen's product kernels use.
constexpr Eigen::Index kColumnPanel = 8;

int scaled(double n_s, int base) {
  const double w = n_s * base;
  const double r = std::round(w);
  if (!(w > 0) || std::abs(w - r) > 1e-9) {
    throw std::invalid_argument("n_s = " + std::to_string(n_s) + " gives non-integer width " + std::to_string(w) +
                                " for base " + std::to_string(base));
  }
  return static_cast<int>(r);
}

// Uniform double in [0, 1) from the top 53 bits.
double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

const char* to_string(OutputActivation a) { return a == OutputActivation::tanh ? "tanh" : "linear"; }

OutputActivation parse_output_activation(const std::string& s) {
  if (s == "tanh") return OutputActivation::tanh;
  if (s == "linear") return OutputActivation::linear;
  throw std::invalid_argument("unknown output activation '" + s + "'");
}

LayerPlan plan_layers(const ArchDescriptor& arch) {
  if (arch.input_dim != 2) throw std::invalid_argument("only 2-D inputs are supported");
  if (arch.n_pde < 1) throw std::invalid_argument("n_pde must be positive");
  const double s = arch.n_s;
  LayerPlan p;
  p.encoder1 = {scaled(s, 64), scaled(s, 64)};
  p.encoder2 = {scaled(s, 64), scaled(s, 128), scaled(s, 1024)};
  p.decoder1 = {scaled(s, 512), scaled(s, 256), scaled(s, 128)};
  p.decoder2 = {scaled(s, 128), arch.n_pde};
  return p;
}

PipnModel build_pipn(const ArchDescriptor& arch, std::uint64_t seed) {
  PipnModel model;
  model.arch = arch;
  model.plan = plan_layers(arch);
  const auto& p = model.plan;

  std::vector<std::pair<int, int>> shapes;  // (in, out)
  int in = arch.input_dim;
  for (int w : p.encoder1) shapes.emplace_back(std::exchange(in, w), w);
  for (int w : p.encoder2) shapes.emplace_back(std::exchange(in, w), w);
  in = p.concat_width();
  for (int w : p.decoder1) shapes.emplace_back(std::exchange(in, w), w);
  for (int w : p.decoder2) shapes.emplace_back(std::exchange(in, w), w);

  std::mt19937_64 rng(seed);
  for (const auto& [fan_in, fan_out] : shapes) {
    SharedLayer<double> layer;
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    layer.W.resize(fan_out, fan_in);
    // Row-major fill order, independent of Eigen's storage order.
    for (int r = 0; r < fan_out; ++r) {
      for (int c = 0; c < fan_in; ++c) layer.W(r, c) = bound * (2 * unit_uniform(rng) - 1);
    }
    layer.b = Eigen::VectorXd::Zero(fan_out);
    model.params.layers.push_back(std::move(layer));
  }
  model.params.zero_grad();
  return model;
}

Eigen::Index count_parameters(const PipnModel& model) { return model.params.parameter_count(); }

Eigen::Index expected_parameter_count(const ArchDescriptor& arch) {
  const auto p = plan_layers(arch);
  Eigen::Index total = 0;
  auto stack = [&](int in, const std::vector<int>& widths) {
    for (int w : widths) {
      total += static_cast<Eigen::Index>(in) * w + w;
      in = w;
    }
  };
  stack(arch.input_dim, p.encoder1);
  stack(p.local_width(), p.encoder2);
  stack(p.concat_width(), p.decoder1);
  stack(p.decoder1.back(), p.decoder2);
  return total;
}

ForwardPass forward(const PipnModel& model, const Eigen::Matrix2Xd& coords) {
  if (coords.cols() < 1) throw std::invalid_argument("forward: empty point cloud");
  ForwardPass pass{Tape<double>(model.params), 0};
  auto& tape = pass.tape;
  const auto& p = model.plan;
  std::size_t layer = 0;

  auto node = tape.input(seed_coordinates<double>(coords));
  for (std::size_t i = 0; i < p.encoder1.size(); ++i) node = tape.tanh(tape.affine(layer++, node));
  const auto local = node;
  for (std::size_t i = 0; i + 1 < p.encoder2.size(); ++i) node = tape.tanh(tape.affine(layer++, node));
  Tape<double>::PoolId global;
  if (model.arch.pooling == PoolKind::max) {
    global = tape.affine_tanh_max_pool(layer++, node);
  } else {
    global = tape.pool(tape.tanh(tape.affine(layer++, node)), PoolKind::average);
  }

  node = tape.tanh(tape.concat_affine(layer++, local, global));
  for (std::size_t i = 1; i < p.decoder1.size(); ++i) node = tape.tanh(tape.affine(layer++, node));
  const std::size_t last = model.layer_count() - 1;
  while (layer < last) node = tape.tanh(tape.affine(layer++, node));
  node = tape.affine(layer++, node);
  if (model.arch.output == OutputActivation::tanh) node = tape.tanh(node);
  pass.output = node;
  return pass;
}

Eigen::MatrixXd forward_values(const PipnModel& model, const Eigen::Matrix2Xd& coords, Eigen::VectorXd* global,
                               std::vector<Eigen::Index>* winners) {
  if (coords.cols() < 1) throw std::invalid_argument("forward_values: empty point cloud");
  const auto& layers = model.params.layers;
  const auto& p = model.plan;
  const Eigen::Index n = coords.cols();
  // Eigen's matrix product treats trailing columns that do not fill a whole
  // register panel with a different kernel, so a point's result could depend
  // on its position in the cloud. Zero columns pad the cloud to whole panels
  // and are excluded from pooling.
  const Eigen::Index padded = (n + kColumnPanel - 1) / kColumnPanel * kColumnPanel;
  std::size_t layer = 0;
  auto dense = [&](const Eigen::MatrixXd& x, bool activate) {
    Eigen::MatrixXd z = layers[layer].W * x;
    z.colwise() += layers[layer].b;
    ++layer;
    return activate ? Eigen::MatrixXd(tanh_array(z.array()).matrix()) : z;
  };

  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(2, padded);
  x.leftCols(n) = coords;
  for (std::size_t i = 0; i < p.encoder1.size(); ++i) x = dense(x, true);
  const Eigen::MatrixXd local = x;
  for (std::size_t i = 0; i < p.encoder2.size(); ++i) x = dense(x, true);

  Eigen::VectorXd g(x.rows());
  std::vector<Eigen::Index> win;
  if (model.arch.pooling == PoolKind::average) {
    g = x.leftCols(n).rowwise().mean();
  } else {
    win.resize(x.rows());
    for (Eigen::Index c = 0; c < x.rows(); ++c) {
      Eigen::Index best = 0;
      for (Eigen::Index j = 1; j < n; ++j) {
        if (x(c, j) > x(c, best)) best = j;
      }
      win[c] = best;
      g(c) = x(c, best);
    }
  }
  if (global) *global = g;
  if (winners) *winners = win;

  Eigen::MatrixXd cat(local.rows() + g.size(), padded);
  cat.topRows(local.rows()) = local;
  cat.bottomRows(g.size()) = g.replicate(1, padded);
  x = cat;
  const std::size_t last = model.layer_count() - 1;
  while (layer < last) x = dense(x, true);
  return dense(x, model.arch.output == OutputActivation::tanh).leftCols(n);
}

Eigen::MatrixXd forward_values(const PipnModel& model, const Eigen::Matrix2Xd& coords) {
  return forward_values(model, coords, nullptr, nullptr);
}

}  // namespace pipn
