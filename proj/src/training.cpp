#include "pipn/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <thread>

#ifdef __GLIBC__
#include <malloc.h>
#endif

namespace pipn {

MomentumResidual residual_momentum(const JetBlock<double>& outputs, const Eigen::Matrix2Xd& temp_grad,
                                   const Material& mat, const Eigen::Matrix2Xd* forcing) {
  if (outputs.channels() < 2) throw std::invalid_argument("residual_momentum: need u and v output channels");
  const Eigen::Index n = outputs.points();
  if (temp_grad.cols() != n) {
    throw std::invalid_argument("residual_momentum: temperature gradient given for " +
                                std::to_string(temp_grad.cols()) + " of " + std::to_string(n) + " points");
  }
  const double a = mat.a(), b = mat.b(), beta = mat.beta();
  const auto uxx = outputs.slot(kDxx).row(0).transpose().array();
  const auto uyy = outputs.slot(kDyy).row(0).transpose().array();
  const auto uxy = outputs.slot(kDxy).row(0).transpose().array();
  const auto vxx = outputs.slot(kDxx).row(1).transpose().array();
  const auto vyy = outputs.slot(kDyy).row(1).transpose().array();
  const auto vxy = outputs.slot(kDxy).row(1).transpose().array();

  MomentumResidual r;
  r.rx = (-a * uxx - b * vxy - 0.5 * (uyy + vxy) + beta * temp_grad.row(0).transpose().array()).matrix();
  r.ry = (-b * uxy - a * vyy - 0.5 * (uxy + vxx) + beta * temp_grad.row(1).transpose().array()).matrix();
  if (forcing) {
    if (forcing->cols() != n) throw std::invalid_argument("residual_momentum: forcing size mismatch");
    r.rx -= forcing->row(0).transpose();
    r.ry -= forcing->row(1).transpose();
  }
  r.jx = r.rx.squaredNorm() / static_cast<double>(n);
  r.jy = r.ry.squaredNorm() / static_cast<double>(n);
  return r;
}

double residual_sensor(const Eigen::MatrixXd& values, const SensorSet& sensors) {
  const int m = sensors.size();
  if (m == 0) throw std::invalid_argument("residual_sensor: no sensors");
  double sum = 0;
  for (int k = 0; k < m; ++k) {
    const int j = sensors.indices[k];
    if (j < 0 || j >= values.cols()) throw std::out_of_range("residual_sensor: sensor index out of range");
    const double du = values(0, j) - sensors.u(k);
    const double dv = values(1, j) - sensors.v(k);
    sum += du * du + dv * dv;
  }
  return sum / m;
}

double geometry_loss(const ResidualBreakdown& r, double omega_momentum, double omega_sensor) {
  return omega_momentum * (r.mom_x + r.mom_y) + omega_sensor * r.sensor;
}

double batch_loss(const std::vector<ResidualBreakdown>& batch, double omega_momentum, double omega_sensor) {
  if (batch.empty()) throw std::invalid_argument("batch_loss: empty batch");
  double sum = 0;
  for (const auto& r : batch) sum += geometry_loss(r, omega_momentum, omega_sensor);
  return sum / static_cast<double>(batch.size());
}

const char* to_string(ScheduleKind k) {
  switch (k) {
    case ScheduleKind::constant_equal: return "constant_equal";
    case ScheduleKind::constant_high: return "constant_high";
    case ScheduleKind::exp_decay: return "exp_decay";
    case ScheduleKind::log_decay: return "log_decay";
  }
  return "?";
}

ScheduleKind parse_schedule_kind(const std::string& s) {
  if (s == "constant_equal") return ScheduleKind::constant_equal;
  if (s == "constant_high") return ScheduleKind::constant_high;
  if (s == "exp_decay") return ScheduleKind::exp_decay;
  if (s == "log_decay") return ScheduleKind::log_decay;
  throw std::invalid_argument("unknown schedule '" + s + "'");
}

void WeightSchedule::validate() const {
  switch (kind) {
    case ScheduleKind::constant_equal: return;
    case ScheduleKind::constant_high:
      if (!(omega0 > 1)) throw std::invalid_argument("constant_high schedule needs omega0 > 1");
      return;
    case ScheduleKind::exp_decay:
      if (!(omega1 > 1) || !(r1 > 0)) throw std::invalid_argument("exp_decay schedule needs omega1 > 1 and r1 > 0");
      return;
    case ScheduleKind::log_decay:
      if (!(omega2 > 1) || !(r2 > 0)) throw std::invalid_argument("log_decay schedule needs omega2 > 1 and r2 > 0");
      return;
  }
}

double weight_sensor(const WeightSchedule& s, int epoch) {
  if (epoch < 0) throw std::invalid_argument("weight_sensor: negative epoch");
  s.validate();
  switch (s.kind) {
    case ScheduleKind::constant_equal: return 1.0;
    case ScheduleKind::constant_high: return s.omega0;
    case ScheduleKind::exp_decay: return std::max(s.omega1 * std::exp(-epoch / s.r1), 1.0);
    case ScheduleKind::log_decay: return std::max(s.omega2 * std::log(std::max(s.r2 - epoch, 1.0)), 1.0);
  }
  return 1.0;
}

AdamState AdamState::zeros_like(const ParamStore<double>& params) {
  AdamState s;
  s.m = params.zero_gradients();
  s.v = params.zero_gradients();
  return s;
}

void adam_step(ParamStore<double>& params, const GradientSet<double>& grads, AdamState& state,
               const AdamSettings& cfg) {
  if (grads.size() != params.layers.size() || state.m.size() != params.layers.size()) {
    throw std::invalid_argument("adam_step: layer count mismatch");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (grads[i].W.rows() != params.layers[i].W.rows() || grads[i].W.cols() != params.layers[i].W.cols() ||
        grads[i].b.size() != params.layers[i].b.size()) {
      throw std::invalid_argument("adam_step: gradient shape mismatch at layer " + std::to_string(i));
    }
    if (!grads[i].W.allFinite()) throw std::runtime_error("adam_step: non-finite gradient in W of layer " + std::to_string(i));
    if (!grads[i].b.allFinite()) throw std::runtime_error("adam_step: non-finite gradient in b of layer " + std::to_string(i));
  }
  state.t += 1;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  auto update = [&](auto& p, const auto& g, auto& m, auto& v) {
    m.array() = cfg.beta1 * m.array() + (1 - cfg.beta1) * g.array();
    v.array() = cfg.beta2 * v.array() + (1 - cfg.beta2) * g.array().square();
    p.array() -= cfg.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg.eps);
  };
  for (std::size_t i = 0; i < grads.size(); ++i) {
    update(params.layers[i].W, grads[i].W, state.m[i].W, state.v[i].W);
    update(params.layers[i].b, grads[i].b, state.m[i].b, state.v[i].b);
  }
}

void TrainConfig::validate(std::size_t dataset_size) const {
  if (batch_size < 1) throw std::invalid_argument("batch size must be at least 1");
  if (dataset_size > 0 && static_cast<std::size_t>(batch_size) > dataset_size) {
    throw std::invalid_argument("batch size " + std::to_string(batch_size) + " exceeds dataset size " +
                                std::to_string(dataset_size));
  }
  if (epochs < 0) throw std::invalid_argument("epochs must be non-negative");
  if (!(adam.lr > 0)) throw std::invalid_argument("learning rate must be positive");
  if (threads < 1) throw std::invalid_argument("threads must be at least 1");
  schedule.validate();
  plan_layers(arch);
}

ResidualBreakdown geometry_objective(const PipnModel& model, const GeometrySample& sample, const Material& mat,
                                     double omega_momentum, double omega_sensor, double scale,
                                     GradientSet<double>* grads) {
  const auto& cloud = sample.cloud;
  if (!cloud.has_fields()) throw std::invalid_argument("geometry '" + sample.name + "' has no temperature fields");
  auto pass = forward(model, cloud.coords);
  const auto& out = pass.outputs();
  const Eigen::Matrix2Xd* forcing = sample.forcing.cols() == cloud.size() ? &sample.forcing : nullptr;
  const auto mom = residual_momentum(out, cloud.temp_grad, mat, forcing);
  const Eigen::MatrixXd values = out.slot(kVal);

  ResidualBreakdown r;
  r.mom_x = mom.jx;
  r.mom_y = mom.jy;
  r.sensor = residual_sensor(values, sample.sensors);
  r.n = static_cast<int>(cloud.size());
  r.m = sample.sensors.size();
  if (!grads) return r;

  const Eigen::Index n = cloud.size();
  const double a = mat.a(), b = mat.b();
  const Eigen::VectorXd wx = (scale * omega_momentum * 2.0 / n) * mom.rx;
  const Eigen::VectorXd wy = (scale * omega_momentum * 2.0 / n) * mom.ry;
  JetBlock<double> d_out(out.channels(), n);
  d_out.slot(kDxx).row(0) = -a * wx.transpose();
  d_out.slot(kDyy).row(0) = -0.5 * wx.transpose();
  d_out.slot(kDxy).row(1) = -(b + 0.5) * wx.transpose();
  d_out.slot(kDyy).row(1) = -a * wy.transpose();
  d_out.slot(kDxx).row(1) = -0.5 * wy.transpose();
  d_out.slot(kDxy).row(0) = -(b + 0.5) * wy.transpose();
  const double ws = scale * omega_sensor * 2.0 / r.m;
  for (int k = 0; k < r.m; ++k) {
    const int j = sample.sensors.indices[k];
    d_out.slot(kVal)(0, j) += ws * (values(0, j) - sample.sensors.u(k));
    d_out.slot(kVal)(1, j) += ws * (values(1, j) - sample.sensors.v(k));
  }
  pass.tape.backward(pass.output, d_out, *grads);
  return r;
}

double batched_dataset_loss(const PipnModel& model, const Dataset& data, const Material& mat, double omega_momentum,
                            double omega_sensor, int batch_size, const std::vector<std::size_t>& order) {
  const std::size_t m = order.size();
  double total = 0;
  for (std::size_t start = 0; start < m; start += batch_size) {
    std::vector<ResidualBreakdown> batch;
    for (std::size_t i = start; i < std::min(m, start + batch_size); ++i) {
      batch.push_back(geometry_objective(model, data.at(order[i]), mat, omega_momentum, omega_sensor, 1.0, nullptr));
    }
    total += batch_loss(batch, omega_momentum, omega_sensor) * static_cast<double>(batch.size());
  }
  return total / static_cast<double>(m);
}

TrainState initial_state(const TrainConfig& config) {
  TrainState s;
  s.model = build_pipn(config.arch, config.seed);
  s.adam = AdamState::zeros_like(s.model.params);
  s.epoch = 0;
  s.seed = config.seed;
  return s;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::vector<std::size_t> epoch_order(std::uint64_t seed, int epoch, std::size_t m) {
  std::vector<std::size_t> order(m);
  for (std::size_t i = 0; i < m; ++i) order[i] = i;
  std::uint64_t state = splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(epoch) + 1));
  for (std::size_t i = m; i > 1; --i) {
    state = splitmix64(state);
    std::swap(order[i - 1], order[state % i]);
  }
  return order;
}

std::vector<EpochRecord> train(const Dataset& data, const TrainConfig& config, const Material& mat,
                               TrainState& state, const EpochCallback& on_epoch) {
#ifdef __GLIBC__
  // Jet blocks are large and short-lived; without this glibc maps and unmaps
  // them on every layer and the page faults dominate an epoch.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
  if (data.empty()) throw std::invalid_argument("train: empty dataset");
  config.validate(data.size());
  const Eigen::Index n = data.front().cloud.size();
  for (const auto& g : data) {
    if (g.cloud.size() != n) {
      throw std::invalid_argument("train: geometry '" + g.name + "' has " + std::to_string(g.cloud.size()) +
                                  " points, expected " + std::to_string(n));
    }
  }
  if (!(state.model.arch == config.arch)) throw std::invalid_argument("train: model architecture differs from config");

  const std::size_t m = data.size();
  const std::size_t B = static_cast<std::size_t>(config.batch_size);
  std::vector<EpochRecord> history;
  for (int epoch = state.epoch; epoch < config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const double omega_s = weight_sensor(config.schedule, epoch);
    const auto order = epoch_order(state.seed, epoch, m);
    double loss_sum = 0;
    int batch_index = 0;
    for (std::size_t start = 0; start < m; start += B, ++batch_index) {
      const std::size_t size = std::min(B, m - start);
      std::vector<GradientSet<double>> grads(size);
      std::vector<ResidualBreakdown> parts(size);
      auto work = [&](std::size_t i) {
        grads[i] = state.model.params.zero_gradients();
        parts[i] = geometry_objective(state.model, data[order[start + i]], mat, config.omega_momentum, omega_s,
                                      1.0 / static_cast<double>(size), &grads[i]);
      };
      if (config.threads > 1 && size > 1) {
        std::vector<std::thread> pool;
        const std::size_t workers = std::min<std::size_t>(config.threads, size);
        for (std::size_t w = 0; w < workers; ++w) {
          pool.emplace_back([&, w] {
            for (std::size_t i = w; i < size; i += workers) work(i);
          });
        }
        for (auto& t : pool) t.join();
      } else {
        for (std::size_t i = 0; i < size; ++i) work(i);
      }
      // Fixed-order reduction keeps results independent of the thread count.
      auto total = state.model.params.zero_gradients();
      for (const auto& g : grads) accumulate(total, g);
      const double bl = batch_loss(parts, config.omega_momentum, omega_s);
      if (!std::isfinite(bl)) {
        throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                 std::to_string(batch_index));
      }
      loss_sum += bl * static_cast<double>(size);
      adam_step(state.model.params, total, state.adam, config.adam);
    }
    state.epoch = epoch + 1;
    EpochRecord rec{epoch, loss_sum / static_cast<double>(m), omega_s,
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()};
    history.push_back(rec);
    if (on_epoch) on_epoch(state, rec);
  }
  return history;
}

EvaluationReport evaluate(const PipnModel& model, const Dataset& data) {
  EvaluationReport rep;
  if (data.empty()) return rep;
  rep.u.min = rep.v.min = std::numeric_limits<double>::infinity();
  rep.u.max = rep.v.max = -std::numeric_limits<double>::infinity();
  for (const auto& g : data) {
    if (!g.cloud.has_reference()) throw std::invalid_argument("evaluate: geometry '" + g.name + "' lacks reference");
    const Eigen::MatrixXd out = forward_values(model, g.cloud.coords);
    GeometryError e;
    e.name = g.name;
    auto rel = [](const Eigen::VectorXd& pred, const Eigen::VectorXd& ref, bool& absolute) {
      const double diff = (pred - ref).norm();
      const double norm = ref.norm();
      absolute = norm == 0;
      return absolute ? diff : diff / norm;
    };
    e.u = rel(out.row(0).transpose(), g.cloud.u_ref, e.u_absolute);
    e.v = rel(out.row(1).transpose(), g.cloud.v_ref, e.v_absolute);
    rep.u.min = std::min(rep.u.min, e.u);
    rep.u.max = std::max(rep.u.max, e.u);
    rep.v.min = std::min(rep.v.min, e.v);
    rep.v.max = std::max(rep.v.max, e.v);
    rep.u.mean += e.u;
    rep.v.mean += e.v;
    rep.per_geometry.push_back(std::move(e));
  }
  rep.u.mean /= static_cast<double>(data.size());
  rep.v.mean /= static_cast<double>(data.size());
  return rep;
}

}  // namespace pipn
