#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pipn/geometry.hpp"
#include "pipn/model.hpp"
#include "pipn/oracle.hpp"

namespace pipn {

// ---------------------------------------------------------------------------
// Residuals

struct MomentumResidual {
  Eigen::VectorXd rx, ry;  ///< pointwise residuals
  double jx = 0, jy = 0;   ///< mean squares
};

/// Pointwise normalized momentum residuals of output jets (row 0 = u,
/// row 1 = v):
///   r_x = -(u_xx + nu v_xy)/(1-nu) - (u_yy + v_xy)/2 + alpha/(1-nu) T_x - s_x
///   r_y = -(nu u_xy + v_yy)/(1-nu) - (u_xy + v_xx)/2 + alpha/(1-nu) T_y - s_y
/// `forcing` (2 x N) is subtracted when given.
MomentumResidual residual_momentum(const JetBlock<double>& outputs, const Eigen::Matrix2Xd& temp_grad,
                                   const Material& mat, const Eigen::Matrix2Xd* forcing = nullptr);

/// Mean over sensors of (u - u_s)^2 + (v - v_s)^2. `values` is n_pde x N.
double residual_sensor(const Eigen::MatrixXd& values, const SensorSet& sensors);

struct ResidualBreakdown {
  double mom_x = 0;
  double mom_y = 0;
  double sensor = 0;
  int n = 0;
  int m = 0;
};

/// omega_momentum (J_x + J_y) + omega_sensor J_sensor for one geometry.
double geometry_loss(const ResidualBreakdown& r, double omega_momentum, double omega_sensor);

/// Mean of geometry_loss over a non-empty batch.
double batch_loss(const std::vector<ResidualBreakdown>& batch, double omega_momentum, double omega_sensor);

// ---------------------------------------------------------------------------
// Sensor-weight schedules

enum class ScheduleKind { constant_equal, constant_high, exp_decay, log_decay };

const char* to_string(ScheduleKind k);
ScheduleKind parse_schedule_kind(const std::string& s);

struct WeightSchedule {
  ScheduleKind kind = ScheduleKind::constant_high;
  double omega0 = 50.0;
  double omega1 = 50.0;
  double r1 = 800.0;
  double omega2 = 50.0 / 8.0;
  double r2 = 3002.0;

  void validate() const;
};

/// Sensor weight at an epoch; never below one.
///   constant_equal: 1
///   constant_high:  omega0
///   exp_decay:      max(omega1 exp(-epoch / r1), 1)
///   log_decay:      max(omega2 ln(max(r2 - epoch, 1)), 1)
double weight_sensor(const WeightSchedule& schedule, int epoch);

// ---------------------------------------------------------------------------
// Optimizer

struct AdamSettings {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-6;
};

struct AdamState {
  GradientSet<double> m, v;
  std::int64_t t = 0;

  static AdamState zeros_like(const ParamStore<double>& params);
};

/// One bias-corrected Adam update. Throws on a non-finite gradient, naming
/// the offending layer.
void adam_step(ParamStore<double>& params, const GradientSet<double>& grads, AdamState& state,
               const AdamSettings& settings);

// ---------------------------------------------------------------------------
// Training

/// One geometry as seen by training: cloud with fields, sensors, optional
/// manufactured forcing (2 x N, empty in production mode).
struct GeometrySample {
  std::string name;
  PointCloud cloud;
  SensorSet sensors;
  Eigen::Matrix2Xd forcing;
};

using Dataset = std::vector<GeometrySample>;

struct TrainConfig {
  ArchDescriptor arch{0.5, 2, 2, PoolKind::max, OutputActivation::tanh};
  int batch_size = 4;
  int epochs = 100;
  AdamSettings adam;
  WeightSchedule schedule;
  double omega_momentum = 1.0;
  std::uint64_t seed = 1;
  int threads = 1;

  void validate(std::size_t dataset_size) const;
};

/// Residual breakdown of one geometry; when `grads` is non-null, also adds
/// d(scale * loss)/d(params) into it.
ResidualBreakdown geometry_objective(const PipnModel& model, const GeometrySample& sample, const Material& mat,
                                     double omega_momentum, double omega_sensor, double scale,
                                     GradientSet<double>* grads);

/// Dataset loss as (B/m) times the sum over batches of the batch mean, for a fixed model and
/// a given geometry order partitioned into consecutive batches of size B.
double batched_dataset_loss(const PipnModel& model, const Dataset& data, const Material& mat, double omega_momentum,
                            double omega_sensor, int batch_size, const std::vector<std::size_t>& order);

struct EpochRecord {
  int epoch = 0;
  double loss = 0;
  double omega_sensor = 0;
  double seconds = 0;
};

struct TrainState {
  PipnModel model;
  AdamState adam;
  int epoch = 0;  ///< completed epochs
  std::uint64_t seed = 0;
};

TrainState initial_state(const TrainConfig& config);

/// Geometry order for an epoch: a seeded Fisher-Yates shuffle.
std::vector<std::size_t> epoch_order(std::uint64_t seed, int epoch, std::size_t m);

using EpochCallback = std::function<void(const TrainState&, const EpochRecord&)>;

/// Runs epochs state.epoch .. config.epochs-1. Each epoch shuffles the
/// geometries, splits them into ceil(m/B) batches (the last may be smaller)
/// and takes one Adam step per batch. The recorded loss is the mean of the
/// per-geometry losses seen during the epoch.
std::vector<EpochRecord> train(const Dataset& data, const TrainConfig& config, const Material& mat,
                               TrainState& state, const EpochCallback& on_epoch = {});

// ---------------------------------------------------------------------------
// Evaluation

struct GeometryError {
  std::string name;
  double u = 0, v = 0;        ///< relative L2 errors (absolute when flagged)
  bool u_absolute = false, v_absolute = false;
};

struct ErrorStats {
  double min = 0, mean = 0, max = 0;
};

struct EvaluationReport {
  std::vector<GeometryError> per_geometry;
  ErrorStats u, v;
};

/// ||pred - ref|| / ||ref|| per geometry and field; zero reference norm
/// falls back to the absolute error and sets the flag.
EvaluationReport evaluate(const PipnModel& model, const Dataset& data);

}  // namespace pipn
