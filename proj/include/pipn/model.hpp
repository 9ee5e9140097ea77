#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pipn/autodiff.hpp"
#include "pipn/geometry.hpp"

namespace pipn {

enum class OutputActivation { tanh, linear };

const char* to_string(OutputActivation a);
OutputActivation parse_output_activation(const std::string& s);

/// Architecture knobs of the point-cloud network.
struct ArchDescriptor {
  double n_s = 1.0;  ///< global width multiplier
  int input_dim = 2;
  int n_pde = 2;
  PoolKind pooling = PoolKind::max;
  OutputActivation output = OutputActivation::tanh;

  bool operator==(const ArchDescriptor&) const = default;
};

/// Layer widths (outputs) of the four shared-MLP stacks for a given n_s.
struct LayerPlan {
  std::vector<int> encoder1;  ///< n_s * (64, 64)
  std::vector<int> encoder2;  ///< n_s * (64, 128, 1024)
  std::vector<int> decoder1;  ///< n_s * (512, 256, 128)
  std::vector<int> decoder2;  ///< (n_s * 128, n_pde)

  int global_width() const { return encoder2.back(); }
  int local_width() const { return encoder1.back(); }
  int concat_width() const { return local_width() + global_width(); }
  std::size_t layer_count() const { return encoder1.size() + encoder2.size() + decoder1.size() + decoder2.size(); }
};

/// Throws std::invalid_argument unless every scaled width is a positive integer.
LayerPlan plan_layers(const ArchDescriptor& arch);

/// Shared-MLP stacks: encoder1 -> encoder2 -> pool -> concat(encoder1 output,
/// global feature) -> decoder1 -> decoder2.
struct PipnModel {
  ArchDescriptor arch;
  LayerPlan plan;
  ParamStore<double> params;

  std::size_t layer_count() const { return params.layers.size(); }
  /// Index of the first decoder layer (the one consuming the concatenation).
  std::size_t concat_layer() const { return plan.encoder1.size() + plan.encoder2.size(); }
};

/// Glorot-uniform weights (bound sqrt(6 / (fan_in + fan_out))), zero biases.
PipnModel build_pipn(const ArchDescriptor& arch, std::uint64_t seed);

/// Total number of weight and bias entries.
Eigen::Index count_parameters(const PipnModel& model);

/// Closed-form parameter count for an architecture.
Eigen::Index expected_parameter_count(const ArchDescriptor& arch);

/// Result of a jet forward pass: output jets (n_pde x points) and the tape
/// needed to backpropagate through them.
struct ForwardPass {
  Tape<double> tape;
  Tape<double>::NodeId output = 0;

  const JetBlock<double>& outputs() const { return tape.node(output); }
};

/// Full jet forward pass with recording. Derivative slots of the outputs are
/// with respect to each point's own (x, y), including the path through the
/// global feature.
ForwardPass forward(const PipnModel& model, const Eigen::Matrix2Xd& coords);
inline ForwardPass forward(const PipnModel& model, const PointCloud& cloud) { return forward(model, cloud.coords); }

/// Value-only forward pass (plain matrices, no jets, no tape): n_pde x points.
Eigen::MatrixXd forward_values(const PipnModel& model, const Eigen::Matrix2Xd& coords);

/// Value-only forward returning the pooled global feature too.
Eigen::MatrixXd forward_values(const PipnModel& model, const Eigen::Matrix2Xd& coords, Eigen::VectorXd* global,
                               std::vector<Eigen::Index>* winners);

}  // namespace pipn
