#pragma once

// Second-order input jets through shared MLPs, symmetric pooling and
// concatenation, plus reverse mode over the jet program for parameter
// gradients.

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "pipn/jet.hpp"

namespace pipn {

/// Shared weight matrix and bias applied identically to every point.
template <typename Scalar>
struct SharedLayer {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Matrix W;
  Vector b;

  Eigen::Index inputs() const { return W.cols(); }
  Eigen::Index outputs() const { return W.rows(); }
};

template <typename Scalar>
struct LayerGradient {
  typename SharedLayer<Scalar>::Matrix W;
  typename SharedLayer<Scalar>::Vector b;
};

template <typename Scalar>
using GradientSet = std::vector<LayerGradient<Scalar>>;

template <typename Scalar>
class ParamStore {
 public:
  std::vector<SharedLayer<Scalar>> layers;
  GradientSet<Scalar> grads;

  /// Allocates zeroed gradient accumulators matching the layer shapes.
  GradientSet<Scalar> zero_gradients() const {
    GradientSet<Scalar> g(layers.size());
    for (std::size_t i = 0; i < layers.size(); ++i) {
      g[i].W.setZero(layers[i].W.rows(), layers[i].W.cols());
      g[i].b.setZero(layers[i].b.size());
    }
    return g;
  }

  void zero_grad() { grads = zero_gradients(); }

  Eigen::Index parameter_count() const {
    Eigen::Index n = 0;
    for (const auto& l : layers) n += l.W.size() + l.b.size();
    return n;
  }
};

/// g += h, layer by layer. Shapes must match.
template <typename Scalar>
void accumulate(GradientSet<Scalar>& g, const GradientSet<Scalar>& h) {
  if (g.size() != h.size()) throw std::invalid_argument("accumulate: layer count mismatch");
  for (std::size_t i = 0; i < g.size(); ++i) {
    g[i].W += h[i].W;
    g[i].b += h[i].b;
  }
}

// ---------------------------------------------------------------------------
// Shared affine map

template <typename Scalar>
JetBlock<Scalar> affine_forward(const SharedLayer<Scalar>& layer, const JetBlock<Scalar>& in) {
  if (in.channels() != layer.inputs()) {
    throw std::invalid_argument("affine_forward: input has " + std::to_string(in.channels()) +
                                " channels, layer expects " + std::to_string(layer.inputs()));
  }
  JetBlock<Scalar> out(layer.outputs(), in.points());
  out.data().noalias() = layer.W * in.data();
  out.slot(kVal).colwise() += layer.b;
  return out;
}

/// Accumulates dL/dW, dL/db into `grad` and returns dL/d(in).
template <typename Scalar>
JetBlock<Scalar> affine_backward(const SharedLayer<Scalar>& layer, const JetBlock<Scalar>& in,
                                 const JetBlock<Scalar>& d_out, LayerGradient<Scalar>& grad) {
  grad.W.noalias() += d_out.data() * in.data().transpose();
  grad.b += d_out.slot(kVal).rowwise().sum();
  JetBlock<Scalar> d_in(in.channels(), in.points());
  d_in.data().noalias() = layer.W.transpose() * d_out.data();
  return d_in;
}

// ---------------------------------------------------------------------------
// tanh activation

template <typename Scalar>
JetBlock<Scalar> tanh_forward(const JetBlock<Scalar>& z) {
  JetBlock<Scalar> a(z.channels(), z.points());
  const auto zx = z.slot(kDx).array();
  const auto zy = z.slot(kDy).array();
  const auto s = tanh_array(z.slot(kVal).array());
  const auto s1 = (Scalar(1) - s.square()).eval();
  const auto s2 = (Scalar(-2) * s * s1).eval();

  a.slot(kVal) = s.matrix();
  a.slot(kDx) = (s1 * zx).matrix();
  a.slot(kDy) = (s1 * zy).matrix();
  a.slot(kDxx) = (s2 * zx.square() + s1 * z.slot(kDxx).array()).matrix();
  a.slot(kDyy) = (s2 * zy.square() + s1 * z.slot(kDyy).array()).matrix();
  a.slot(kDxy) = (s2 * zx * zy + s1 * z.slot(kDxy).array()).matrix();
  return a;
}

/// Adjoint of tanh_forward. `a` is the forward output (its value slot holds
/// tanh(z)), `d_a` the adjoint of `a`.
template <typename Scalar>
JetBlock<Scalar> tanh_backward(const JetBlock<Scalar>& z, const JetBlock<Scalar>& a,
                               const JetBlock<Scalar>& d_a) {
  JetBlock<Scalar> d_z(z.channels(), z.points());
  const auto zx = z.slot(kDx).array();
  const auto zy = z.slot(kDy).array();
  const auto zxx = z.slot(kDxx).array();
  const auto zyy = z.slot(kDyy).array();
  const auto zxy = z.slot(kDxy).array();
  const auto s = a.slot(kVal).array();
  const auto s1 = (Scalar(1) - s.square()).eval();
  const auto s2 = (Scalar(-2) * s * s1).eval();
  const auto s3 = (Scalar(-2) * s1.square() + Scalar(4) * s.square() * s1).eval();

  const auto gv = d_a.slot(kVal).array();
  const auto gx = d_a.slot(kDx).array();
  const auto gy = d_a.slot(kDy).array();
  const auto gxx = d_a.slot(kDxx).array();
  const auto gyy = d_a.slot(kDyy).array();
  const auto gxy = d_a.slot(kDxy).array();

  d_z.slot(kDxx) = (gxx * s1).matrix();
  d_z.slot(kDyy) = (gyy * s1).matrix();
  d_z.slot(kDxy) = (gxy * s1).matrix();
  d_z.slot(kDx) = (gx * s1 + s2 * (Scalar(2) * gxx * zx + gxy * zy)).matrix();
  d_z.slot(kDy) = (gy * s1 + s2 * (Scalar(2) * gyy * zy + gxy * zx)).matrix();
  d_z.slot(kVal) = (gv * s1 + s2 * (gx * zx + gy * zy + gxx * zxx + gyy * zyy + gxy * zxy) +
                    s3 * (gxx * zx.square() + gyy * zy.square() + gxy * zx * zy))
                       .matrix();
  return d_z;
}

// ---------------------------------------------------------------------------
// Symmetric pooling

enum class PoolKind { max, average };

inline const char* to_string(PoolKind k) { return k == PoolKind::max ? "max" : "average"; }

inline PoolKind parse_pool_kind(const std::string& s) {
  if (s == "max") return PoolKind::max;
  if (s == "average" || s == "avg" || s == "mean") return PoolKind::average;
  throw std::invalid_argument("unknown pooling kind '" + s + "'");
}

/// Winners per channel for max pooling (lowest point index on ties).
struct PoolRecord {
  PoolKind kind = PoolKind::max;
  Eigen::Index points = 0;
  std::vector<Eigen::Index> winners;
};

/// Pooled global feature. For max pooling `winner_jets` (channels x 1 point)
/// holds each channel's jet at its winning point, which is all the
/// derivative information the global feature carries.
template <typename Scalar>
struct PooledFeature {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> value;
  PoolRecord record;
  JetBlock<Scalar> winner_jets;
};

namespace detail {

template <typename Derived>
std::vector<Eigen::Index> argmax_rows(const Eigen::MatrixBase<Derived>& v) {
  std::vector<Eigen::Index> win(v.rows());
  for (Eigen::Index c = 0; c < v.rows(); ++c) {
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < v.cols(); ++j) {
      if (v(c, j) > v(c, best)) best = j;
    }
    win[c] = best;
  }
  return win;
}

}  // namespace detail

template <typename Scalar>
PooledFeature<Scalar> pool(const JetBlock<Scalar>& h, PoolKind kind) {
  const Eigen::Index n = h.points();
  if (n < 1) throw std::invalid_argument("pool: empty point set");
  PooledFeature<Scalar> out;
  out.record.kind = kind;
  out.record.points = n;
  const auto v = h.slot(kVal);
  if (kind == PoolKind::average) {
    out.value = v.rowwise().mean();
    return out;
  }
  out.record.winners = detail::argmax_rows(v);
  out.value.resize(h.channels());
  out.winner_jets = JetBlock<Scalar>(h.channels(), 1);
  for (Eigen::Index c = 0; c < h.channels(); ++c) {
    const Eigen::Index j = out.record.winners[c];
    out.value(c) = v(c, j);
    for (int s = 0; s < kNumSlots; ++s) out.winner_jets.slot(s)(c, 0) = h.slot(s)(c, j);
  }
  return out;
}

/// tanh(W x + b) followed by max pooling, evaluating derivative slots only at
/// the winning points. Equal to pool(tanh_forward(affine_forward(layer, x)),
/// max) up to the summation order of the winner derivative slots. `z_winner`
/// receives the pre-activation jets at the winners.
template <typename Scalar>
PooledFeature<Scalar> affine_tanh_max_pool(const SharedLayer<Scalar>& layer, const JetBlock<Scalar>& x,
                                           JetBlock<Scalar>& z_winner) {
  if (x.channels() != layer.inputs()) throw std::invalid_argument("affine_tanh_max_pool: width mismatch");
  const Eigen::Index n = x.points();
  if (n < 1) throw std::invalid_argument("affine_tanh_max_pool: empty point set");
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> z = layer.W * x.slot(kVal);
  z.colwise() += layer.b;
  const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> a = tanh_array(z.array()).matrix();

  PooledFeature<Scalar> out;
  out.record.kind = PoolKind::max;
  out.record.points = n;
  out.record.winners = detail::argmax_rows(a);
  const Eigen::Index nc = layer.outputs();
  z_winner = JetBlock<Scalar>(nc, 1);
  for (Eigen::Index c = 0; c < nc; ++c) {
    const Eigen::Index j = out.record.winners[c];
    z_winner.slot(kVal)(c, 0) = z(c, j);
    for (int s = kDx; s < kNumSlots; ++s) z_winner.slot(s)(c, 0) = layer.W.row(c).dot(x.slot(s).col(j));
  }
  out.winner_jets = tanh_forward(z_winner);
  out.value.resize(nc);
  for (Eigen::Index c = 0; c < nc; ++c) out.value(c) = a(c, out.record.winners[c]);
  out.winner_jets.slot(kVal) = out.value;
  return out;
}

/// Adjoint of affine_tanh_max_pool given the adjoint of the winner jets.
template <typename Scalar>
void affine_tanh_max_pool_backward(const SharedLayer<Scalar>& layer, const JetBlock<Scalar>& x,
                                   const PooledFeature<Scalar>& g, const JetBlock<Scalar>& z_winner,
                                   const JetBlock<Scalar>& d_winner, LayerGradient<Scalar>& grad,
                                   JetBlock<Scalar>& d_x) {
  const JetBlock<Scalar> dz = tanh_backward(z_winner, g.winner_jets, d_winner);
  for (Eigen::Index c = 0; c < layer.outputs(); ++c) {
    const Eigen::Index j = g.record.winners[c];
    grad.b(c) += dz.slot(kVal)(c, 0);
    for (int s = 0; s < kNumSlots; ++s) {
      const Scalar w = dz.slot(s)(c, 0);
      if (w == Scalar(0)) continue;
      grad.W.row(c) += w * x.slot(s).col(j).transpose();
      d_x.slot(s).col(j) += w * layer.W.row(c).transpose();
    }
  }
}

/// Weight with which point j's own derivative slots enter global channel c.
inline double global_slot_weight(const PoolRecord& rec, Eigen::Index channel, Eigen::Index point) {
  if (rec.kind == PoolKind::average) return 1.0 / static_cast<double>(rec.points);
  return rec.winners[channel] == point ? 1.0 : 0.0;
}

/// The pooled feature broadcast to every point as jets. Derivative slots
/// are taken with respect to the receiving point's own coordinates.
template <typename Scalar>
JetBlock<Scalar> global_jets(const PooledFeature<Scalar>& g, const JetBlock<Scalar>& h) {
  const Eigen::Index n = h.points();
  JetBlock<Scalar> out(h.channels(), n);
  out.slot(kVal).colwise() = g.value;
  if (g.record.kind == PoolKind::average) {
    out.data().rightCols((kNumSlots - 1) * n) = h.data().rightCols((kNumSlots - 1) * n) / Scalar(n);
  } else {
    for (Eigen::Index c = 0; c < h.channels(); ++c) {
      const Eigen::Index j = g.record.winners[c];
      for (int s = kDx; s < kNumSlots; ++s) out.slot(s)(c, j) = h.slot(s)(c, j);
    }
  }
  return out;
}

/// Stacks local channels over global channels.
template <typename Scalar>
JetBlock<Scalar> concat(const JetBlock<Scalar>& local, const JetBlock<Scalar>& global) {
  if (local.points() != global.points()) {
    throw std::invalid_argument("concat: point counts differ (" + std::to_string(local.points()) +
                                " vs " + std::to_string(global.points()) + ")");
  }
  JetBlock<Scalar> out(local.channels() + global.channels(), local.points());
  out.data().topRows(local.channels()) = local.data();
  out.data().bottomRows(global.channels()) = global.data();
  return out;
}

/// affine_forward(layer, concat(local, global_jets(g, h))) without forming the
/// broadcast global block: the global value is shared by all points and the
/// max-pool derivative slots are nonzero only at the winners. `h` (the pooled
/// block) is only read for average pooling and may be null for max pooling.
template <typename Scalar>
JetBlock<Scalar> concat_affine_forward(const SharedLayer<Scalar>& layer, const JetBlock<Scalar>& local,
                                       const PooledFeature<Scalar>& g,
                                       const std::type_identity_t<JetBlock<Scalar>>* h) {
  const Eigen::Index nl = local.channels();
  const Eigen::Index ng = g.value.size();
  const Eigen::Index n = local.points();
  if (layer.inputs() != nl + ng || g.record.points != n) {
    throw std::invalid_argument("concat_affine_forward: width mismatch (layer expects " +
                                std::to_string(layer.inputs()) + ", got " + std::to_string(nl) + "+" +
                                std::to_string(ng) + ")");
  }
  const auto Wl = layer.W.leftCols(nl);
  const auto Wg = layer.W.rightCols(ng);
  JetBlock<Scalar> out(layer.outputs(), n);
  out.data().noalias() = Wl * local.data();
  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> shift = Wg * g.value + layer.b;
  out.slot(kVal).colwise() += shift;
  if (g.record.kind == PoolKind::average) {
    if (!h) throw std::invalid_argument("concat_affine_forward: average pooling needs the pooled block");
    out.data().rightCols((kNumSlots - 1) * n).noalias() +=
        (Wg * h->data().rightCols((kNumSlots - 1) * n)) / Scalar(n);
  } else {
    for (Eigen::Index c = 0; c < ng; ++c) {
      const Eigen::Index j = g.record.winners[c];
      for (int s = kDx; s < kNumSlots; ++s) out.slot(s).col(j) += Wg.col(c) * g.winner_jets.slot(s)(c, 0);
    }
  }
  return out;
}

/// Adjoint of concat_affine_forward. Accumulates into d_local, and into d_h
/// (average pooling) or d_winner, the adjoint of g.winner_jets (max pooling).
template <typename Scalar>
void concat_affine_backward(const SharedLayer<Scalar>& layer, const JetBlock<Scalar>& local,
                            const PooledFeature<Scalar>& g, const std::type_identity_t<JetBlock<Scalar>>* h,
                            const JetBlock<Scalar>& d_out, LayerGradient<Scalar>& grad, JetBlock<Scalar>& d_local,
                            std::type_identity_t<JetBlock<Scalar>>* d_h,
                            std::type_identity_t<JetBlock<Scalar>>* d_winner) {
  const Eigen::Index nl = local.channels();
  const Eigen::Index ng = g.value.size();
  const Eigen::Index n = local.points();
  const auto Wl = layer.W.leftCols(nl);
  const auto Wg = layer.W.rightCols(ng);

  grad.W.leftCols(nl).noalias() += d_out.data() * local.data().transpose();
  d_local.data().noalias() += Wl.transpose() * d_out.data();

  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> sum_val = d_out.slot(kVal).rowwise().sum();
  grad.b += sum_val;
  grad.W.rightCols(ng).noalias() += sum_val * g.value.transpose();
  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> d_value = Wg.transpose() * sum_val;

  if (g.record.kind == PoolKind::average) {
    if (!h || !d_h) throw std::invalid_argument("concat_affine_backward: average pooling needs the pooled block");
    const auto dr = d_out.data().rightCols((kNumSlots - 1) * n);
    const auto hr = h->data().rightCols((kNumSlots - 1) * n);
    grad.W.rightCols(ng).noalias() += (dr * hr.transpose()) / Scalar(n);
    d_h->data().rightCols((kNumSlots - 1) * n).noalias() += (Wg.transpose() * dr) / Scalar(n);
    d_h->slot(kVal).colwise() += d_value / Scalar(n);
  } else {
    if (!d_winner) throw std::invalid_argument("concat_affine_backward: max pooling needs a winner adjoint");
    for (Eigen::Index c = 0; c < ng; ++c) {
      const Eigen::Index j = g.record.winners[c];
      for (int s = kDx; s < kNumSlots; ++s) {
        const auto dcol = d_out.slot(s).col(j);
        grad.W.col(nl + c) += dcol * g.winner_jets.slot(s)(c, 0);
        d_winner->slot(s)(c, 0) += Wg.col(c).dot(dcol);
      }
      d_winner->slot(kVal)(c, 0) += d_value(c);
    }
  }
}

// ---------------------------------------------------------------------------
// Tape

/// Records a jet program over a ParamStore and replays it in reverse.
///
/// A tape supports exactly one backward pass; record a new one to
/// differentiate again. The ParamStore must outlive the tape and must not
/// change between forward and backward.
template <typename Scalar>
class Tape {
 public:
  using NodeId = std::size_t;
  using PoolId = std::size_t;

  explicit Tape(const ParamStore<Scalar>& params) : params_(&params) {}

  NodeId input(JetBlock<Scalar> x) {
    nodes_.push_back(std::move(x));
    return nodes_.size() - 1;
  }

  NodeId affine(std::size_t layer, NodeId in) {
    nodes_.push_back(affine_forward(params_->layers.at(layer), nodes_.at(in)));
    ops_.push_back(AffineOp{layer, in, nodes_.size() - 1});
    return nodes_.size() - 1;
  }

  NodeId tanh(NodeId in) {
    nodes_.push_back(tanh_forward(nodes_.at(in)));
    ops_.push_back(TanhOp{in, nodes_.size() - 1});
    return nodes_.size() - 1;
  }

  PoolId pool(NodeId in, PoolKind kind) {
    PoolEntry e;
    e.feature = pipn::pool(nodes_.at(in), kind);
    e.source = in;
    pooled_.push_back(std::move(e));
    return pooled_.size() - 1;
  }

  /// Fused tanh(affine) + max pooling; see affine_tanh_max_pool.
  PoolId affine_tanh_max_pool(std::size_t layer, NodeId in) {
    PoolEntry e;
    e.feature = pipn::affine_tanh_max_pool(params_->layers.at(layer), nodes_.at(in), e.z_winner);
    e.source = in;
    e.fused_layer = layer;
    pooled_.push_back(std::move(e));
    return pooled_.size() - 1;
  }

  NodeId concat_affine(std::size_t layer, NodeId local, PoolId g) {
    const auto& p = pooled_.at(g);
    nodes_.push_back(concat_affine_forward(params_->layers.at(layer), nodes_.at(local), p.feature,
                                           p.fused_layer ? nullptr : &nodes_.at(p.source)));
    ops_.push_back(ConcatAffineOp{layer, local, g, nodes_.size() - 1});
    return nodes_.size() - 1;
  }

  const JetBlock<Scalar>& node(NodeId id) const { return nodes_.at(id); }
  const PooledFeature<Scalar>& pooled(PoolId id) const { return pooled_.at(id).feature; }
  bool recorded() const { return !ops_.empty(); }

  /// Reverse sweep from `output` seeded with its adjoint. Parameter
  /// gradients are added to `grads`.
  void backward(NodeId output, const JetBlock<Scalar>& d_output, GradientSet<Scalar>& grads) {
    if (ops_.empty()) throw std::logic_error("backward: no forward pass recorded");
    if (consumed_) throw std::logic_error("backward: tape already consumed; run forward again");
    consumed_ = true;
    const auto& out = nodes_.at(output);
    if (d_output.channels() != out.channels() || d_output.points() != out.points()) {
      throw std::invalid_argument("backward: output adjoint shape mismatch");
    }
    std::vector<std::optional<JetBlock<Scalar>>> adj(nodes_.size());
    adj[output] = d_output;
    auto adj_of = [&](NodeId id) -> JetBlock<Scalar>& {
      if (!adj[id]) adj[id] = JetBlock<Scalar>(nodes_[id].channels(), nodes_[id].points());
      return *adj[id];
    };
    auto add_to = [&](NodeId id, JetBlock<Scalar>&& d) {
      if (!adj[id]) {
        adj[id] = std::move(d);
      } else {
        adj[id]->data() += d.data();
      }
    };

    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) {
      std::visit(
          [&](const auto& op) {
            using Op = std::decay_t<decltype(op)>;
            if (!adj[op.out]) return;
            const JetBlock<Scalar> d_out = std::move(*adj[op.out]);
            adj[op.out].reset();
            if constexpr (std::is_same_v<Op, AffineOp>) {
              add_to(op.in, affine_backward(params_->layers[op.layer], nodes_[op.in], d_out, grads.at(op.layer)));
            } else if constexpr (std::is_same_v<Op, TanhOp>) {
              add_to(op.in, tanh_backward(nodes_[op.in], nodes_[op.out], d_out));
            } else {
              const auto& p = pooled_[op.pooled];
              const auto& layer = params_->layers[op.layer];
              if (p.feature.record.kind == PoolKind::average) {
                concat_affine_backward(layer, nodes_[op.local], p.feature, &nodes_[p.source], d_out,
                                       grads.at(op.layer), adj_of(op.local), &adj_of(p.source), nullptr);
                return;
              }
              JetBlock<Scalar> d_winner(p.feature.value.size(), 1);
              concat_affine_backward(layer, nodes_[op.local], p.feature, nullptr, d_out, grads.at(op.layer),
                                     adj_of(op.local), nullptr, &d_winner);
              if (p.fused_layer) {
                affine_tanh_max_pool_backward(params_->layers[*p.fused_layer], nodes_[p.source], p.feature,
                                              p.z_winner, d_winner, grads.at(*p.fused_layer), adj_of(p.source));
              } else {
                auto& d_h = adj_of(p.source);
                for (Eigen::Index c = 0; c < d_winner.channels(); ++c) {
                  const Eigen::Index j = p.feature.record.winners[c];
                  for (int s = 0; s < kNumSlots; ++s) d_h.slot(s)(c, j) += d_winner.slot(s)(c, 0);
                }
              }
            }
          },
          *it);
    }
  }

 private:
  struct AffineOp {
    std::size_t layer;
    NodeId in, out;
  };
  struct TanhOp {
    NodeId in, out;
  };
  struct ConcatAffineOp {
    std::size_t layer;
    NodeId local;
    PoolId pooled;
    NodeId out;
  };
  struct PoolEntry {
    PooledFeature<Scalar> feature;
    NodeId source = 0;                       ///< pooled block, or the fused layer's input
    std::optional<std::size_t> fused_layer;  ///< set for affine_tanh_max_pool
    JetBlock<Scalar> z_winner;
  };

  const ParamStore<Scalar>* params_;
  std::vector<JetBlock<Scalar>> nodes_;
  std::vector<PoolEntry> pooled_;
  std::vector<std::variant<AffineOp, TanhOp, ConcatAffineOp>> ops_;
  bool consumed_ = false;
};

// ---------------------------------------------------------------------------
// Finite differences

/// Central-difference estimates of f and its first and second partials at
/// p: (f(x+h)-f(x-h))/2h, (f(x+h)-2f(x)+f(x-h))/h^2, and the four-point
/// stencil for the mixed derivative.
template <typename F>
Jet2<double> finite_difference_probe(F&& f, const Eigen::Vector2d& p, double step) {
  if (!(step > 0)) throw std::invalid_argument("finite_difference_probe: step must be positive");
  const double x = p.x(), y = p.y(), h = step;
  const double f0 = f(x, y);
  const double fxp = f(x + h, y), fxm = f(x - h, y);
  const double fyp = f(x, y + h), fym = f(x, y - h);
  const double fpp = f(x + h, y + h), fpm = f(x + h, y - h);
  const double fmp = f(x - h, y + h), fmm = f(x - h, y - h);
  return {f0,
          (fxp - fxm) / (2 * h),
          (fyp - fym) / (2 * h),
          (fxp - 2 * f0 + fxm) / (h * h),
          (fyp - 2 * f0 + fym) / (h * h),
          (fpp - fpm - fmp + fmm) / (4 * h * h)};
}

}  // namespace pipn
