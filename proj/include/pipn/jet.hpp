#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace pipn {

/// Value of a scalar field together with its first and second partial
/// derivatives with respect to the two spatial inputs (x, y).
///
/// Only one mixed slot is stored; d/dx d/dy and d/dy d/dx coincide.
template <typename Scalar>
struct Jet2 {
  Scalar val{0};
  Scalar dx{0};
  Scalar dy{0};
  Scalar dxx{0};
  Scalar dyy{0};
  Scalar dxy{0};

  static Jet2 constant(Scalar v) { return {v, 0, 0, 0, 0, 0}; }
  static Jet2 variable_x(Scalar v) { return {v, 1, 0, 0, 0, 0}; }
  static Jet2 variable_y(Scalar v) { return {v, 0, 1, 0, 0, 0}; }
};

namespace detail {

// Chain rule for a scalar function with f, f', f'' evaluated at a.val.
template <typename Scalar>
Jet2<Scalar> compose(const Jet2<Scalar>& a, Scalar f, Scalar f1, Scalar f2) {
  return {f,
          f1 * a.dx,
          f1 * a.dy,
          f2 * a.dx * a.dx + f1 * a.dxx,
          f2 * a.dy * a.dy + f1 * a.dyy,
          f2 * a.dx * a.dy + f1 * a.dxy};
}

}  // namespace detail

template <typename Scalar>
Jet2<Scalar> operator+(const Jet2<Scalar>& a, const Jet2<Scalar>& b) {
  return {a.val + b.val, a.dx + b.dx, a.dy + b.dy, a.dxx + b.dxx, a.dyy + b.dyy, a.dxy + b.dxy};
}

template <typename Scalar>
Jet2<Scalar> operator-(const Jet2<Scalar>& a, const Jet2<Scalar>& b) {
  return {a.val - b.val, a.dx - b.dx, a.dy - b.dy, a.dxx - b.dxx, a.dyy - b.dyy, a.dxy - b.dxy};
}

template <typename Scalar>
Jet2<Scalar> operator-(const Jet2<Scalar>& a) {
  return {-a.val, -a.dx, -a.dy, -a.dxx, -a.dyy, -a.dxy};
}

template <typename Scalar>
Jet2<Scalar> operator*(const Jet2<Scalar>& a, const Jet2<Scalar>& b) {
  return {a.val * b.val,
          a.dx * b.val + a.val * b.dx,
          a.dy * b.val + a.val * b.dy,
          a.dxx * b.val + Scalar(2) * a.dx * b.dx + a.val * b.dxx,
          a.dyy * b.val + Scalar(2) * a.dy * b.dy + a.val * b.dyy,
          a.dxy * b.val + a.dx * b.dy + a.dy * b.dx + a.val * b.dxy};
}

template <typename Scalar>
Jet2<Scalar> operator*(Scalar s, const Jet2<Scalar>& a) {
  return {s * a.val, s * a.dx, s * a.dy, s * a.dxx, s * a.dyy, s * a.dxy};
}

template <typename Scalar>
Jet2<Scalar> operator*(const Jet2<Scalar>& a, Scalar s) {
  return s * a;
}

template <typename Scalar>
Jet2<Scalar> operator+(const Jet2<Scalar>& a, Scalar s) {
  Jet2<Scalar> r = a;
  r.val += s;
  return r;
}

template <typename Scalar>
Jet2<Scalar> operator-(const Jet2<Scalar>& a, Scalar s) {
  return a + (-s);
}

template <typename Scalar>
Jet2<Scalar> sin(const Jet2<Scalar>& a) {
  using std::cos;
  using std::sin;
  const Scalar s = sin(a.val);
  return detail::compose(a, s, cos(a.val), -s);
}

template <typename Scalar>
Jet2<Scalar> cos(const Jet2<Scalar>& a) {
  using std::cos;
  using std::sin;
  const Scalar c = cos(a.val);
  return detail::compose(a, c, -sin(a.val), -c);
}

/// Elementwise tanh as sign(x) (1 - e) / (1 + e) with e = exp(-2|x|), which
/// vectorizes through Eigen's packet exp (there is no packet tanh for
/// double). Absolute error stays within a few ulp of std::tanh.
///
/// The input is copied into a buffer padded to whole packets so that every
/// element takes the packet path; otherwise the trailing elements would go
/// through scalar std::exp and a value's tanh would depend on where it sits
/// in the array (which breaks bitwise permutation invariance).
template <typename Derived>
Eigen::Array<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> tanh_array(const Eigen::ArrayBase<Derived>& x) {
  using S = typename Derived::Scalar;
  constexpr Eigen::Index P = Eigen::internal::packet_traits<S>::size;
  const Eigen::Index n = x.size();
  Eigen::Array<S, Eigen::Dynamic, 1> buf = Eigen::Array<S, Eigen::Dynamic, 1>::Zero((n + P - 1) / P * P);
  Eigen::Map<Eigen::Array<S, Eigen::Dynamic, Eigen::Dynamic>>(buf.data(), x.rows(), x.cols()) = x;
  const Eigen::Array<S, Eigen::Dynamic, 1> e = (S(-2) * buf.abs()).exp();
  const Eigen::Array<S, Eigen::Dynamic, 1> t = (S(1) - e) / (S(1) + e);
  buf = (buf < S(0)).select(-t, t);
  return Eigen::Map<const Eigen::Array<S, Eigen::Dynamic, Eigen::Dynamic>>(buf.data(), x.rows(), x.cols());
}

/// Hyperbolic tangent carried through an order-2 jet.
/// sigma' = 1 - sigma^2, sigma'' = -2 sigma (1 - sigma^2).
template <typename Scalar>
Jet2<Scalar> tanh_jet(const Jet2<Scalar>& z) {
  using std::tanh;
  const Scalar s = tanh(z.val);
  const Scalar s1 = Scalar(1) - s * s;
  return detail::compose(z, s, s1, Scalar(-2) * s * s1);
}

/// Index of a derivative slot inside a JetBlock.
enum Slot : int { kVal = 0, kDx = 1, kDy = 2, kDxx = 3, kDyy = 4, kDxy = 5 };
inline constexpr int kNumSlots = 6;

/// Per-point, per-channel jets for a whole point cloud.
///
/// Storage is one channels x (6 * points) matrix: the six slots sit side by
/// side, so a shared affine map over every slot is a single matrix product.
template <typename Scalar>
class JetBlock {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  JetBlock() = default;
  JetBlock(Eigen::Index channels, Eigen::Index points)
      : data_(Matrix::Zero(channels, kNumSlots * points)), points_(points) {}
  JetBlock(Matrix data, Eigen::Index points) : data_(std::move(data)), points_(points) {
    if (data_.cols() != kNumSlots * points_) {
      throw std::invalid_argument("JetBlock: data has " + std::to_string(data_.cols()) +
                                  " columns, expected " + std::to_string(kNumSlots * points_));
    }
  }

  Eigen::Index channels() const { return data_.rows(); }
  Eigen::Index points() const { return points_; }

  auto slot(int s) { return data_.middleCols(s * points_, points_); }
  auto slot(int s) const { return data_.middleCols(s * points_, points_); }

  Jet2<Scalar> at(Eigen::Index channel, Eigen::Index point) const {
    const auto c = [&](int s) { return data_(channel, s * points_ + point); };
    return {c(kVal), c(kDx), c(kDy), c(kDxx), c(kDyy), c(kDxy)};
  }

  void set(Eigen::Index channel, Eigen::Index point, const Jet2<Scalar>& j) {
    data_(channel, kVal * points_ + point) = j.val;
    data_(channel, kDx * points_ + point) = j.dx;
    data_(channel, kDy * points_ + point) = j.dy;
    data_(channel, kDxx * points_ + point) = j.dxx;
    data_(channel, kDyy * points_ + point) = j.dyy;
    data_(channel, kDxy * points_ + point) = j.dxy;
  }

  Matrix& data() { return data_; }
  const Matrix& data() const { return data_; }

 private:
  Matrix data_;
  Eigen::Index points_ = 0;
};

/// Input jets for a set of 2-D points: value = coordinates, unit first
/// derivative seeds, zero second derivatives.
template <typename Scalar>
JetBlock<Scalar> seed_coordinates(const Eigen::Matrix<Scalar, 2, Eigen::Dynamic>& coords) {
  const Eigen::Index n = coords.cols();
  JetBlock<Scalar> block(2, n);
  block.slot(kVal) = coords;
  block.slot(kDx).row(0).setOnes();
  block.slot(kDy).row(1).setOnes();
  return block;
}

}  // namespace pipn
