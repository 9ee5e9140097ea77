#include <doctest.h>

#include <cmath>

#include "pipn/autodiff.hpp"
#include "support.hpp"

using namespace pipn;

TEST_CASE("tanh_jet at zero with unit seed") {
  const auto a = tanh_jet(Jet2<double>{0, 1, 0, 0, 0, 0});
  CHECK(a.val == 0.0);
  CHECK(a.dx == 1.0);
  CHECK(a.dxx == 0.0);
  CHECK(a.dy == 0.0);
}

TEST_CASE("tanh_jet value at one") {
  // mpmath, 50 digits
  CHECK(tanh_jet(Jet2<double>::constant(1.0)).val == doctest::Approx(0.76159415595576488812).epsilon(1e-15));
}

TEST_CASE("Jet2 arithmetic follows the product and chain rules") {
  const double x0 = 0.3, y0 = -0.7;
  const auto x = Jet2<double>::variable_x(x0);
  const auto y = Jet2<double>::variable_y(y0);
  // f = x^2 y + sin(x y)
  const auto f = x * x * y + sin(x * y);
  const double xy = x0 * y0;
  CHECK(f.val == doctest::Approx(x0 * x0 * y0 + std::sin(xy)));
  CHECK(f.dx == doctest::Approx(2 * x0 * y0 + y0 * std::cos(xy)));
  CHECK(f.dy == doctest::Approx(x0 * x0 + x0 * std::cos(xy)));
  CHECK(f.dxx == doctest::Approx(2 * y0 - y0 * y0 * std::sin(xy)));
  CHECK(f.dyy == doctest::Approx(-x0 * x0 * std::sin(xy)));
  CHECK(f.dxy == doctest::Approx(2 * x0 + std::cos(xy) - xy * std::sin(xy)));
}

TEST_CASE("tanh_array agrees with std::tanh") {
  Eigen::ArrayXd x = Eigen::ArrayXd::LinSpaced(2001, -20, 20);
  x(1000) = 0;
  const Eigen::ArrayXd t = tanh_array(x);
  for (Eigen::Index i = 0; i < x.size(); ++i) CHECK(std::abs(t(i) - std::tanh(x(i))) <= 4e-16);
  const Eigen::ArrayXd tiny = Eigen::ArrayXd::LinSpaced(11, -1e-3, 1e-3);
  const Eigen::ArrayXd tt = tanh_array(tiny);
  for (Eigen::Index i = 0; i < tiny.size(); ++i) CHECK(std::abs(tt(i) - std::tanh(tiny(i))) <= 4e-16);
  CHECK(tanh_array(Eigen::ArrayXd::Constant(1, -0.0))(0) == 0.0);
}

TEST_CASE("JetBlock slots are contiguous column ranges") {
  JetBlock<double> b(3, 4);
  b.set(2, 1, {1, 2, 3, 4, 5, 6});
  CHECK(b.slot(kDyy)(2, 1) == 5);
  CHECK(b.data()(2, kDxy * 4 + 1) == 6);
  const auto j = b.at(2, 1);
  CHECK(j.dx == 2);
  CHECK(j.dxy == 6);
  CHECK_THROWS_AS(JetBlock<double>(Eigen::MatrixXd::Zero(2, 7), 1), std::invalid_argument);
}

TEST_CASE("seed_coordinates carries unit first derivatives") {
  Eigen::Matrix2Xd c(2, 2);
  c << 0.1, 0.2, 0.3, 0.4;
  const auto s = seed_coordinates<double>(c);
  CHECK(s.at(0, 1).val == 0.2);
  CHECK(s.at(0, 1).dx == 1);
  CHECK(s.at(0, 1).dy == 0);
  CHECK(s.at(1, 0).dy == 1);
  CHECK(s.slot(kDxx).isZero());
}

TEST_CASE("finite_difference_probe on polynomials and sin") {
  const auto p = finite_difference_probe([](double x, double) { return x * x; }, Eigen::Vector2d(3, 0), 1e-4);
  CHECK(std::abs(p.dx - 6) < 1e-7);
  CHECK(std::abs(p.dxx - 2) < 1e-4);
  const auto s = finite_difference_probe([](double x, double) { return std::sin(x); }, Eigen::Vector2d(0, 0), 1e-4);
  CHECK(std::abs(s.dx - 1) < 1e-8);
  const auto m = finite_difference_probe([](double x, double y) { return x * y; }, Eigen::Vector2d(0.4, -1.3), 1e-3);
  CHECK(std::abs(m.dxy - 1) < 1e-9);
  CHECK_THROWS_AS(finite_difference_probe([](double, double) { return 0.0; }, Eigen::Vector2d(0, 0), 0.0),
                  std::invalid_argument);
}
