#include <doctest.h>

#include <numeric>

#include "pipn/model.hpp"
#include "support.hpp"

using namespace pipn;
using test::rel_err;

TEST_CASE("layer plan widths") {
  const auto p = plan_layers({1.0, 2, 2, PoolKind::max, OutputActivation::tanh});
  CHECK(p.encoder1 == std::vector<int>{64, 64});
  CHECK(p.encoder2 == std::vector<int>{64, 128, 1024});
  CHECK(p.decoder1 == std::vector<int>{512, 256, 128});
  CHECK(p.decoder2 == std::vector<int>{128, 2});
  CHECK(p.concat_width() == 1088);
  const auto h = plan_layers({0.5, 2, 2, PoolKind::max, OutputActivation::tanh});
  CHECK(h.concat_width() == 544);
  const auto micro = plan_layers(test::micro_arch(PoolKind::max));
  CHECK(micro.encoder1 == std::vector<int>{1, 1});
  CHECK(micro.encoder2 == std::vector<int>{1, 2, 16});
  CHECK(micro.decoder1 == std::vector<int>{8, 4, 2});
  CHECK(micro.decoder2 == std::vector<int>{2, 2});
  CHECK_THROWS_AS(plan_layers({0.3, 2, 2, PoolKind::max, OutputActivation::tanh}), std::invalid_argument);
  CHECK_THROWS_AS(plan_layers({0.0, 2, 2, PoolKind::max, OutputActivation::tanh}), std::invalid_argument);
}

TEST_CASE("parameter counts match frozen values") {
  for (auto [ns, want] : {std::pair{1.0, 887490}, std::pair{0.5, 222562}}) {
    const ArchDescriptor arch{ns, 2, 2, PoolKind::max, OutputActivation::tanh};
    CHECK(expected_parameter_count(arch) == want);
    CHECK(count_parameters(build_pipn(arch, 1)) == want);
  }
  const auto m = build_pipn({0.5, 2, 2, PoolKind::max, OutputActivation::tanh}, 1);
  CHECK(m.layer_count() == 10);
  CHECK(m.concat_layer() == 5);
  CHECK(m.params.layers[0].W.rows() == 32);
  CHECK(m.params.layers[0].W.cols() == 2);
  CHECK(m.params.layers[5].W.cols() == 544);
}

TEST_CASE("initialization: Glorot bounds, zero biases, seeded") {
  const ArchDescriptor arch{0.125, 2, 2, PoolKind::max, OutputActivation::tanh};
  const auto a = build_pipn(arch, 7), b = build_pipn(arch, 7), c = build_pipn(arch, 8);
  for (std::size_t i = 0; i < a.layer_count(); ++i) {
    const auto& l = a.params.layers[i];
    const double bound = std::sqrt(6.0 / static_cast<double>(l.W.rows() + l.W.cols()));
    CHECK(l.W.cwiseAbs().maxCoeff() <= bound);
    CHECK(l.W.cwiseAbs().maxCoeff() > 0.5 * bound);
    CHECK(l.b.isZero(0));
    CHECK(l.W == b.params.layers[i].W);
    CHECK(l.W != c.params.layers[i].W);
  }
}

TEST_CASE("output activation names") {
  CHECK(parse_output_activation("linear") == OutputActivation::linear);
  CHECK(parse_output_activation(to_string(OutputActivation::tanh)) == OutputActivation::tanh);
  CHECK_THROWS_AS(parse_output_activation("relu"), std::invalid_argument);
}

TEST_CASE("outputs are point-order equivariant") {
  for (auto kind : {PoolKind::max, PoolKind::average}) {
    CAPTURE(to_string(kind));
    const auto m = build_pipn({0.125, 2, 2, kind, OutputActivation::tanh}, 3);
    const Eigen::Matrix2Xd pts = test::random_cloud(40, 4);
    std::vector<int> perm(40);
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 rng(5);
    std::shuffle(perm.begin(), perm.end(), rng);
    Eigen::Matrix2Xd shuffled(2, 40);
    for (int i = 0; i < 40; ++i) shuffled.col(i) = pts.col(perm[i]);
    const auto a = forward_values(m, pts);
    const auto b = forward_values(m, shuffled);
    for (int i = 0; i < 40; ++i) CHECK((b.col(i) - a.col(perm[i])).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(forward_values(m, pts) == a);
  }
}

TEST_CASE("outputs depend on absolute position") {
  const auto m = build_pipn({0.125, 2, 2, PoolKind::max, OutputActivation::tanh}, 3);
  const Eigen::Matrix2Xd pts = test::random_cloud(20, 6, 0.5);
  const Eigen::Matrix2Xd shifted = pts.colwise() + Eigen::Vector2d(0.3, -0.2);
  CHECK((forward_values(m, pts) - forward_values(m, shifted)).cwiseAbs().maxCoeff() > 1e-3);
}

TEST_CASE("tanh output stays inside (-1, 1), linear output does not have to") {
  auto m = build_pipn({0.125, 2, 2, PoolKind::max, OutputActivation::tanh}, 9);
  test::scale_weights(m, 4.0);
  const Eigen::Matrix2Xd pts = test::random_cloud(50, 10, 3.0);
  const auto y = forward_values(m, pts);
  CHECK(y.cwiseAbs().maxCoeff() < 1.0);
  m.arch.output = OutputActivation::linear;
  CHECK(forward_values(m, pts).cwiseAbs().maxCoeff() > 1.0);
}

TEST_CASE("duplicating a point leaves max-pooled outputs unchanged") {
  const auto m = build_pipn({0.125, 2, 2, PoolKind::max, OutputActivation::tanh}, 11);
  const Eigen::Matrix2Xd pts = test::random_cloud(15, 12);
  Eigen::Matrix2Xd dup(2, 16);
  dup << pts, pts.col(4);
  const auto a = forward_values(m, pts);
  const auto b = forward_values(m, dup);
  CHECK((b.leftCols(15) - a).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((b.col(15) - a.col(4)).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("single point and empty clouds") {
  const auto m = build_pipn({0.125, 2, 2, PoolKind::average, OutputActivation::tanh}, 13);
  Eigen::Matrix2Xd one(2, 1);
  one << 0.2, -0.4;
  CHECK(forward_values(m, one).cols() == 1);
  CHECK_THROWS(forward_values(m, Eigen::Matrix2Xd(2, 0)));
  CHECK_THROWS(forward(m, Eigen::Matrix2Xd(2, 0)));
}

TEST_CASE("jet forward values agree with the value-only pass") {
  for (auto kind : {PoolKind::max, PoolKind::average}) {
    for (auto out : {OutputActivation::tanh, OutputActivation::linear}) {
      const auto m = build_pipn({0.25, 2, 2, kind, out}, 14);
      const Eigen::Matrix2Xd pts = test::random_cloud(60, 15);
      const auto fp = forward(m, pts);
      CHECK((fp.outputs().slot(kVal) - forward_values(m, pts)).cwiseAbs().maxCoeff() < 1e-13);
    }
  }
}

TEST_CASE("output jets match finite differences through the pooled feature") {
  int checked = 0;
  for (auto kind : {PoolKind::max, PoolKind::average}) {
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
      CAPTURE(to_string(kind));
      CAPTURE(seed);
      auto m = build_pipn(test::micro_arch(kind), seed);
      test::randomize_biases(m, seed + 100);
      const Eigen::Matrix2Xd pts = test::random_cloud(7, seed + 200);
      const auto jets = forward(m, pts).outputs();
      for (Eigen::Index j = 0; j < 7; ++j) {
        for (int c = 0; c < 2; ++c) {
          const auto fd = test::cloud_fd_probe(m, pts, j, c, 1e-3);
          if (!fd) continue;
          ++checked;
          const auto a = jets.at(c, j);
          CHECK(rel_err(fd->dx, a.dx, 1e-4) < 1e-5);
          CHECK(rel_err(fd->dy, a.dy, 1e-4) < 1e-5);
          CHECK(rel_err(fd->dxx, a.dxx, 1e-3) < 1e-5);
          CHECK(rel_err(fd->dyy, a.dyy, 1e-3) < 1e-5);
          CHECK(rel_err(fd->dxy, a.dxy, 1e-3) < 1e-5);
        }
      }
    }
  }
  CHECK(checked > 120);
}
