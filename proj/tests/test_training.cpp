#include <doctest.h>

#include <algorithm>
#include <set>

#include "pipn/training.hpp"
#include "support.hpp"

using namespace pipn;
using test::rel_err;

namespace {

// Output jets for u = x^2 + 3xy, v = -y^2 + x at every point.
JetBlock<double> quadratic_outputs(int n) {
  JetBlock<double> out(2, n);
  for (int j = 0; j < n; ++j) {
    out.set(0, j, {0, 0, 0, 2, 0, 3});
    out.set(1, j, {0, 1, 0, 0, -2, 0});
  }
  return out;
}

double full_loss(const PipnModel& m, const GeometrySample& g, double ws) {
  const Material mat;
  return geometry_loss(geometry_objective(m, g, mat, 1.0, ws, 1.0, nullptr), 1.0, ws);
}

// Compares analytic parameter gradients with central differences over every
// parameter of the model.
template <typename Loss>
int check_parameter_gradients(PipnModel& m, const GradientSet<double>& grads, Loss&& loss, double step = 1e-4) {
  int failures = 0;
  for (std::size_t l = 0; l < m.layer_count(); ++l) {
    auto visit = [&](auto& p, const auto& g) {
      for (Eigen::Index i = 0; i < p.size(); ++i) {
        const double keep = p.data()[i];
        p.data()[i] = keep + step;
        const double fp = loss();
        p.data()[i] = keep - step;
        const double fm = loss();
        p.data()[i] = keep;
        const double fd = (fp - fm) / (2 * step);
        if (rel_err(fd, g.data()[i], 1e-6) >= 1e-4) {
          ++failures;
          MESSAGE("layer " << l << " entry " << i << ": analytic " << g.data()[i] << ", fd " << fd);
        }
      }
    };
    visit(m.params.layers[l].W, grads[l].W);
    visit(m.params.layers[l].b, grads[l].b);
  }
  return failures;
}

Dataset micro_dataset(int geometries, int points, int sensors) {
  Dataset d;
  for (int k = 0; k < geometries; ++k) {
    d.push_back(test::synthetic_sample(test::random_cloud(points, 50 + k), sensors, 60 + k));
  }
  return d;
}

}  // namespace

TEST_CASE("momentum residual of a quadratic field") {
  const Material mat;
  const auto out = quadratic_outputs(3);
  Eigen::Matrix2Xd grad(2, 3);
  grad << 1, 0, 2,
          0, 1, -1;
  const auto r = residual_momentum(out, grad, mat);
  const double a = mat.a(), b = mat.b(), beta = mat.beta();
  // u_xx = 2, u_xy = 3, v_yy = -2, everything else zero.
  for (int j = 0; j < 3; ++j) {
    CHECK(r.rx(j) == doctest::Approx(-2 * a + beta * grad(0, j)));
    CHECK(r.ry(j) == doctest::Approx(-b * 3 + 2 * a - 1.5 + beta * grad(1, j)));
  }
  CHECK(r.jx == doctest::Approx(r.rx.squaredNorm() / 3));
  CHECK(r.jy == doctest::Approx(r.ry.squaredNorm() / 3));
  Eigen::Matrix2Xd forcing = Eigen::Matrix2Xd::Ones(2, 3);
  const auto rf = residual_momentum(out, grad, mat, &forcing);
  CHECK((r.rx.array() - 1 - rf.rx.array()).abs().maxCoeff() < 1e-15);
  CHECK_THROWS_AS(residual_momentum(out, Eigen::Matrix2Xd(2, 2), mat), std::invalid_argument);
}

TEST_CASE("thermal coefficient is alpha/(1-nu)") {
  const Material mat{0.3, 2.0};
  CHECK(mat.beta() == doctest::Approx(2.0 / 0.7));
  CHECK(mat.a() == doctest::Approx(1 / 0.7));
  CHECK(mat.b() == doctest::Approx(0.3 / 0.7));
  CHECK_THROWS(Material{0.5, 1.0}.validate());
  CHECK_THROWS(Material{0.3, 0.0}.validate());
}

TEST_CASE("sensor residual") {
  Eigen::MatrixXd values(2, 3);
  values << 0.1, 0.2, 0.3,
            -0.1, 0.0, 0.5;
  SensorSet s;
  s.indices = {0, 2};
  s.u = Eigen::Vector2d(0.0, 0.3);
  s.v = Eigen::Vector2d(0.1, 0.1);
  // ((0.1)^2 + (-0.2)^2 + 0 + 0.4^2) / 2
  CHECK(residual_sensor(values, s) == doctest::Approx((0.01 + 0.04 + 0.16) / 2));
  CHECK_THROWS_AS(residual_sensor(values, SensorSet{}), std::invalid_argument);
  s.indices[1] = 3;
  CHECK_THROWS_AS(residual_sensor(values, s), std::out_of_range);
}

TEST_CASE("geometry and batch loss") {
  const ResidualBreakdown a{0.5, 0.25, 0.1, 10, 2}, b{1.0, 1.0, 0.0, 10, 2};
  CHECK(geometry_loss(a, 1.0, 50.0) == doctest::Approx(0.75 + 5.0));
  CHECK(geometry_loss(a, 2.0, 1.0) == doctest::Approx(1.6));
  CHECK(batch_loss({a, b}, 1.0, 50.0) == doctest::Approx((5.75 + 2.0) / 2));
  CHECK_THROWS_AS(batch_loss({}, 1.0, 1.0), std::invalid_argument);
}

TEST_CASE("sensor weight schedules") {
  // mpmath, 20 digits
  const WeightSchedule ex{ScheduleKind::exp_decay};
  CHECK(weight_sensor(ex, 0) == doctest::Approx(50.0).epsilon(1e-15));
  CHECK(weight_sensor(ex, 800) == doctest::Approx(18.39397205857211608).epsilon(1e-14));
  CHECK(weight_sensor(ex, 8000) == 1.0);
  const WeightSchedule lg{ScheduleKind::log_decay};
  CHECK(weight_sensor(lg, 0) == doctest::Approx(50.043962576208795397).epsilon(1e-14));
  CHECK(weight_sensor(lg, 800) == doctest::Approx(48.107008233016407953).epsilon(1e-14));
  CHECK(weight_sensor(lg, 8000) == 1.0);
  CHECK(weight_sensor(WeightSchedule{ScheduleKind::constant_equal}, 123) == 1.0);
  CHECK(weight_sensor(WeightSchedule{}, 123) == 50.0);
  CHECK_THROWS_AS(weight_sensor(ex, -1), std::invalid_argument);

  for (const auto& s : {ex, lg}) {
    double prev = weight_sensor(s, 0);
    for (int e = 1; e <= 5000; ++e) {
      const double w = weight_sensor(s, e);
      CHECK(w <= prev);
      CHECK(w >= 1.0);
      prev = w;
    }
  }
  for (auto k : {ScheduleKind::constant_equal, ScheduleKind::constant_high, ScheduleKind::exp_decay,
                 ScheduleKind::log_decay}) {
    CHECK(parse_schedule_kind(to_string(k)) == k);
  }
  CHECK_THROWS_AS(parse_schedule_kind("cosine"), std::invalid_argument);
  WeightSchedule bad{ScheduleKind::exp_decay};
  bad.r1 = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("Adam: first steps by hand") {
  ParamStore<double> p;
  p.layers.push_back({Eigen::MatrixXd::Constant(1, 1, 1.0), Eigen::VectorXd::Constant(1, -1.0)});
  auto st = AdamState::zeros_like(p);
  GradientSet<double> g = p.zero_gradients();
  g[0].W(0, 0) = 0.5;
  g[0].b(0) = -2.0;
  const AdamSettings s;
  adam_step(p, g, st, s);
  CHECK(st.t == 1);
  CHECK(p.layers[0].W(0, 0) == doctest::Approx(1.0 - 3e-4 * 0.5 / (0.5 + 1e-6)).epsilon(1e-14));
  CHECK(p.layers[0].b(0) == doctest::Approx(-1.0 + 3e-4 * 2.0 / (2.0 + 1e-6)).epsilon(1e-14));
  CHECK(st.m[0].W(0, 0) == doctest::Approx(0.05));
  CHECK(st.v[0].W(0, 0) == doctest::Approx(0.00025));

  // Second step with a different gradient.
  g[0].W(0, 0) = 0.1;
  const double m2 = 0.9 * 0.05 + 0.1 * 0.1, v2 = 0.999 * 0.00025 + 0.001 * 0.01;
  const double mhat = m2 / (1 - 0.81), vhat = v2 / (1 - 0.999 * 0.999);
  const double before = p.layers[0].W(0, 0);
  adam_step(p, g, st, s);
  CHECK(p.layers[0].W(0, 0) == doctest::Approx(before - 3e-4 * mhat / (std::sqrt(vhat) + 1e-6)).epsilon(1e-14));

  g[0].b(0) = std::nan("");
  CHECK_THROWS_AS(adam_step(p, g, st, s), std::runtime_error);
  CHECK(st.t == 2);
}

TEST_CASE("loss gradient matches finite differences on micro-nets") {
  for (auto kind : {PoolKind::max, PoolKind::average}) {
    CAPTURE(to_string(kind));
    auto m = build_pipn(test::micro_arch(kind), 3);
    test::randomize_biases(m, 4);
    const auto g = test::synthetic_sample(test::random_cloud(5, 5), 3, 6);
    auto grads = m.params.zero_gradients();
    geometry_objective(m, g, Material{}, 1.0, 50.0, 1.0, &grads);
    CHECK(check_parameter_gradients(m, grads, [&] { return full_loss(m, g, 50.0); }) == 0);
  }
}

TEST_CASE("gradient of the batch loss over two geometries") {
  auto m = build_pipn(test::micro_arch(PoolKind::max), 7);
  test::randomize_biases(m, 8);
  const auto data = micro_dataset(2, 5, 3);
  auto grads = m.params.zero_gradients();
  for (const auto& g : data) geometry_objective(m, g, Material{}, 1.0, 50.0, 0.5, &grads);
  const std::vector<std::size_t> order{0, 1};
  CHECK(check_parameter_gradients(m, grads, [&] {
          return batched_dataset_loss(m, data, Material{}, 1.0, 50.0, 2, order);
        }) == 0);
}

TEST_CASE("with manufactured forcing the exact fields have zero residual gradient") {
  // A linear-output model whose outputs are exactly u = v = 0 has residual
  // beta grad T - s. Choosing s = beta grad T makes every gradient vanish.
  auto m = build_pipn({1.0 / 64, 2, 2, PoolKind::max, OutputActivation::linear}, 9);
  for (auto& l : m.params.layers) l.W.setZero();
  auto g = test::synthetic_sample(test::random_cloud(6, 10), 2, 11);
  g.sensors.u.setZero();
  g.sensors.v.setZero();
  g.forcing = Material{}.beta() * g.cloud.temp_grad;
  auto grads = m.params.zero_gradients();
  const auto r = geometry_objective(m, g, Material{}, 1.0, 50.0, 1.0, &grads);
  CHECK(r.mom_x == 0.0);
  CHECK(r.sensor == 0.0);
  for (const auto& l : grads) {
    CHECK(l.W.isZero(0));
    CHECK(l.b.isZero(0));
  }
}

TEST_CASE("batched loss equals the plain mean for every batch size") {
  const auto m = build_pipn(test::micro_arch(PoolKind::average), 12);
  const auto data = micro_dataset(5, 6, 3);
  const auto order = epoch_order(1, 0, data.size());
  const double plain = batched_dataset_loss(m, data, Material{}, 1.0, 50.0, 5, order);
  double mean = 0;
  for (const auto& g : data) mean += full_loss(m, g, 50.0) / 5;
  CHECK(plain == doctest::Approx(mean).epsilon(1e-14));
  for (int b : {1, 2, 3, 4}) {
    CHECK(batched_dataset_loss(m, data, Material{}, 1.0, 50.0, b, order) == doctest::Approx(mean).epsilon(1e-14));
  }
}

TEST_CASE("epoch order is a seeded permutation") {
  const auto a = epoch_order(1, 0, 10);
  CHECK(std::set<std::size_t>(a.begin(), a.end()).size() == 10);
  CHECK(*std::max_element(a.begin(), a.end()) == 9);
  CHECK(epoch_order(1, 0, 10) == a);
  CHECK(epoch_order(1, 1, 10) != a);
  CHECK(epoch_order(2, 0, 10) != a);
  CHECK(epoch_order(1, 0, 1) == std::vector<std::size_t>{0});
}

TEST_CASE("train: step counts, zero epochs, validation") {
  const auto data = micro_dataset(5, 6, 3);
  TrainConfig cfg;
  cfg.arch = test::micro_arch(PoolKind::max);
  cfg.epochs = 0;
  cfg.batch_size = 2;
  auto st = initial_state(cfg);
  const auto before = st.model.params.layers[3].W;
  CHECK(train(data, cfg, Material{}, st).empty());
  CHECK(st.model.params.layers[3].W == before);

  cfg.epochs = 3;
  const auto rec = train(data, cfg, Material{}, st);
  CHECK(rec.size() == 3);
  CHECK(st.epoch == 3);
  CHECK(st.adam.t == 3 * 3);  // ceil(5 / 2) steps per epoch
  CHECK(rec[2].epoch == 2);
  CHECK(rec[0].omega_sensor == 50.0);

  cfg.batch_size = 5;
  cfg.epochs = 5;
  train(data, cfg, Material{}, st);
  CHECK(st.adam.t == 9 + 2);

  cfg.batch_size = 6;
  CHECK_THROWS_AS(cfg.validate(5), std::invalid_argument);
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(5), std::invalid_argument);
}

TEST_CASE("train: B = m records the full-dataset loss before each step") {
  const auto data = micro_dataset(3, 6, 3);
  TrainConfig cfg;
  cfg.arch = test::micro_arch(PoolKind::average);
  cfg.batch_size = 3;
  cfg.epochs = 4;
  auto st = initial_state(cfg);
  TrainState probe = st;
  std::vector<double> expected;
  for (int e = 0; e < 4; ++e) {
    expected.push_back(batched_dataset_loss(probe.model, data, Material{}, 1.0, 50.0, 3, {0, 1, 2}));
    auto one = cfg;
    one.epochs = e + 1;
    train(data, one, Material{}, probe);
  }
  const auto rec = train(data, cfg, Material{}, st);
  for (int e = 0; e < 4; ++e) CHECK(rec[e].loss == doctest::Approx(expected[e]).epsilon(1e-13));
}

TEST_CASE("train: bitwise reproducible, with and without threads") {
  const auto data = micro_dataset(6, 8, 4);
  TrainConfig cfg;
  cfg.arch = {0.125, 2, 2, PoolKind::max, OutputActivation::tanh};
  cfg.batch_size = 3;
  cfg.epochs = 4;
  cfg.seed = 21;
  auto a = initial_state(cfg), b = initial_state(cfg), c = initial_state(cfg);
  const auto ra = train(data, cfg, Material{}, a);
  const auto rb = train(data, cfg, Material{}, b);
  cfg.threads = 3;
  const auto rc = train(data, cfg, Material{}, c);
  for (int e = 0; e < 4; ++e) {
    CHECK(ra[e].loss == rb[e].loss);
    CHECK(ra[e].loss == rc[e].loss);
  }
  for (std::size_t l = 0; l < a.model.layer_count(); ++l) {
    CHECK(a.model.params.layers[l].W == b.model.params.layers[l].W);
    CHECK(a.model.params.layers[l].W == c.model.params.layers[l].W);
    CHECK(a.adam.v[l].b == c.adam.v[l].b);
  }
}

TEST_CASE("train: callback sees every epoch, splitting a run changes nothing") {
  const auto data = micro_dataset(4, 6, 3);
  TrainConfig cfg;
  cfg.arch = test::micro_arch(PoolKind::max);
  cfg.batch_size = 3;
  cfg.epochs = 6;
  auto whole = initial_state(cfg), split = initial_state(cfg);
  std::vector<int> seen;
  const auto r1 = train(data, cfg, Material{}, whole, [&](const TrainState& s, const EpochRecord& r) {
    CHECK(s.epoch == r.epoch + 1);
    seen.push_back(r.epoch);
  });
  CHECK(seen == std::vector<int>{0, 1, 2, 3, 4, 5});
  auto half = cfg;
  half.epochs = 2;
  train(data, half, Material{}, split);
  const auto r2 = train(data, cfg, Material{}, split);
  CHECK(r2.size() == 4);
  CHECK(r2.back().loss == r1.back().loss);
  CHECK(split.model.params.layers[0].W == whole.model.params.layers[0].W);
}

TEST_CASE("train: rejects mismatched clouds and non-finite losses") {
  auto data = micro_dataset(2, 6, 3);
  TrainConfig cfg;
  cfg.arch = test::micro_arch(PoolKind::max);
  cfg.batch_size = 1;
  cfg.epochs = 1;
  auto st = initial_state(cfg);
  data.push_back(test::synthetic_sample(test::random_cloud(7, 1), 3, 2));
  CHECK_THROWS_AS(train(data, cfg, Material{}, st), std::invalid_argument);
  data.pop_back();
  st.model.params.layers[0].b(0) = std::nan("");
  try {
    train(data, cfg, Material{}, st);
    FAIL("expected a throw");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("epoch 0") != std::string::npos);
  }
}

TEST_CASE("manufactured problem: loss falls by two orders of magnitude") {
  const auto mc = manufactured_case("polynomial");
  const DomainSpec spec{6, 0.3, 7, 2.0};
  GeometrySample g;
  g.name = "manufactured";
  g.cloud = sample_point_cloud(spec, 200, 28, 12, 3);
  const Eigen::Index n = g.cloud.size();
  g.cloud.temperature.resize(n);
  g.cloud.temp_grad.resize(2, n);
  g.forcing.resize(2, n);
  g.sensors.u.resize(n);
  g.sensors.v.resize(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const Point p = g.cloud.coords.col(j);
    g.cloud.temperature(j) = mc.T(p.x(), p.y());
    g.cloud.temp_grad.col(j) = mc.temperature_gradient(p);
    g.forcing.col(j) = mc.forcing(p);
    g.sensors.indices.push_back(static_cast<int>(j));
    g.sensors.u(j) = mc.u(p.x(), p.y());
    g.sensors.v(j) = mc.v(p.x(), p.y());
  }
  TrainConfig cfg;
  cfg.arch = {0.125, 2, 2, PoolKind::max, OutputActivation::tanh};
  cfg.batch_size = 1;
  cfg.epochs = 1000;
  cfg.adam.lr = 1e-3;
  auto st = initial_state(cfg);
  const auto rec = train({g}, cfg, mc.material(), st);
  MESSAGE("manufactured loss " << rec.front().loss << " -> " << rec.back().loss);
  CHECK(rec.back().loss * 100 <= rec.front().loss);
}

TEST_CASE("evaluate: relative errors and the zero-reference fallback") {
  const auto m = build_pipn(test::micro_arch(PoolKind::max), 30);
  auto g = test::synthetic_sample(test::random_cloud(6, 31), 2, 32);
  const Eigen::MatrixXd pred = forward_values(m, g.cloud.coords);
  g.cloud.u_ref = pred.row(0).transpose();
  g.cloud.v_ref = 2 * pred.row(1).transpose();
  auto z = g;
  z.name = "zero";
  z.cloud.u_ref.setZero();
  const auto rep = evaluate(m, {g, z});
  REQUIRE(rep.per_geometry.size() == 2);
  CHECK(rep.per_geometry[0].u < 1e-15);
  CHECK(rep.per_geometry[0].v == doctest::Approx(0.5));
  CHECK_FALSE(rep.per_geometry[0].u_absolute);
  CHECK(rep.per_geometry[1].u_absolute);
  CHECK(rep.per_geometry[1].u == doctest::Approx(pred.row(0).norm()));
  CHECK(rep.v.mean == doctest::Approx(0.5));
  CHECK(rep.u.max == doctest::Approx(pred.row(0).norm()));
  auto no_ref = g;
  no_ref.cloud.u_ref.resize(0);
  CHECK_THROWS_AS(evaluate(m, {no_ref}), std::invalid_argument);
}
