#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "pipn/io.hpp"
#include "support.hpp"

using namespace pipn;
namespace fs = std::filesystem;

namespace {

TrainState trained_state() {
  const Dataset data{test::synthetic_sample(test::random_cloud(6, 1), 3, 2),
                     test::synthetic_sample(test::random_cloud(6, 3), 3, 4)};
  TrainConfig cfg;
  cfg.arch = {0.125, 2, 2, PoolKind::average, OutputActivation::linear};
  cfg.batch_size = 1;
  cfg.epochs = 2;
  cfg.seed = 77;
  auto st = initial_state(cfg);
  train(data, cfg, Material{}, st);
  return st;
}

std::string bytes_of(const TrainState& st) {
  std::ostringstream os(std::ios::binary);
  io::save_checkpoint(os, st);
  return os.str();
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("pipn_io_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("checkpoint round trip is byte identical") {
  const auto st = trained_state();
  const std::string a = bytes_of(st);
  std::istringstream is(a, std::ios::binary);
  const auto back = io::load_checkpoint(is);
  CHECK(bytes_of(back) == a);
  CHECK(back.epoch == 2);
  CHECK(back.seed == 77);
  CHECK(back.adam.t == 4);
  CHECK(back.model.arch == st.model.arch);
  for (std::size_t l = 0; l < st.model.layer_count(); ++l) {
    CHECK(back.model.params.layers[l].W == st.model.params.layers[l].W);
    CHECK(back.adam.m[l].W == st.adam.m[l].W);
    CHECK(back.adam.v[l].b == st.adam.v[l].b);
  }
  CHECK(a.substr(0, 8) == "PIPNCKPT");
  // Little-endian version word right after the magic.
  CHECK(a[8] == 1);
  CHECK(a[9] == 0);
}

TEST_CASE("checkpoint files are written atomically and reload") {
  const auto dir = scratch("ckpt");
  const auto st = trained_state();
  io::save_checkpoint(dir / "a.ckpt", st);
  CHECK_FALSE(fs::exists(dir / "a.ckpt.tmp"));
  const auto back = io::load_checkpoint(dir / "a.ckpt");
  CHECK(bytes_of(back) == bytes_of(st));
  CHECK_THROWS(io::load_checkpoint(dir / "missing.ckpt"));
}

TEST_CASE("corrupt checkpoints are rejected") {
  const std::string good = bytes_of(trained_state());
  auto load = [](std::string bytes) {
    std::istringstream is(bytes, std::ios::binary);
    return io::load_checkpoint(is);
  };
  std::string bad_magic = good;
  bad_magic[0] = 'X';
  CHECK_THROWS(load(bad_magic));
  std::string bad_version = good;
  bad_version[8] = 9;
  CHECK_THROWS(load(bad_version));
  CHECK_THROWS(load(good.substr(0, good.size() - 5)));
  CHECK_THROWS(load(good.substr(0, 20)));
  CHECK_THROWS(load(good + "x"));
  CHECK_THROWS(load(""));
}

TEST_CASE("format_double round trips") {
  for (double x : {0.1, 1.0 / 3.0, -2.5e-300, 1e300, 0.0, 123456789.0, 0.30000000000000004}) {
    CHECK(std::stod(io::format_double(x)) == x);
  }
  CHECK(io::format_double(0.5) == "0.5");
  CHECK(io::format_double(50) == "50");
}

TEST_CASE("history and timing csv") {
  const std::vector<EpochRecord> h{{0, 1.0 / 3.0, 50, 0.25}, {1, 0.125, 18.5, 0.5}};
  std::ostringstream os;
  io::write_history_csv(os, h);
  CHECK(os.str().rfind("epoch,loss,omega_sensor\n", 0) == 0);
  CHECK(os.str().find("0.25") == std::string::npos);
  std::istringstream is(os.str());
  const auto back = io::read_history_csv(is);
  REQUIRE(back.size() == 2);
  CHECK(back[0].loss == h[0].loss);
  CHECK(back[1].omega_sensor == 18.5);
  std::ostringstream t;
  io::write_timing_csv(t, h);
  CHECK(t.str().find("0.25") != std::string::npos);
  std::istringstream junk("epoch,loss,omega_sensor\n0,abc,1\n");
  CHECK_THROWS(io::read_history_csv(junk));
}

TEST_CASE("dataset json round trip") {
  auto g = test::synthetic_sample(test::random_cloud(9, 5), 4, 6);
  g.cloud.domain = {5, 0.3, 13, 1.8};
  g.cloud.kinds[2] = PointKind::cavity_boundary;
  g.cloud.kinds[3] = PointKind::outer_boundary;
  g.cloud.temperature = Eigen::VectorXd::LinSpaced(9, 0, 1);
  g.cloud.u_ref = Eigen::VectorXd::LinSpaced(9, -1.0 / 7, 1.0 / 3);
  g.cloud.v_ref = -g.cloud.u_ref;
  g.forcing = test::random_cloud(9, 7);
  const auto j = io::to_json(g);
  CHECK(j.at("schema_version") == 1);
  const auto dir = scratch("json");
  io::write_json(dir / "g.json", j);
  const auto back = io::sample_from_json(io::read_json(dir / "g.json"));
  CHECK(back.name == g.name);
  CHECK(back.cloud.domain == g.cloud.domain);
  CHECK(back.cloud.coords == g.cloud.coords);
  CHECK(back.cloud.kinds == g.cloud.kinds);
  CHECK(back.cloud.temperature == g.cloud.temperature);
  CHECK(back.cloud.temp_grad == g.cloud.temp_grad);
  CHECK(back.cloud.u_ref == g.cloud.u_ref);
  CHECK(back.sensors.indices == g.sensors.indices);
  CHECK(back.sensors.v == g.sensors.v);
  CHECK(back.forcing == g.forcing);

  auto broken = j;
  broken["schema_version"] = 2;
  CHECK_THROWS(io::sample_from_json(broken));
  broken = j;
  broken["T"].erase(0);
  CHECK_THROWS(io::sample_from_json(broken));
  CHECK_THROWS(io::read_json(dir / "none.json"));
}

TEST_CASE("arch and domain json") {
  const ArchDescriptor a{0.25, 2, 2, PoolKind::average, OutputActivation::linear};
  CHECK(io::arch_from_json(io::to_json(a)) == a);
  const DomainSpec d{8, 0.3, 45, 1.6};
  CHECK(io::domain_from_json(io::to_json(d)) == d);
}
