#include "pipn/experiment.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace pipn {

namespace fs = std::filesystem;
using io::json;

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw std::invalid_argument(where + ": expected a JSON object");
  for (const auto& item : j.items()) {
    if (!allowed.count(item.key())) throw std::invalid_argument(where + ": unknown key '" + item.key() + "'");
  }
}

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::stringstream ss(s);
  while (std::getline(ss, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

double parse_number(const std::string& s, const std::string& clause) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) throw std::invalid_argument("filter clause '" + clause + "': bad number '" + s + "'");
  return v;
}

std::string format_value(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", x);
  return buf;
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

void ExperimentConfig::validate() const {
  if (n_points < 50) throw std::invalid_argument("n_points must be at least 50");
  if (n_sensors < 1) throw std::invalid_argument("n_sensors must be positive");
  if (n_outer < 0 || n_cavity < 0) throw std::invalid_argument("boundary point counts must be non-negative");
  if (checkpoint_every < 0) throw std::invalid_argument("checkpoint_every must be non-negative");
  if (threads < 1) throw std::invalid_argument("threads must be at least 1");
  if (out_dir.empty()) throw std::invalid_argument("out_dir is empty");
  material.validate();
  train.schedule.validate();
  plan_layers(train.arch);
  parse_filter(filter);
}

json to_json(const ExperimentConfig& c) {
  const auto& t = c.train;
  const auto& s = t.schedule;
  return {{"seed", c.seed},
          {"filter", c.filter},
          {"n_points", c.n_points},
          {"n_sensors", c.n_sensors},
          {"n_outer", c.n_outer},
          {"n_cavity", c.n_cavity},
          {"mesh", {{"n_ring", c.mesh_ring}, {"n_layers", c.mesh_layers}}},
          {"material", {{"nu", c.material.nu}, {"alpha", c.material.alpha}}},
          {"train",
           {{"arch", io::to_json(t.arch)},
            {"batch_size", t.batch_size},
            {"epochs", t.epochs},
            {"lr", t.adam.lr},
            {"beta1", t.adam.beta1},
            {"beta2", t.adam.beta2},
            {"eps", t.adam.eps},
            {"omega_momentum", t.omega_momentum},
            {"schedule",
             {{"kind", to_string(s.kind)},
              {"omega0", s.omega0},
              {"omega1", s.omega1},
              {"r1", s.r1},
              {"omega2", s.omega2},
              {"r2", s.r2}}}}},
          {"checkpoint_every", c.checkpoint_every},
          {"data_dir", c.data_dir},
          {"out_dir", c.out_dir},
          {"report_geometries", c.report_geometries},
          {"threads", c.threads}};
}

ExperimentConfig config_from_json(const json& j) {
  check_keys(j,
             {"seed", "filter", "n_points", "n_sensors", "n_outer", "n_cavity", "mesh", "material", "train",
              "checkpoint_every", "data_dir", "out_dir", "report_geometries", "threads"},
             "config");
  ExperimentConfig c;
  read_opt(j, "seed", c.seed);
  read_opt(j, "filter", c.filter);
  read_opt(j, "n_points", c.n_points);
  read_opt(j, "n_sensors", c.n_sensors);
  read_opt(j, "n_outer", c.n_outer);
  read_opt(j, "n_cavity", c.n_cavity);
  if (j.contains("mesh")) {
    const auto& m = j.at("mesh");
    check_keys(m, {"n_ring", "n_layers"}, "config.mesh");
    read_opt(m, "n_ring", c.mesh_ring);
    read_opt(m, "n_layers", c.mesh_layers);
  }
  if (j.contains("material")) {
    const auto& m = j.at("material");
    check_keys(m, {"nu", "alpha"}, "config.material");
    read_opt(m, "nu", c.material.nu);
    read_opt(m, "alpha", c.material.alpha);
  }
  if (j.contains("train")) {
    const auto& t = j.at("train");
    check_keys(t,
               {"arch", "batch_size", "epochs", "lr", "beta1", "beta2", "eps", "omega_momentum", "schedule"},
               "config.train");
    auto& tc = c.train;
    if (t.contains("arch")) {
      check_keys(t.at("arch"), {"n_s", "input_dim", "n_pde", "pooling", "output"}, "config.train.arch");
      tc.arch = io::arch_from_json(t.at("arch"));
    }
    read_opt(t, "batch_size", tc.batch_size);
    read_opt(t, "epochs", tc.epochs);
    read_opt(t, "lr", tc.adam.lr);
    read_opt(t, "beta1", tc.adam.beta1);
    read_opt(t, "beta2", tc.adam.beta2);
    read_opt(t, "eps", tc.adam.eps);
    read_opt(t, "omega_momentum", tc.omega_momentum);
    if (t.contains("schedule")) {
      const auto& s = t.at("schedule");
      check_keys(s, {"kind", "omega0", "omega1", "r1", "omega2", "r2"}, "config.train.schedule");
      if (s.contains("kind")) tc.schedule.kind = parse_schedule_kind(s.at("kind").get<std::string>());
      read_opt(s, "omega0", tc.schedule.omega0);
      read_opt(s, "omega1", tc.schedule.omega1);
      read_opt(s, "r1", tc.schedule.r1);
      read_opt(s, "omega2", tc.schedule.omega2);
      read_opt(s, "r2", tc.schedule.r2);
    }
  }
  read_opt(j, "checkpoint_every", c.checkpoint_every);
  read_opt(j, "data_dir", c.data_dir);
  read_opt(j, "out_dir", c.out_dir);
  read_opt(j, "report_geometries", c.report_geometries);
  read_opt(j, "threads", c.threads);
  c.validate();
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  try {
    return config_from_json(io::read_json(path));
  } catch (const json::exception& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Filter

DomainPredicate parse_filter(const std::string& expr) {
  using Test = std::function<bool(const DomainSpec&)>;
  std::vector<Test> clauses;
  for (const auto& raw : split(expr, ',')) {
    const std::string clause = trim(raw);
    if (clause.empty()) {
      if (trim(expr).empty()) break;
      throw std::invalid_argument("filter '" + expr + "': empty clause");
    }
    const auto eq = clause.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("filter clause '" + clause + "': expected key=value");
    const std::string key = trim(clause.substr(0, eq));
    if (key != "shape" && key != "side" && key != "omega") {
      throw std::invalid_argument("filter clause '" + clause + "': unknown key '" + key + "' (shape, side, omega)");
    }
    std::vector<std::pair<double, double>> ranges;
    for (const auto& alt_raw : split(clause.substr(eq + 1), '|')) {
      const std::string alt = trim(alt_raw);
      if (alt.empty()) throw std::invalid_argument("filter clause '" + clause + "': empty value");
      if (key == "shape") {
        bool named = false;
        for (int s = 4; s <= 9; ++s) {
          if (alt == shape_name(s)) {
            ranges.emplace_back(s, s);
            named = true;
          }
        }
        if (named) continue;
      }
      const auto dots = alt.find("..");
      if (dots != std::string::npos) {
        ranges.emplace_back(parse_number(trim(alt.substr(0, dots)), clause), parse_number(trim(alt.substr(dots + 2)), clause));
      } else {
        const double v = parse_number(alt, clause);
        ranges.emplace_back(v, v);
      }
    }
    const double tol = 1e-9;
    clauses.push_back([key, ranges, tol](const DomainSpec& d) {
      const double x = key == "shape" ? d.sides : key == "side" ? d.side_length : d.orientation_deg;
      for (const auto& [lo, hi] : ranges) {
        if (x >= lo - tol && x <= hi + tol) return true;
      }
      return false;
    });
  }
  if (clauses.empty()) return {};
  return [clauses](const DomainSpec& d) {
    for (const auto& c : clauses) {
      if (!c(d)) return false;
    }
    return true;
  };
}

// ---------------------------------------------------------------------------
// Data generation

std::uint64_t geometry_seed(std::uint64_t root, const DomainSpec& spec) {
  // FNV-1a of the id, mixed with the root.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : domain_id(spec)) h = (h ^ ch) * 0x100000001b3ULL;
  return splitmix64(root ^ splitmix64(h));
}

GeometrySample make_sample(const DomainSpec& spec, const ExperimentConfig& c) {
  BoundarySplit split = default_boundary_split(c.n_points);
  if (c.n_outer > 0) split.outer = c.n_outer;
  if (c.n_cavity > 0) split.cavity = c.n_cavity;

  GeometrySample g;
  g.name = domain_id(spec);
  g.cloud = sample_point_cloud(spec, c.n_points, split.outer, split.cavity, geometry_seed(c.seed, spec));
  const Mesh mesh = build_mesh(spec, c.mesh_ring, c.mesh_layers);
  const ScalarField T = solve_temperature(mesh);
  const DisplacementField disp = solve_plane_stress(mesh, T, c.material);
  interpolate_to_cloud(mesh, T, disp, g.cloud);

  g.sensors.indices = place_sensors(g.cloud, c.n_sensors);
  const int m = g.sensors.size();
  g.sensors.u.resize(m);
  g.sensors.v.resize(m);
  for (int k = 0; k < m; ++k) {
    g.sensors.u(k) = g.cloud.u_ref(g.sensors.indices[k]);
    g.sensors.v(k) = g.cloud.v_ref(g.sensors.indices[k]);
  }
  return g;
}

GenDataResult cmd_gen_data(const ExperimentConfig& config, std::ostream& log) {
  config.validate();
  const auto specs = enumerate_domains(parse_filter(config.filter));
  const fs::path out(config.out_dir);
  fs::create_directories(out);

  std::vector<std::string> errors(specs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < specs.size(); i = next++) {
      const std::string id = domain_id(specs[i]);
      try {
        io::write_json(out / (id + ".json"), io::to_json(make_sample(specs[i], config)));
      } catch (const std::exception& e) {
        errors[i] = e.what();
        if (errors[i].empty()) errors[i] = "unknown error";
      }
    }
  };
  const std::size_t workers = std::min<std::size_t>(config.threads, std::max<std::size_t>(specs.size(), 1));
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  GenDataResult result;
  json entries = json::array();
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const std::string id = domain_id(specs[i]);
    json e{{"id", id}, {"spec", io::to_json(specs[i])}};
    if (errors[i].empty()) {
      e["status"] = "ok";
      e["file"] = id + ".json";
      result.written.push_back(id);
      log << "wrote " << id << '\n';
    } else {
      e["status"] = "failed";
      e["reason"] = errors[i];
      result.failed.emplace_back(id, errors[i]);
      log << "failed " << id << ": " << errors[i] << '\n';
    }
    entries.push_back(std::move(e));
  }
  io::write_json(out / "manifest.json", {{"schema_version", io::kDatasetSchemaVersion},
                                         {"seed", config.seed},
                                         {"n_points", config.n_points},
                                         {"n_sensors", config.n_sensors},
                                         {"succeeded", result.written.size()},
                                         {"failed", result.failed.size()},
                                         {"geometries", entries}});
  io::write_json(out / "config.json", to_json(config));
  return result;
}

Dataset load_dataset(const fs::path& dir, const std::string& filter) {
  const fs::path manifest = dir / "manifest.json";
  if (!fs::exists(manifest)) throw std::runtime_error("missing dataset: " + manifest.string() + " not found");
  const json m = io::read_json(manifest);
  const auto keep = parse_filter(filter);
  Dataset data;
  for (const auto& e : m.at("geometries")) {
    if (e.at("status") != "ok") continue;
    if (keep && !keep(io::domain_from_json(e.at("spec")))) continue;
    const fs::path file = dir / e.at("file").get<std::string>();
    if (!fs::exists(file)) throw std::runtime_error("missing dataset file: " + file.string());
    data.push_back(io::sample_from_json(io::read_json(file)));
  }
  if (data.empty()) throw std::runtime_error("dataset " + dir.string() + " has no geometries matching the filter");
  return data;
}

// ---------------------------------------------------------------------------
// Training

namespace {

json report_to_json(const EvaluationReport& r) {
  auto stats = [](const ErrorStats& s) { return json{{"mean", s.mean}, {"min", s.min}, {"max", s.max}}; };
  json per = json::array();
  for (const auto& g : r.per_geometry) {
    per.push_back({{"id", g.name}, {"u", g.u}, {"v", g.v}, {"u_absolute", g.u_absolute}, {"v_absolute", g.v_absolute}});
  }
  return {{"u", stats(r.u)}, {"v", stats(r.v)}, {"per_geometry", per}};
}

std::string checkpoint_name(int epoch) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "epoch_%06d.ckpt", epoch);
  return buf;
}

std::map<int, double> read_timing(const fs::path& path) {
  std::map<int, double> t;
  std::ifstream is(path);
  std::string line;
  std::getline(is, line);
  while (std::getline(is, line)) {
    const auto comma = line.find(',');
    if (comma == std::string::npos) continue;
    t[std::stoi(line.substr(0, comma))] = std::stod(line.substr(comma + 1));
  }
  return t;
}

}  // namespace

TrainOutcome run_training(const ExperimentConfig& config, const Dataset& data, const std::string& resume,
                          std::ostream& log) {
  config.validate();
  TrainConfig tc = config.train;
  tc.seed = config.seed;
  tc.threads = config.threads;
  tc.validate(data.size());

  const fs::path out(config.out_dir);
  fs::create_directories(out / "checkpoints");
  io::write_json(out / "config.json", to_json(config));

  TrainState state = initial_state(tc);
  std::vector<EpochRecord> history;
  if (!resume.empty()) {
    state = io::load_checkpoint(fs::path(resume));
    if (!(state.model.arch == tc.arch)) throw std::invalid_argument("resume: checkpoint architecture differs from config");
    if (state.seed != tc.seed) throw std::invalid_argument("resume: checkpoint seed differs from config seed");
    if (state.epoch > tc.epochs) throw std::invalid_argument("resume: checkpoint is past the configured epochs");
    if (fs::exists(out / "history.csv")) {
      std::ifstream is(out / "history.csv");
      const auto timing = read_timing(out / "timing.csv");
      for (auto r : io::read_history_csv(is)) {
        if (r.epoch >= state.epoch) continue;
        if (auto it = timing.find(r.epoch); it != timing.end()) r.seconds = it->second;
        history.push_back(r);
      }
    }
  }

  std::ofstream hist(out / "history.csv", std::ios::binary);
  std::ofstream timing(out / "timing.csv", std::ios::binary);
  io::write_history_csv(hist, history);
  io::write_timing_csv(timing, history);
  hist.flush();
  timing.flush();

  TrainState last_good = state;
  const auto t0 = std::chrono::steady_clock::now();
  auto on_epoch = [&](const TrainState& s, const EpochRecord& r) {
    history.push_back(r);
    hist << r.epoch << ',' << io::format_double(r.loss) << ',' << io::format_double(r.omega_sensor) << '\n';
    timing << r.epoch << ',' << io::format_double(r.seconds) << '\n';
    hist.flush();
    timing.flush();
    last_good = s;
    if (config.checkpoint_every > 0 && s.epoch % config.checkpoint_every == 0) {
      io::save_checkpoint(out / "checkpoints" / checkpoint_name(s.epoch), s);
    }
    if (s.epoch == 1 || s.epoch % 100 == 0 || s.epoch == tc.epochs) {
      log << "epoch " << s.epoch << "/" << tc.epochs << " loss " << r.loss << " omega_s " << r.omega_sensor << '\n';
    }
  };
  const Material mat = config.material;
  try {
    train(data, tc, mat, state, on_epoch);
  } catch (const std::exception&) {
    io::save_checkpoint(out / "last_good.ckpt", last_good);
    throw;
  }

  TrainOutcome outcome;
  outcome.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  outcome.history = std::move(history);
  io::save_checkpoint(out / "final.ckpt", state);
  outcome.report = evaluate(state.model, data);
  io::write_json(out / "report.json", report_to_json(outcome.report));
  std::ofstream errs(out / "errors.csv", std::ios::binary);
  errs << "id,rel_l2_u,rel_l2_v,u_absolute,v_absolute\n";
  for (const auto& g : outcome.report.per_geometry) {
    errs << g.name << ',' << io::format_double(g.u) << ',' << io::format_double(g.v) << ',' << g.u_absolute << ','
         << g.v_absolute << '\n';
  }
  log << "relative L2 error u: mean " << outcome.report.u.mean << " min " << outcome.report.u.min << " max "
      << outcome.report.u.max << '\n';
  log << "relative L2 error v: mean " << outcome.report.v.mean << " min " << outcome.report.v.min << " max "
      << outcome.report.v.max << '\n';
  return outcome;
}

TrainOutcome cmd_train(const ExperimentConfig& config, const std::string& resume, std::ostream& log) {
  if (config.data_dir.empty()) throw std::invalid_argument("missing dataset: data_dir is not set");
  const Dataset data = load_dataset(config.data_dir, config.filter);
  log << "loaded " << data.size() << " geometries from " << config.data_dir << '\n';
  return run_training(config, data, resume, log);
}

// ---------------------------------------------------------------------------
// Sweeps

SweepAxis parse_sweep_axis(const std::string& s) {
  if (s == "batch_size") return SweepAxis::batch_size;
  if (s == "network_size") return SweepAxis::network_size;
  if (s == "pooling") return SweepAxis::pooling;
  if (s == "schedule") return SweepAxis::schedule;
  throw std::invalid_argument("unknown sweep axis '" + s + "' (batch_size, network_size, pooling, schedule)");
}

const char* to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::batch_size: return "batch_size";
    case SweepAxis::network_size: return "network_size";
    case SweepAxis::pooling: return "pooling";
    case SweepAxis::schedule: return "schedule";
  }
  return "?";
}

ExperimentConfig apply_sweep_value(const ExperimentConfig& base, SweepAxis axis, const std::string& value) {
  ExperimentConfig c = base;
  switch (axis) {
    case SweepAxis::batch_size: {
      std::size_t used = 0;
      c.train.batch_size = std::stoi(value, &used);
      if (used != value.size()) throw std::invalid_argument("bad batch size '" + value + "'");
      break;
    }
    case SweepAxis::network_size: {
      std::size_t used = 0;
      c.train.arch.n_s = std::stod(value, &used);
      if (used != value.size()) throw std::invalid_argument("bad network size '" + value + "'");
      plan_layers(c.train.arch);
      break;
    }
    case SweepAxis::pooling: c.train.arch.pooling = parse_pool_kind(value); break;
    case SweepAxis::schedule: c.train.schedule = WeightSchedule{parse_schedule_kind(value)}; break;
  }
  c.out_dir = (fs::path(base.out_dir) / (std::string(to_string(axis)) + "_" + value)).string();
  return c;
}

void cmd_sweep(const ExperimentConfig& config, SweepAxis axis, const std::vector<std::string>& values,
               std::ostream& log) {
  if (values.empty()) throw std::invalid_argument("sweep: no values given");
  if (config.data_dir.empty()) throw std::invalid_argument("missing dataset: data_dir is not set");
  const Dataset data = load_dataset(config.data_dir, config.filter);
  fs::create_directories(config.out_dir);
  std::ofstream csv(fs::path(config.out_dir) / "sweep.csv", std::ios::binary);
  csv << to_string(axis) << ",u_mean,u_min,u_max,v_mean,v_min,v_max,final_loss,seconds,error\n";
  for (const auto& value : values) {
    log << "sweep " << to_string(axis) << " = " << value << '\n';
    try {
      const auto c = apply_sweep_value(config, axis, value);
      const auto r = run_training(c, data, {}, log);
      const double final_loss = r.history.empty() ? std::nan("") : r.history.back().loss;
      csv << value << ',' << io::format_double(r.report.u.mean) << ',' << io::format_double(r.report.u.min) << ','
          << io::format_double(r.report.u.max) << ',' << io::format_double(r.report.v.mean) << ','
          << io::format_double(r.report.v.min) << ',' << io::format_double(r.report.v.max) << ','
          << io::format_double(final_loss) << ',' << format_value(r.seconds) << ",\n";
    } catch (const std::exception& e) {
      std::string msg = e.what();
      for (auto& ch : msg) {
        if (ch == ',' || ch == '\n') ch = ';';
      }
      csv << value << ",,,,,,,,," << msg << '\n';
      log << "sweep value " << value << " failed: " << e.what() << '\n';
    }
    csv.flush();
  }
}

// ---------------------------------------------------------------------------
// Report

void cmd_report(const fs::path& run_dir, std::ostream& out) {
  std::vector<std::string> missing;
  for (const char* f : {"config.json", "history.csv", "final.ckpt"}) {
    if (!fs::exists(run_dir / f)) missing.push_back((run_dir / f).string());
  }
  if (!missing.empty()) {
    std::string msg = "report: missing inputs:";
    for (const auto& m : missing) msg += " " + m;
    throw std::runtime_error(msg);
  }
  const auto config = load_config(run_dir / "config.json");
  const TrainState state = io::load_checkpoint(run_dir / "final.ckpt");
  std::ifstream hist_in(run_dir / "history.csv");
  const auto history = io::read_history_csv(hist_in);
  if (config.data_dir.empty()) throw std::runtime_error("report: run config has no data_dir");
  const Dataset data = load_dataset(config.data_dir, config.filter);

  const fs::path dir = run_dir / "report";
  fs::create_directories(dir);
  {
    std::ofstream os(dir / "loss_curve.csv", std::ios::binary);
    io::write_history_csv(os, history);
  }

  const auto rep = evaluate(state.model, data);
  std::set<std::string> wanted(config.report_geometries.begin(), config.report_geometries.end());
  for (const auto& g : data) {
    if (!wanted.empty() && !wanted.count(g.name)) continue;
    const Eigen::MatrixXd pred = forward_values(state.model, g.cloud.coords);
    std::ofstream os(dir / ("error_map_" + g.name + ".csv"), std::ios::binary);
    os << "x,y,abs_err_u,abs_err_v\n";
    for (Eigen::Index j = 0; j < g.cloud.size(); ++j) {
      os << io::format_double(g.cloud.coords(0, j)) << ',' << io::format_double(g.cloud.coords(1, j)) << ','
         << io::format_double(std::abs(pred(0, j) - g.cloud.u_ref(j))) << ','
         << io::format_double(std::abs(pred(1, j) - g.cloud.v_ref(j))) << '\n';
    }
  }

  out << "run: " << run_dir.string() << '\n';
  out << "epochs: " << state.epoch << ", geometries: " << data.size() << ", n_s: " << state.model.arch.n_s
      << ", pooling: " << to_string(state.model.arch.pooling) << '\n';
  if (!history.empty()) out << "final loss: " << history.back().loss << '\n';
  out << "relative L2 error  mean        min         max\n";
  char line[128];
  std::snprintf(line, sizeof line, "u                  %.5e %.5e %.5e\n", rep.u.mean, rep.u.min, rep.u.max);
  out << line;
  std::snprintf(line, sizeof line, "v                  %.5e %.5e %.5e\n", rep.v.mean, rep.v.min, rep.v.max);
  out << line;
  out << "CSVs written to " << dir.string() << '\n';
}

}  // namespace pipn
