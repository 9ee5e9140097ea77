#include "pipn/io.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace pipn::io {

namespace {

std::vector<double> column(const Eigen::Ref<const Eigen::VectorXd>& v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd vector_of(const json& j, const char* key) {
  const auto values = j.at(key).get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

Eigen::Matrix2Xd rows_of(const json& j, const char* kx, const char* ky) {
  const Eigen::VectorXd x = vector_of(j, kx), y = vector_of(j, ky);
  if (x.size() != y.size()) throw std::runtime_error(std::string("dataset: ") + kx + "/" + ky + " length mismatch");
  Eigen::Matrix2Xd m(2, x.size());
  m.row(0) = x.transpose();
  m.row(1) = y.transpose();
  return m;
}

}  // namespace

json to_json(const DomainSpec& s) {
  return {{"sides", s.sides},
          {"circumradius", s.circumradius},
          {"orientation_deg", s.orientation_deg},
          {"side_length", s.side_length}};
}

DomainSpec domain_from_json(const json& j) {
  DomainSpec s;
  s.sides = j.at("sides").get<int>();
  s.circumradius = j.at("circumradius").get<double>();
  s.orientation_deg = j.at("orientation_deg").get<double>();
  s.side_length = j.at("side_length").get<double>();
  validate(s);
  return s;
}

json to_json(const ArchDescriptor& a) {
  return {{"n_s", a.n_s},
          {"input_dim", a.input_dim},
          {"n_pde", a.n_pde},
          {"pooling", to_string(a.pooling)},
          {"output", to_string(a.output)}};
}

ArchDescriptor arch_from_json(const json& j) {
  ArchDescriptor a;
  a.n_s = j.value("n_s", a.n_s);
  a.input_dim = j.value("input_dim", a.input_dim);
  a.n_pde = j.value("n_pde", a.n_pde);
  if (j.contains("pooling")) a.pooling = parse_pool_kind(j.at("pooling").get<std::string>());
  if (j.contains("output")) a.output = parse_output_activation(j.at("output").get<std::string>());
  plan_layers(a);
  return a;
}

json to_json(const GeometrySample& g) {
  const auto& c = g.cloud;
  json j;
  j["schema_version"] = kDatasetSchemaVersion;
  j["name"] = g.name;
  j["spec"] = to_json(c.domain);
  j["n_points"] = c.size();
  j["x"] = column(c.coords.row(0).transpose());
  j["y"] = column(c.coords.row(1).transpose());
  std::vector<int> kinds;
  for (auto k : c.kinds) kinds.push_back(static_cast<int>(k));
  j["kinds"] = kinds;
  if (c.has_fields()) {
    j["T"] = column(c.temperature);
    j["T_x"] = column(c.temp_grad.row(0).transpose());
    j["T_y"] = column(c.temp_grad.row(1).transpose());
  }
  if (c.has_reference()) {
    j["u"] = column(c.u_ref);
    j["v"] = column(c.v_ref);
  }
  j["sensors"] = {{"indices", g.sensors.indices}, {"u", column(g.sensors.u)}, {"v", column(g.sensors.v)}};
  if (g.forcing.cols() > 0) {
    j["s_x"] = column(g.forcing.row(0).transpose());
    j["s_y"] = column(g.forcing.row(1).transpose());
  }
  return j;
}

GeometrySample sample_from_json(const json& j) {
  const int version = j.at("schema_version").get<int>();
  if (version != kDatasetSchemaVersion) {
    throw std::runtime_error("dataset schema version " + std::to_string(version) + " is not supported (expected " +
                             std::to_string(kDatasetSchemaVersion) + ")");
  }
  GeometrySample g;
  g.name = j.at("name").get<std::string>();
  auto& c = g.cloud;
  c.domain = domain_from_json(j.at("spec"));
  c.coords = rows_of(j, "x", "y");
  const Eigen::Index n = c.size();
  for (int k : j.at("kinds").get<std::vector<int>>()) {
    if (k < 0 || k > 2) throw std::runtime_error("dataset '" + g.name + "': bad point kind " + std::to_string(k));
    c.kinds.push_back(static_cast<PointKind>(k));
  }
  if (static_cast<Eigen::Index>(c.kinds.size()) != n) throw std::runtime_error("dataset '" + g.name + "': kinds length");
  if (j.contains("T")) {
    c.temperature = vector_of(j, "T");
    c.temp_grad = rows_of(j, "T_x", "T_y");
  }
  if (j.contains("u")) {
    c.u_ref = vector_of(j, "u");
    c.v_ref = vector_of(j, "v");
  }
  if ((j.contains("T") && !c.has_fields()) || (j.contains("u") && !c.has_reference())) {
    throw std::runtime_error("dataset '" + g.name + "': field length does not match point count");
  }
  const auto& s = j.at("sensors");
  g.sensors.indices = s.at("indices").get<std::vector<int>>();
  g.sensors.u = vector_of(s, "u");
  g.sensors.v = vector_of(s, "v");
  if (g.sensors.u.size() != g.sensors.size() || g.sensors.v.size() != g.sensors.size()) {
    throw std::runtime_error("dataset '" + g.name + "': sensor arrays differ in length");
  }
  for (int i : g.sensors.indices) {
    if (i < 0 || i >= n) throw std::runtime_error("dataset '" + g.name + "': sensor index out of range");
  }
  if (j.contains("s_x")) g.forcing = rows_of(j, "s_x", "s_y");
  return g;
}

void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << j.dump(1) << '\n';
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

json read_json(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

class Writer {
 public:
  explicit Writer(std::ostream& os) : os_(os) {}

  template <typename U>
  void integer(U x) {
    using Bits = std::make_unsigned_t<U>;
    auto bits = static_cast<Bits>(x);
    char buf[sizeof(U)];
    for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
    os_.write(buf, sizeof(U));
  }
  void f64(double x) { integer(std::bit_cast<std::uint64_t>(x)); }
  void doubles(const double* p, Eigen::Index n) {
    for (Eigen::Index i = 0; i < n; ++i) f64(p[i]);
  }
  void matrix(const Eigen::MatrixXd& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) f64(m(r, c));
    }
  }

 private:
  std::ostream& os_;
};

class Reader {
 public:
  explicit Reader(std::istream& is) : is_(is) {}

  template <typename U>
  U integer() {
    unsigned char buf[sizeof(U)];
    if (!is_.read(reinterpret_cast<char*>(buf), sizeof(U))) throw std::runtime_error("checkpoint: truncated");
    std::make_unsigned_t<U> bits = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) bits |= static_cast<std::make_unsigned_t<U>>(buf[i]) << (8 * i);
    return static_cast<U>(bits);
  }
  double f64() { return std::bit_cast<double>(integer<std::uint64_t>()); }
  void doubles(double* p, Eigen::Index n) {
    for (Eigen::Index i = 0; i < n; ++i) p[i] = f64();
  }
  void matrix(Eigen::MatrixXd& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = f64();
    }
  }

 private:
  std::istream& is_;
};

}  // namespace

void save_checkpoint(std::ostream& os, const TrainState& s) {
  os.write(kCheckpointMagic, sizeof kCheckpointMagic);
  Writer w(os);
  w.integer<std::uint32_t>(kCheckpointVersion);
  const auto& a = s.model.arch;
  w.f64(a.n_s);
  w.integer<std::int32_t>(a.input_dim);
  w.integer<std::int32_t>(a.n_pde);
  w.integer<std::uint8_t>(a.pooling == PoolKind::max ? 0 : 1);
  w.integer<std::uint8_t>(a.output == OutputActivation::tanh ? 0 : 1);
  w.integer<std::int32_t>(s.epoch);
  w.integer<std::uint64_t>(s.seed);
  w.integer<std::int64_t>(s.adam.t);
  const auto& layers = s.model.params.layers;
  w.integer<std::uint32_t>(static_cast<std::uint32_t>(layers.size()));
  for (const auto& l : layers) {
    w.integer<std::uint32_t>(static_cast<std::uint32_t>(l.W.rows()));
    w.integer<std::uint32_t>(static_cast<std::uint32_t>(l.W.cols()));
    w.matrix(l.W);
    w.doubles(l.b.data(), l.b.size());
  }
  for (const auto* moments : {&s.adam.m, &s.adam.v}) {
    if (moments->size() != layers.size()) throw std::invalid_argument("save_checkpoint: Adam state size mismatch");
    for (const auto& g : *moments) {
      w.matrix(g.W);
      w.doubles(g.b.data(), g.b.size());
    }
  }
  if (!os) throw std::runtime_error("save_checkpoint: write failed");
}

TrainState load_checkpoint(std::istream& is) {
  char magic[sizeof kCheckpointMagic];
  if (!is.read(magic, sizeof magic) || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) {
    throw std::runtime_error("checkpoint: bad magic");
  }
  Reader r(is);
  const auto version = r.integer<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw std::runtime_error("checkpoint: unsupported format version " + std::to_string(version));
  }
  ArchDescriptor arch;
  arch.n_s = r.f64();
  arch.input_dim = r.integer<std::int32_t>();
  arch.n_pde = r.integer<std::int32_t>();
  arch.pooling = r.integer<std::uint8_t>() == 0 ? PoolKind::max : PoolKind::average;
  arch.output = r.integer<std::uint8_t>() == 0 ? OutputActivation::tanh : OutputActivation::linear;

  TrainState s;
  s.epoch = r.integer<std::int32_t>();
  s.seed = r.integer<std::uint64_t>();
  s.model.arch = arch;
  s.model.plan = plan_layers(arch);
  s.adam.t = r.integer<std::int64_t>();
  const auto n_layers = r.integer<std::uint32_t>();
  if (n_layers != s.model.plan.layer_count()) throw std::runtime_error("checkpoint: layer count mismatch");
  auto& layers = s.model.params.layers;
  layers.resize(n_layers);
  for (auto& l : layers) {
    const auto rows = r.integer<std::uint32_t>(), cols = r.integer<std::uint32_t>();
    l.W.resize(rows, cols);
    l.b.resize(rows);
    r.matrix(l.W);
    r.doubles(l.b.data(), l.b.size());
  }
  if (expected_parameter_count(arch) != s.model.params.parameter_count()) {
    throw std::runtime_error("checkpoint: parameter shapes do not match the architecture");
  }
  s.model.params.zero_grad();
  s.adam.m = s.model.params.zero_gradients();
  s.adam.v = s.model.params.zero_gradients();
  for (auto* moments : {&s.adam.m, &s.adam.v}) {
    for (auto& g : *moments) {
      r.matrix(g.W);
      r.doubles(g.b.data(), g.b.size());
    }
  }
  if (is.peek() != std::char_traits<char>::eof()) throw std::runtime_error("checkpoint: trailing bytes");
  return s;
}

void save_checkpoint(const std::filesystem::path& path, const TrainState& state) {
  // Write to a sibling file first so an interrupted save never clobbers a
  // good checkpoint.
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + tmp.string());
    save_checkpoint(os, state);
  }
  std::filesystem::rename(tmp, path);
}

TrainState load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read checkpoint " + path.string());
  return load_checkpoint(is);
}

// ---------------------------------------------------------------------------
// CSV

std::string format_double(double x) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return {buf, res.ptr};
}

void write_history_csv(std::ostream& os, const std::vector<EpochRecord>& history) {
  os << "epoch,loss,omega_sensor\n";
  for (const auto& r : history) os << r.epoch << ',' << format_double(r.loss) << ',' << format_double(r.omega_sensor) << '\n';
}

void write_timing_csv(std::ostream& os, const std::vector<EpochRecord>& history) {
  os << "epoch,seconds\n";
  for (const auto& r : history) os << r.epoch << ',' << format_double(r.seconds) << '\n';
}

std::vector<EpochRecord> read_history_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("epoch,loss,omega_sensor", 0) != 0) {
    throw std::runtime_error("history CSV: missing header");
  }
  std::vector<EpochRecord> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string f;
    EpochRecord r;
    std::getline(ss, f, ',');
    r.epoch = std::stoi(f);
    std::getline(ss, f, ',');
    r.loss = std::stod(f);
    std::getline(ss, f, ',');
    r.omega_sensor = std::stod(f);
    out.push_back(r);
  }
  return out;
}

}  // namespace pipn::io
