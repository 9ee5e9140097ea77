#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "pipn/io.hpp"

namespace pipn {

/// Everything a run needs, serialized verbatim into its output directory.
struct ExperimentConfig {
  std::uint64_t seed = 1;        ///< root seed; cloud and training seeds derive from it
  std::string filter;            ///< domain filter expression, see parse_filter
  int n_points = 2021;
  int n_sensors = 81;
  int n_outer = 0;               ///< 0 picks default_boundary_split
  int n_cavity = 0;
  int mesh_ring = 256;           ///< oracle nodes per ring
  int mesh_layers = 48;          ///< oracle rings between cavity and plate edge
  Material material;
  TrainConfig train;
  int checkpoint_every = 500;    ///< epochs between periodic checkpoints, 0 = final only
  std::string data_dir;          ///< dataset location for train/sweep
  std::string out_dir = "run";
  std::vector<std::string> report_geometries;  ///< error maps to emit; empty = all
  int threads = 1;

  void validate() const;
};

io::json to_json(const ExperimentConfig& c);
/// Missing keys keep their defaults; unknown keys are rejected.
ExperimentConfig config_from_json(const io::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Comma-separated clauses, all of which must hold. Each clause is
/// key=value[|value...]; a value may be a range lo..hi (inclusive).
/// Keys: shape (side count or name such as "hexagon"), side, omega.
/// Example: "shape=6|square,side=2.0,omega=1..31". Empty keeps everything.
DomainPredicate parse_filter(const std::string& expr);

/// Cloud seed of one geometry: a hash of the root seed and the domain id,
/// so it does not depend on which other geometries were selected.
std::uint64_t geometry_seed(std::uint64_t root, const DomainSpec& spec);

/// Samples, solves and packages one geometry.
GeometrySample make_sample(const DomainSpec& spec, const ExperimentConfig& config);

struct GenDataResult {
  std::vector<std::string> written;
  std::vector<std::pair<std::string, std::string>> failed;  ///< (id, reason)
};

/// One <id>.json per selected geometry plus manifest.json and config.json
/// in out_dir. Geometries run in parallel over config.threads workers.
GenDataResult cmd_gen_data(const ExperimentConfig& config, std::ostream& log);

/// Successful geometries of a dataset directory that pass the filter, in
/// manifest order.
Dataset load_dataset(const std::filesystem::path& dir, const std::string& filter = {});

struct TrainOutcome {
  std::vector<EpochRecord> history;  ///< full history including resumed epochs
  EvaluationReport report;
  double seconds = 0;
};

/// Trains on `data` and writes into out_dir: config.json, history.csv,
/// timing.csv, checkpoints/epoch_<k>.ckpt, final.ckpt, errors.csv and
/// report.json. `resume` continues from a checkpoint. On a non-finite loss
/// the last completed epoch is saved to last_good.ckpt before rethrowing.
TrainOutcome run_training(const ExperimentConfig& config, const Dataset& data, const std::string& resume,
                          std::ostream& log);

/// Loads config.data_dir and calls run_training.
TrainOutcome cmd_train(const ExperimentConfig& config, const std::string& resume, std::ostream& log);

enum class SweepAxis { batch_size, network_size, pooling, schedule };
SweepAxis parse_sweep_axis(const std::string& s);
const char* to_string(SweepAxis a);

/// Applies one sweep value to a copy of the config. Schedule values are the
/// schedule kind names with their default parameters.
ExperimentConfig apply_sweep_value(const ExperimentConfig& base, SweepAxis axis, const std::string& value);

/// One training per value in out_dir/<axis>_<value>, then sweep.csv with
/// columns value, u/v mean/min/max, final loss, seconds, error.
void cmd_sweep(const ExperimentConfig& config, SweepAxis axis, const std::vector<std::string>& values,
               std::ostream& log);

/// Reads a finished run directory and writes loss_curve.csv and
/// error_map_<id>.csv (x, y, |du|, |dv|) into run_dir/report, printing a
/// summary to `out`. Throws listing every missing input.
void cmd_report(const std::filesystem::path& run_dir, std::ostream& out);

}  // namespace pipn
