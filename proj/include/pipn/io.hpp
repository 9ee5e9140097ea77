#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "pipn/training.hpp"

namespace pipn::io {

using nlohmann::json;

constexpr int kDatasetSchemaVersion = 1;
constexpr int kCheckpointVersion = 1;
constexpr char kCheckpointMagic[8] = {'P', 'I', 'P', 'N', 'C', 'K', 'P', 'T'};

json to_json(const DomainSpec& spec);
DomainSpec domain_from_json(const json& j);

json to_json(const ArchDescriptor& arch);
ArchDescriptor arch_from_json(const json& j);

/// Per-geometry dataset document. Columns are stored as separate arrays
/// (x, y, T, T_x, ...) so every double is written with round-trip digits.
json to_json(const GeometrySample& sample);
GeometrySample sample_from_json(const json& j);

/// Pretty-printed JSON with a trailing newline.
void write_json(const std::filesystem::path& path, const json& j);
json read_json(const std::filesystem::path& path);

// Checkpoint byte layout (all integers and doubles little-endian):
//   char[8]  magic "PIPNCKPT"
//   u32      format version
//   f64      n_s
//   i32      input_dim, n_pde
//   u8       pooling (0 max, 1 average), output (0 tanh, 1 linear)
//   i32      completed epochs
//   u64      root seed
//   i64      Adam step count
//   u32      layer count L
//   L x      { u32 rows, u32 cols, rows*cols f64 W (row-major), rows f64 b }
//   L x      Adam first moments, same order, without the shape words
//   L x      Adam second moments, same order, without the shape words
// The training RNG is a pure function of (seed, epoch), so no generator
// state is stored beyond those two fields.
void save_checkpoint(std::ostream& os, const TrainState& state);
TrainState load_checkpoint(std::istream& is);
void save_checkpoint(const std::filesystem::path& path, const TrainState& state);
TrainState load_checkpoint(const std::filesystem::path& path);

/// Shortest round-trip decimal form of a double.
std::string format_double(double x);

/// "epoch,loss,omega_sensor" rows. Wall time lives in a separate file so
/// that this one is reproducible bit for bit.
void write_history_csv(std::ostream& os, const std::vector<EpochRecord>& history);
void write_timing_csv(std::ostream& os, const std::vector<EpochRecord>& history);
std::vector<EpochRecord> read_history_csv(std::istream& is);

}  // namespace pipn::io
