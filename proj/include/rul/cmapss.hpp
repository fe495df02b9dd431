#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rul/nn/tensor.hpp"

namespace rul {

inline constexpr std::size_t kSensorCount = 21;
inline constexpr std::size_t kSettingCount = 3;
inline constexpr std::size_t kColumnCount = 2 + kSettingCount + kSensorCount;  // id, cycle, ...

/// Malformed or inconsistent dataset input. The message carries file/line context.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class SubsetId { FD001, FD002, FD003, FD004 };
enum class Split { Train, Test };

std::string to_string(SubsetId id);
std::string to_string(Split split);
SubsetId parse_subset_id(const std::string& text);

/// Published trajectory/row counts of one subset.
struct SubsetMeta {
  SubsetId id;
  std::size_t train_trajectories;
  std::size_t test_trajectories;
  std::size_t train_samples;
  std::size_t test_samples;
  int operating_conditions;
  int fault_modes;
};

const SubsetMeta& subset_meta(SubsetId id);

/// Human-readable sensor descriptions, in column order.
const std::array<const char*, kSensorCount>& sensor_descriptions();

/// One engine's run to failure (train) or to the cut-off point (test).
struct EngineTrajectory {
  int engine_id = 0;
  std::vector<int> cycles;
  std::vector<std::array<double, kSettingCount>> op_settings;
  std::vector<std::array<double, kSensorCount>> sensors;

  std::size_t length() const { return cycles.size(); }
  bool operator==(const EngineTrajectory&) const = default;
};

std::size_t total_rows(std::span<const EngineTrajectory> trajectories);

std::filesystem::path subset_file(const std::filesystem::path& root, SubsetId id, Split split);
std::filesystem::path rul_file(const std::filesystem::path& root, SubsetId id);

/// Parses 26-column whitespace-separated rows grouped by engine id.
/// `source` names the input in error messages.
std::vector<EngineTrajectory> parse_trajectories(std::istream& in, const std::string& source);
std::vector<EngineTrajectory> parse_subset(const std::filesystem::path& root, SubsetId id, Split split);

/// Writes trajectories back in the dataset's text layout.
void write_trajectories(std::ostream& out, std::span<const EngineTrajectory> trajectories);

/// True RUL after the last cycle of each test engine; must list exactly
/// `expected_count` non-negative integers.
std::vector<int> parse_rul_labels(std::istream& in, const std::string& source, std::size_t expected_count);
std::vector<int> parse_rul_labels(const std::filesystem::path& root, SubsetId id, std::size_t expected_count);

/// Throws DataError if trajectory or row counts differ from the published ones.
void check_counts(SubsetId id, Split split, std::span<const EngineTrajectory> trajectories);

/// Train and test trajectories of one subset with the test RUL labels.
struct SubsetData {
  std::vector<EngineTrajectory> train;
  std::vector<EngineTrajectory> test;
  std::vector<int> test_rul;
};

/// Parses all three files of a subset; with `strict` the counts must match
/// the published table.
SubsetData load_subset(const std::filesystem::path& root, SubsetId id, bool strict = true);
/// SHA-256 over the hashes of the subset's three files.
std::string subset_hash(const std::filesystem::path& root, SubsetId id);

/// Sensor matrix [T, 21] with operational settings dropped.
nn::Tensor select_channels(const EngineTrajectory& trajectory);

/// Per-channel min-max fit on training data, mapping the train range onto [-1, 1].
struct NormalizationStats {
  std::vector<double> minimum;
  std::vector<double> maximum;
  std::vector<bool> constant;

  bool operator==(const NormalizationStats&) const = default;
};

NormalizationStats fit_normalizer(std::span<const EngineTrajectory> train);
/// Affine map per channel; constant channels map to 0; no clipping.
nn::Tensor apply_normalizer(const NormalizationStats& stats, const nn::Tensor& matrix);

std::string stats_to_text(const NormalizationStats& stats);
NormalizationStats stats_from_text(const std::string& text);

/// Normalized per-engine feature matrices for one split.
struct NormalizedSplit {
  std::vector<int> engine_ids;
  std::vector<nn::Tensor> features;  // [T_i, 21]
};

NormalizedSplit normalize_split(const NormalizationStats& stats, std::span<const EngineTrajectory> trajectories);

/// Value of the data-root environment variable, if set.
std::optional<std::filesystem::path> data_root_from_env();
inline constexpr const char* kDataRootEnv = "CMAPSS_DATA_DIR";

}  // namespace rul
