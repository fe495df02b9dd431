#include "rul/cmapss.hpp"

#include <nlohmann/json.hpp>

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <string_view>

#include "rul/io.hpp"

namespace rul {
namespace {

constexpr std::array<SubsetMeta, 4> kSubsets{{
    {SubsetId::FD001, 100, 100, 20631, 13096, 1, 1},
    {SubsetId::FD002, 260, 259, 53759, 33991, 6, 1},
    {SubsetId::FD003, 100, 100, 24720, 16596, 1, 2},
    {SubsetId::FD004, 249, 248, 61249, 41214, 6, 2},
}};

constexpr std::array<const char*, kSensorCount> kSensorDescriptions{
    "Total temperature at the fan inlet",
    "Total temperature at the low-pressure compressor outlet",
    "Total temperature at the high-pressure compressor outlet",
    "Total temperature at the low-pressure turbine outlet",
    "Pressure at the fan inlet",
    "Total pressure in bypass-duct",
    "Total pressure at the high-pressure compressor outlet",
    "Physical fan speed",
    "Physical core speed",
    "Engine pressure ratio",
    "Static pressure at the high-pressure compressor outlet (Ps30)",
    "Ratio of fuel flow to Ps30",
    "Corrected fan speed",
    "Corrected core speed",
    "Bypass ratio",
    "Burner fuel-air ratio",
    "Bleed enthalpy",
    "Demanded fan speed",
    "Demanded corrected fan speed",
    "High-pressure turbine coolant bleed",
    "Low-pressure turbine coolant bleed",
};

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

std::string where(const std::string& source, std::size_t line_no) {
  return source + ":" + std::to_string(line_no);
}

double parse_number(std::string_view tok, const std::string& source, std::size_t line_no) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw DataError(where(source, line_no) + ": non-numeric token '" + std::string(tok) + "'");
  }
  return v;
}

int parse_integer(std::string_view tok, const std::string& source, std::size_t line_no) {
  const double v = parse_number(tok, source, line_no);
  if (v != static_cast<double>(static_cast<long long>(v))) {
    throw DataError(where(source, line_no) + ": expected an integer, got '" + std::string(tok) + "'");
  }
  return static_cast<int>(v);
}

void append_number(std::string& out, double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, ptr);
}

std::ifstream open_or_throw(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return in;
}

}  // namespace

std::string to_string(SubsetId id) {
  switch (id) {
    case SubsetId::FD001: return "FD001";
    case SubsetId::FD002: return "FD002";
    case SubsetId::FD003: return "FD003";
    case SubsetId::FD004: return "FD004";
  }
  return "?";
}

std::string to_string(Split split) { return split == Split::Train ? "train" : "test"; }

SubsetId parse_subset_id(const std::string& text) {
  std::string t;
  for (char c : text) t.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  for (const auto& m : kSubsets) {
    if (to_string(m.id) == t) return m.id;
  }
  throw std::invalid_argument("unknown subset '" + text + "' (expected FD001..FD004)");
}

const SubsetMeta& subset_meta(SubsetId id) { return kSubsets[static_cast<std::size_t>(id)]; }

const std::array<const char*, kSensorCount>& sensor_descriptions() { return kSensorDescriptions; }

std::size_t total_rows(std::span<const EngineTrajectory> trajectories) {
  std::size_t n = 0;
  for (const auto& t : trajectories) n += t.length();
  return n;
}

std::filesystem::path subset_file(const std::filesystem::path& root, SubsetId id, Split split) {
  return root / (to_string(split) + "_" + to_string(id) + ".txt");
}

std::filesystem::path rul_file(const std::filesystem::path& root, SubsetId id) {
  return root / ("RUL_" + to_string(id) + ".txt");
}

std::vector<EngineTrajectory> parse_trajectories(std::istream& in, const std::string& source) {
  std::vector<EngineTrajectory> out;
  std::set<int> finished;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto tokens = split_ws(line);
    if (tokens.empty()) continue;
    if (tokens.size() != kColumnCount) {
      throw DataError(where(source, line_no) + ": expected " + std::to_string(kColumnCount) +
                      " columns, found " + std::to_string(tokens.size()));
    }
    const int id = parse_integer(tokens[0], source, line_no);
    const int cycle = parse_integer(tokens[1], source, line_no);
    if (id <= 0) throw DataError(where(source, line_no) + ": engine id must be positive");

    if (out.empty() || out.back().engine_id != id) {
      if (!out.empty()) finished.insert(out.back().engine_id);
      if (finished.contains(id)) {
        throw DataError(where(source, line_no) + ": rows of engine " + std::to_string(id) +
                        " are not contiguous");
      }
      out.emplace_back();
      out.back().engine_id = id;
    }
    EngineTrajectory& traj = out.back();
    const int expected = static_cast<int>(traj.cycles.size()) + 1;
    if (cycle != expected) {
      throw DataError(where(source, line_no) + ": engine " + std::to_string(id) + " cycle " +
                      std::to_string(cycle) + " breaks the contiguous sequence (expected " +
                      std::to_string(expected) + ")");
    }
    traj.cycles.push_back(cycle);
    std::array<double, kSettingCount> settings{};
    for (std::size_t k = 0; k < kSettingCount; ++k) settings[k] = parse_number(tokens[2 + k], source, line_no);
    std::array<double, kSensorCount> sensors{};
    for (std::size_t k = 0; k < kSensorCount; ++k) {
      sensors[k] = parse_number(tokens[2 + kSettingCount + k], source, line_no);
    }
    traj.op_settings.push_back(settings);
    traj.sensors.push_back(sensors);
  }
  return out;
}

std::vector<EngineTrajectory> parse_subset(const std::filesystem::path& root, SubsetId id, Split split) {
  const auto path = subset_file(root, id, split);
  auto in = open_or_throw(path);
  return parse_trajectories(in, path.string());
}

void write_trajectories(std::ostream& out, std::span<const EngineTrajectory> trajectories) {
  std::string line;
  for (const auto& t : trajectories) {
    for (std::size_t i = 0; i < t.length(); ++i) {
      line.clear();
      line += std::to_string(t.engine_id);
      line += ' ';
      line += std::to_string(t.cycles[i]);
      for (double v : t.op_settings[i]) {
        line += ' ';
        append_number(line, v);
      }
      for (double v : t.sensors[i]) {
        line += ' ';
        append_number(line, v);
      }
      out << line << '\n';
    }
  }
}

std::vector<int> parse_rul_labels(std::istream& in, const std::string& source, std::size_t expected_count) {
  std::vector<int> labels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto tokens = split_ws(line);
    if (tokens.empty()) continue;
    if (tokens.size() != 1) throw DataError(where(source, line_no) + ": expected one value per line");
    const int v = parse_integer(tokens[0], source, line_no);
    if (v < 0) throw DataError(where(source, line_no) + ": negative RUL label");
    labels.push_back(v);
  }
  if (labels.size() != expected_count) {
    throw DataError(source + ": " + std::to_string(labels.size()) + " RUL labels for " +
                    std::to_string(expected_count) + " test trajectories");
  }
  return labels;
}

std::vector<int> parse_rul_labels(const std::filesystem::path& root, SubsetId id, std::size_t expected_count) {
  const auto path = rul_file(root, id);
  auto in = open_or_throw(path);
  return parse_rul_labels(in, path.string(), expected_count);
}

void check_counts(SubsetId id, Split split, std::span<const EngineTrajectory> trajectories) {
  const auto& meta = subset_meta(id);
  const bool train = split == Split::Train;
  const std::size_t want_traj = train ? meta.train_trajectories : meta.test_trajectories;
  const std::size_t want_rows = train ? meta.train_samples : meta.test_samples;
  const std::size_t rows = total_rows(trajectories);
  if (trajectories.size() != want_traj || rows != want_rows) {
    throw DataError(to_string(id) + " " + to_string(split) + ": parsed " +
                    std::to_string(trajectories.size()) + " trajectories / " + std::to_string(rows) +
                    " rows, expected " + std::to_string(want_traj) + " / " + std::to_string(want_rows));
  }
}

SubsetData load_subset(const std::filesystem::path& root, SubsetId id, bool strict) {
  SubsetData d;
  d.train = parse_subset(root, id, Split::Train);
  d.test = parse_subset(root, id, Split::Test);
  if (strict) {
    check_counts(id, Split::Train, d.train);
    check_counts(id, Split::Test, d.test);
  }
  d.test_rul = parse_rul_labels(root, id, d.test.size());
  return d;
}

std::string subset_hash(const std::filesystem::path& root, SubsetId id) {
  return sha256_hex(sha256_file(subset_file(root, id, Split::Train)) + sha256_file(subset_file(root, id, Split::Test)) +
                    sha256_file(rul_file(root, id)));
}

nn::Tensor select_channels(const EngineTrajectory& trajectory) {
  nn::Tensor m({trajectory.length(), kSensorCount});
  for (std::size_t i = 0; i < trajectory.length(); ++i)
    for (std::size_t k = 0; k < kSensorCount; ++k) m.at(i, k) = trajectory.sensors[i][k];
  return m;
}

NormalizationStats fit_normalizer(std::span<const EngineTrajectory> train) {
  if (total_rows(train) == 0) throw std::invalid_argument("fit_normalizer: empty training set");
  NormalizationStats s;
  s.minimum.assign(kSensorCount, std::numeric_limits<double>::infinity());
  s.maximum.assign(kSensorCount, -std::numeric_limits<double>::infinity());
  for (const auto& t : train) {
    for (const auto& row : t.sensors) {
      for (std::size_t k = 0; k < kSensorCount; ++k) {
        s.minimum[k] = std::min(s.minimum[k], row[k]);
        s.maximum[k] = std::max(s.maximum[k], row[k]);
      }
    }
  }
  s.constant.resize(kSensorCount);
  for (std::size_t k = 0; k < kSensorCount; ++k) s.constant[k] = !(s.maximum[k] > s.minimum[k]);
  return s;
}

nn::Tensor apply_normalizer(const NormalizationStats& stats, const nn::Tensor& matrix) {
  const std::size_t channels = stats.minimum.size();
  if (matrix.rank() != 2 || matrix.dim(1) != channels) {
    throw std::invalid_argument("apply_normalizer: expected [T, " + std::to_string(channels) + "] matrix, got " +
                                nn::shape_str(matrix.shape()));
  }
  nn::Tensor out(matrix.shape());
  for (std::size_t i = 0; i < matrix.dim(0); ++i) {
    for (std::size_t k = 0; k < channels; ++k) {
      if (stats.constant[k]) continue;
      const double range = stats.maximum[k] - stats.minimum[k];
      out.at(i, k) = 2.0 * (matrix.at(i, k) - stats.minimum[k]) / range - 1.0;
    }
  }
  return out;
}

std::string stats_to_text(const NormalizationStats& stats) {
  nlohmann::json j;
  j["scheme"] = "minmax_pm1";
  j["minimum"] = stats.minimum;
  j["maximum"] = stats.maximum;
  j["constant"] = stats.constant;
  return j.dump(2);
}

NormalizationStats stats_from_text(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  NormalizationStats s;
  s.minimum = j.at("minimum").get<std::vector<double>>();
  s.maximum = j.at("maximum").get<std::vector<double>>();
  s.constant = j.at("constant").get<std::vector<bool>>();
  if (s.minimum.size() != s.maximum.size() || s.minimum.size() != s.constant.size()) {
    throw DataError("normalization sidecar has inconsistent channel counts");
  }
  return s;
}

NormalizedSplit normalize_split(const NormalizationStats& stats, std::span<const EngineTrajectory> trajectories) {
  NormalizedSplit out;
  for (const auto& t : trajectories) {
    out.engine_ids.push_back(t.engine_id);
    out.features.push_back(apply_normalizer(stats, select_channels(t)));
  }
  return out;
}

std::optional<std::filesystem::path> data_root_from_env() {
  const char* v = std::getenv(kDataRootEnv);
  if (!v || !*v) return std::nullopt;
  return std::filesystem::path(v);
}

}  // namespace rul
