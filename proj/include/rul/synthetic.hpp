#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "rul/cmapss.hpp"

namespace rul {

/// Generator for fleets in the dataset's file layout, for smoke runs and
/// tests when the real files are unavailable. Sensors drift exponentially
/// towards failure on top of Gaussian noise; six channels stay constant.
struct SyntheticFleetOptions {
  std::size_t train_engines = 20;
  std::size_t test_engines = 20;
  int min_life = 128;
  int max_life = 362;
  double noise_scale = 1.0;
  std::uint64_t seed = 7;
};

struct SyntheticFleet {
  std::vector<EngineTrajectory> train;
  std::vector<EngineTrajectory> test;
  std::vector<int> test_rul;
};

SyntheticFleet make_synthetic_fleet(const SyntheticFleetOptions& options);

/// Writes train_/test_/RUL_ files for `id` under `root`.
void write_fleet(const std::filesystem::path& root, SubsetId id, const SyntheticFleet& fleet);

}  // namespace rul
