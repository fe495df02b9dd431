#include "rul/synthetic.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

namespace rul {
namespace {

// Typical healthy levels, noise and end-of-life drift per sensor channel.
constexpr std::array<double, kSensorCount> kBase{518.67, 642.68, 1590.5, 1408.9, 14.62, 21.61, 553.37,
                                                 2388.1, 9065.2, 1.30,  47.54, 521.41, 2388.1, 8143.8,
                                                 8.44,   0.03,   393.2,  2388.0, 100.0,  38.82, 23.29};
constexpr std::array<double, kSensorCount> kNoise{0.0,  0.50, 6.0, 9.0,  0.0,  0.0014, 0.9,
                                                  0.07, 22.0, 0.0, 0.27, 0.74, 0.07,   19.0,
                                                  0.04, 0.0,  1.5, 0.0,  0.0,  0.18,   0.11};
constexpr std::array<double, kSensorCount> kDrift{0.0,  1.6,  40.0, 55.0, 0.0,  0.0, -4.5,
                                                  0.45, 60.0, 0.0,  1.6,  -4.0, 0.45, 45.0,
                                                  0.25, 0.0,  9.0,  0.0,  0.0,  -1.2, -0.75};

EngineTrajectory simulate(int engine_id, int life, int observed, const SyntheticFleetOptions& opt,
                          std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const double time_constant = 30.0 + 25.0 * uni(rng);
  std::array<double, kSensorCount> offset{};
  for (std::size_t k = 0; k < kSensorCount; ++k) offset[k] = 0.3 * kNoise[k] * gauss(rng);

  EngineTrajectory t;
  t.engine_id = engine_id;
  for (int c = 1; c <= observed; ++c) {
    const double damage = std::exp(-static_cast<double>(life - c) / time_constant);
    t.cycles.push_back(c);
    t.op_settings.push_back({0.0023 * gauss(rng), 0.0003 * gauss(rng), 100.0});
    std::array<double, kSensorCount> row{};
    for (std::size_t k = 0; k < kSensorCount; ++k) {
      row[k] = kBase[k] + offset[k] + kDrift[k] * damage + opt.noise_scale * kNoise[k] * gauss(rng);
    }
    t.sensors.push_back(row);
  }
  return t;
}

}  // namespace

SyntheticFleet make_synthetic_fleet(const SyntheticFleetOptions& options) {
  if (options.min_life < 2 || options.max_life < options.min_life) {
    throw std::invalid_argument("synthetic fleet: invalid life range");
  }
  std::mt19937_64 rng(options.seed);
  std::uniform_int_distribution<int> life_dist(options.min_life, options.max_life);
  SyntheticFleet fleet;
  for (std::size_t i = 0; i < options.train_engines; ++i) {
    const int life = life_dist(rng);
    fleet.train.push_back(simulate(static_cast<int>(i) + 1, life, life, options, rng));
  }
  for (std::size_t i = 0; i < options.test_engines; ++i) {
    const int life = life_dist(rng);
    std::uniform_int_distribution<int> cut_dist(std::max(1, life / 5), life - 1);
    const int observed = cut_dist(rng);
    fleet.test.push_back(simulate(static_cast<int>(i) + 1, life, observed, options, rng));
    fleet.test_rul.push_back(life - observed);
  }
  return fleet;
}

void write_fleet(const std::filesystem::path& root, SubsetId id, const SyntheticFleet& fleet) {
  std::filesystem::create_directories(root);
  {
    std::ofstream out(subset_file(root, id, Split::Train));
    write_trajectories(out, fleet.train);
  }
  {
    std::ofstream out(subset_file(root, id, Split::Test));
    write_trajectories(out, fleet.test);
  }
  std::ofstream out(rul_file(root, id));
  for (int v : fleet.test_rul) out << v << '\n';
}

}  // namespace rul
