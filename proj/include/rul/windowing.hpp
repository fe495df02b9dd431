#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "rul/nn/tensor.hpp"

namespace rul {

inline constexpr int kRulCap = 125;
inline constexpr int kCappedStride = 6;
inline constexpr double kNoiseSigma = 0.04;

/// min(cap, total_cycles - cycle) for 1 <= cycle <= total_cycles.
int piecewise_rul(int total_cycles, int cycle, int cap = kRulCap);

/// A window of W consecutive rows ending at `end_cycle` (1-based; values
/// below W mean the window reaches into left padding).
struct WindowSample {
  nn::Tensor features;  // [W, channels]
  std::optional<double> target;
  int engine_id = 0;
  int end_cycle = 0;
};

/// Inclusive cycle range [start, start + length - 1] held out for validation.
struct HoldoutSegment {
  int start = 1;
  int length = 0;

  int end() const { return start + length - 1; }
  bool overlaps(int first, int last) const { return first <= end() && last >= start; }
};

/// Window ending at `end_cycle`, left-padded by repeating the first row when
/// it would start before cycle 1.
nn::Tensor window_ending_at(const nn::Tensor& matrix, int end_cycle, std::size_t window);

/// Training windows with piece-wise targets. Windows whose target equals the
/// cap are subsampled: the first one is kept, then every `capped_stride`-th.
/// Windows overlapping `exclude` are dropped after subsampling.
std::vector<WindowSample> make_train_windows(const nn::Tensor& matrix, int engine_id, std::size_t window,
                                             int capped_stride = kCappedStride, int cap = kRulCap,
                                             std::optional<HoldoutSegment> exclude = std::nullopt);

/// Closed-form size of make_train_windows without exclusion.
std::size_t train_window_count(std::size_t total_cycles, std::size_t window, int capped_stride = kCappedStride,
                               int cap = kRulCap);

/// k windows ending at cycles T, T-1, ..., T-k+1 (in that order), targets absent.
std::vector<WindowSample> make_eval_windows_last_k(const nn::Tensor& matrix, int engine_id, std::size_t window,
                                                   std::size_t k = 5);

/// Copy of `sample` with i.i.d. N(0, sigma^2) noise added to every feature.
WindowSample augment_noise(const WindowSample& sample, double sigma, std::mt19937_64& rng);
/// In-place variant used when assembling batches.
void add_noise(nn::Tensor& features, double sigma, std::mt19937_64& rng);

/// One cross-validation fold. `validation_engine_ids` across folds partition
/// the fleet. Every engine owns one random holdout segment of length W + 5;
/// in this fold the segments of the validation engines are held out and
/// training uses every window that does not overlap them.
struct DatasetSplit {
  int fold = 0;
  std::vector<int> train_engine_ids;
  std::vector<int> validation_engine_ids;
  std::map<int, HoldoutSegment> holdout;

  bool is_validation(int engine_id) const;
  /// Segment to exclude from `engine_id`'s training windows in this fold.
  std::optional<HoldoutSegment> exclusion_for(int engine_id) const;
};

std::size_t holdout_length(std::size_t window);

/// Requires at least `folds` engines and every trajectory at least W + 5 long.
std::vector<DatasetSplit> make_cv_splits(std::span<const int> engine_ids, std::span<const std::size_t> lengths,
                                         std::size_t folds, std::size_t window, std::mt19937_64& rng);

/// Fraction of all training time points that fall inside this fold's held-out segments.
double excluded_fraction(const DatasetSplit& split, std::span<const std::size_t> lengths);

}  // namespace rul
