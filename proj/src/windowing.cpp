#include "rul/windowing.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>

namespace rul {

int piecewise_rul(int total_cycles, int cycle, int cap) {
  if (cycle < 1 || cycle > total_cycles) {
    throw std::out_of_range("piecewise_rul: cycle " + std::to_string(cycle) + " outside [1, " +
                            std::to_string(total_cycles) + "]");
  }
  return std::min(cap, total_cycles - cycle);
}

nn::Tensor window_ending_at(const nn::Tensor& matrix, int end_cycle, std::size_t window) {
  if (matrix.rank() != 2 || matrix.dim(0) == 0) throw std::invalid_argument("window_ending_at: empty matrix");
  const int T = static_cast<int>(matrix.dim(0));
  if (end_cycle > T) throw std::out_of_range("window_ending_at: end cycle beyond trajectory");
  const std::size_t C = matrix.dim(1);
  nn::Tensor out({window, C});
  const int first = end_cycle - static_cast<int>(window) + 1;
  for (std::size_t r = 0; r < window; ++r) {
    const int cycle = std::max(1, first + static_cast<int>(r));
    const std::size_t src = static_cast<std::size_t>(cycle - 1);
    for (std::size_t k = 0; k < C; ++k) out.at(r, k) = matrix.at(src, k);
  }
  return out;
}

std::vector<WindowSample> make_train_windows(const nn::Tensor& matrix, int engine_id, std::size_t window,
                                             int capped_stride, int cap, std::optional<HoldoutSegment> exclude) {
  if (capped_stride < 1) throw std::invalid_argument("capped_stride must be >= 1");
  const int T = static_cast<int>(matrix.dim(0));
  const int W = static_cast<int>(window);
  if (T < W) {
    throw std::invalid_argument("engine " + std::to_string(engine_id) + " has " + std::to_string(T) +
                                " cycles, fewer than the window size " + std::to_string(W));
  }
  std::vector<WindowSample> out;
  int capped_seen = 0;
  for (int end = W; end <= T; ++end) {
    const int target = piecewise_rul(T, end, cap);
    if (target == cap) {
      const bool keep = capped_seen % capped_stride == 0;
      ++capped_seen;
      if (!keep) continue;
    }
    if (exclude && exclude->overlaps(end - W + 1, end)) continue;
    out.push_back(WindowSample{window_ending_at(matrix, end, window), static_cast<double>(target), engine_id, end});
  }
  return out;
}

std::size_t train_window_count(std::size_t total_cycles, std::size_t window, int capped_stride, int cap) {
  if (total_cycles < window) return 0;
  const long T = static_cast<long>(total_cycles), W = static_cast<long>(window);
  const long candidates = T - W + 1;
  const long capped = std::clamp(T - cap - W + 1, 0L, candidates);
  return static_cast<std::size_t>((candidates - capped) + (capped + capped_stride - 1) / capped_stride);
}

std::vector<WindowSample> make_eval_windows_last_k(const nn::Tensor& matrix, int engine_id, std::size_t window,
                                                   std::size_t k) {
  if (matrix.rank() != 2 || matrix.dim(0) < 1) throw std::invalid_argument("trajectory must have at least one cycle");
  const int T = static_cast<int>(matrix.dim(0));
  const std::size_t C = matrix.dim(1);
  // Pad so even the oldest of the k windows lies within the padded matrix.
  const std::size_t needed = window + k - 1;
  const std::size_t pad = needed > matrix.dim(0) ? needed - matrix.dim(0) : 0;
  nn::Tensor padded({matrix.dim(0) + pad, C});
  for (std::size_t r = 0; r < padded.dim(0); ++r) {
    const std::size_t src = r < pad ? 0 : r - pad;
    for (std::size_t c = 0; c < C; ++c) padded.at(r, c) = matrix.at(src, c);
  }
  std::vector<WindowSample> out;
  for (std::size_t j = 0; j < k; ++j) {
    const int padded_end = static_cast<int>(padded.dim(0)) - static_cast<int>(j);
    out.push_back(WindowSample{window_ending_at(padded, padded_end, window), std::nullopt, engine_id,
                               T - static_cast<int>(j)});
  }
  return out;
}

void add_noise(nn::Tensor& features, double sigma, std::mt19937_64& rng) {
  if (sigma < 0.0) throw std::invalid_argument("noise sigma must be non-negative");
  if (sigma == 0.0) return;
  std::normal_distribution<double> dist(0.0, sigma);
  for (double& v : features.data()) v += dist(rng);
}

WindowSample augment_noise(const WindowSample& sample, double sigma, std::mt19937_64& rng) {
  WindowSample out = sample;
  add_noise(out.features, sigma, rng);
  return out;
}

bool DatasetSplit::is_validation(int engine_id) const {
  return std::find(validation_engine_ids.begin(), validation_engine_ids.end(), engine_id) !=
         validation_engine_ids.end();
}

std::optional<HoldoutSegment> DatasetSplit::exclusion_for(int engine_id) const {
  if (!is_validation(engine_id)) return std::nullopt;
  return holdout.at(engine_id);
}

std::size_t holdout_length(std::size_t window) { return window + 5; }

std::vector<DatasetSplit> make_cv_splits(std::span<const int> engine_ids, std::span<const std::size_t> lengths,
                                         std::size_t folds, std::size_t window, std::mt19937_64& rng) {
  if (engine_ids.size() != lengths.size()) throw std::invalid_argument("make_cv_splits: ids/lengths mismatch");
  if (folds < 1 || engine_ids.size() < folds) {
    throw std::invalid_argument("make_cv_splits: need at least " + std::to_string(folds) + " engines");
  }
  const std::size_t seg_len = holdout_length(window);
  std::map<int, HoldoutSegment> holdout;
  for (std::size_t i = 0; i < engine_ids.size(); ++i) {
    if (lengths[i] < seg_len) {
      throw std::invalid_argument("engine " + std::to_string(engine_ids[i]) + " has " + std::to_string(lengths[i]) +
                                  " cycles, shorter than the holdout segment " + std::to_string(seg_len));
    }
    std::uniform_int_distribution<std::size_t> start(1, lengths[i] - seg_len + 1);
    holdout[engine_ids[i]] = HoldoutSegment{static_cast<int>(start(rng)), static_cast<int>(seg_len)};
  }
  std::vector<int> order(engine_ids.begin(), engine_ids.end());
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<DatasetSplit> splits(folds);
  for (std::size_t f = 0; f < folds; ++f) {
    splits[f].fold = static_cast<int>(f);
    splits[f].holdout = holdout;
  }
  for (std::size_t i = 0; i < order.size(); ++i) splits[i % folds].validation_engine_ids.push_back(order[i]);
  for (auto& s : splits) {
    std::sort(s.validation_engine_ids.begin(), s.validation_engine_ids.end());
    for (int id : engine_ids) {
      if (!s.is_validation(id)) s.train_engine_ids.push_back(id);
    }
  }
  return splits;
}

double excluded_fraction(const DatasetSplit& split, std::span<const std::size_t> lengths) {
  const double total = static_cast<double>(std::accumulate(lengths.begin(), lengths.end(), std::size_t{0}));
  double excluded = 0.0;
  for (int id : split.validation_engine_ids) excluded += split.holdout.at(id).length;
  return excluded / total;
}

}  // namespace rul
