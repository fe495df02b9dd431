#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rul/cmapss.hpp"
#include "rul/models/model.hpp"
#include "rul/nn/tensor.hpp"

namespace rul {

/// Maps a batch of windows [N, W, channels] to N predictions.
using Predictor = std::function<std::vector<double>(const nn::Tensor& windows)>;

/// Inference-mode predictor over a frozen model, optionally with blocks zeroed.
Predictor model_predictor(const models::Model& model, std::vector<bool> zero_mask = {});

/// Packs equally shaped [W, C] windows into [N, W, C].
nn::Tensor stack_windows(std::span<const nn::Tensor> windows);

/// mean_j (p_j - j) clamped at 0, where p_j predicts RUL at cycle T - j.
double corrected_estimate(std::span<const double> predictions);

/// RUL estimate at the last cycle from the windows ending at T, ..., T-k+1.
double predict_engine_rul(const Predictor& predict, const nn::Tensor& matrix, std::size_t window, std::size_t k = 5);

/// One prediction per cycle 1..T from the window ending at that cycle.
std::vector<double> trajectory_curve(const Predictor& predict, const nn::Tensor& matrix, std::size_t window);

/// trajectory_curve with the flagged blocks' latents zeroed.
std::vector<double> ablate_blocks(const models::Model& model, const nn::Tensor& matrix,
                                  const std::vector<bool>& zero_mask);

struct EvalReport {
  std::string subset;
  std::vector<int> engine_ids;
  std::vector<double> predicted;
  std::vector<double> truth;
  double rmse = 0.0;
  double score = 0.0;
  std::string model_manifest;  // path or hash of the model that produced the predictions

  bool operator==(const EvalReport&) const = default;
};

struct EvalOptions {
  std::size_t k = 5;
  /// Test labels above the cap are clipped, matching the piece-wise training target.
  bool cap_labels = true;
};

EvalReport evaluate_subset(const Predictor& predict, const NormalizedSplit& test, std::span<const int> rul_labels,
                           std::size_t window, const std::string& subset, const EvalOptions& options = {});

/// Builds a report from precomputed per-engine estimates (e.g. checkpoint averages).
EvalReport make_report(const std::string& subset, std::vector<int> engine_ids, std::vector<double> predicted,
                       std::vector<double> truth);

std::string report_to_json(const EvalReport& report);
EvalReport report_from_json(const std::string& text);
std::string report_to_csv(const EvalReport& report);
void save_report(const std::filesystem::path& json_path, const std::filesystem::path& csv_path,
                 const EvalReport& report);
EvalReport load_report(const std::filesystem::path& json_path);

/// Local linear regression with tricube weights over the ceil(frac * n)
/// nearest neighbours of each point; no robustness iterations.
std::vector<double> lowess(std::span<const double> x, std::span<const double> y, double frac);
/// lowess against x = 0, 1, ..., n-1.
std::vector<double> lowess_smooth(std::span<const double> curve, double frac = 0.11);

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::string color = "#1f77b4";
  bool dashed = false;
};

/// Line chart as a standalone SVG document.
std::string render_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                       std::span<const PlotSeries> series);

}  // namespace rul
