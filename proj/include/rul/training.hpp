#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "rul/cmapss.hpp"
#include "rul/evaluation.hpp"
#include "rul/losses.hpp"
#include "rul/models/model.hpp"
#include "rul/nn/checkpoint.hpp"
#include "rul/windowing.hpp"

namespace rul {

struct TrainConfig {
  models::ModelConfig model;
  std::string subset = "FD001";
  std::size_t batch_size = 210;
  double lr_min = 9e-5;
  double lr_max = 2e-4;
  std::size_t epochs = 120;
  double noise_sigma = kNoiseSigma;
  LossWeights loss;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::size_t folds = 5;
  /// Epochs per full up-and-down learning-rate triangle.
  std::size_t epochs_per_cycle = 4;
  bool lr_amplitude_decay = false;
  double weight_decay = 1e-2;
  double clip_norm = 5.0;
  /// Checkpoints averaged from the selected epoch onwards.
  std::size_t average_epochs = 5;
  int capped_stride = kCappedStride;
  std::size_t eval_k = 5;

  bool operator==(const TrainConfig&) const = default;
};

/// Training defaults for an architecture and subset (batch size, learning
/// rate interval and window length differ between baselines and the
/// block models, and between FD001 and FD003).
TrainConfig default_train_config(models::Architecture arch, SubsetId subset);
void validate(const TrainConfig& config);
/// Composite objective for the block models, plain Huber for the baselines.
bool uses_block_objective(models::Architecture arch);

void to_json(nlohmann::json& j, const TrainConfig& c);
/// Missing keys keep the values already in `c`.
void from_json(const nlohmann::json& j, TrainConfig& c);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_rmse = 0.0;   // NaN when there is no validation fold
  double val_score = 0.0;  // NaN when there is no validation fold
  double lr = 0.0;         // rate used at the last step of the epoch

  bool operator==(const EpochRecord&) const = default;
};

struct RunHistory {
  std::vector<EpochRecord> epochs;
  std::vector<std::string> checkpoints;
};

/// Thrown when the loss or gradient norm becomes non-finite.
class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(std::size_t epoch, std::size_t step, const std::string& what);
  std::size_t epoch() const { return epoch_; }
  std::size_t step() const { return step_; }

 private:
  std::size_t epoch_;
  std::size_t step_;
};

/// A training window referenced by engine index (into the split) and end cycle.
struct TrainSample {
  std::size_t engine = 0;
  int end_cycle = 0;
  double target = 0.0;
};

/// Windows of one validation engine: the k windows ending at the end of its
/// held-out segment, scored against the piece-wise RUL at that cycle.
struct ValidationItem {
  std::size_t engine = 0;
  int end_cycle = 0;
  double truth = 0.0;
};

struct FoldData {
  std::vector<TrainSample> train;
  std::vector<ValidationItem> validation;
};

/// Training windows (minus held-out segments) and validation items for one
/// fold; without a split every window of every engine is used for training.
FoldData build_fold(const NormalizedSplit& data, const std::optional<DatasetSplit>& split, std::size_t window,
                    int capped_stride = kCappedStride, std::size_t eval_k = 5);

/// Batch tensor [B, W, C] and targets [B, 1] for the given samples, with
/// fresh N(0, sigma^2) noise on the features.
std::pair<nn::Tensor, nn::Tensor> assemble_batch(const NormalizedSplit& data, std::span<const TrainSample> samples,
                                                 std::size_t window, double sigma, nn::Rng& rng);

/// Validation RMSE and Score of `predict` on the fold's validation items.
std::pair<double, double> validate_fold(const Predictor& predict, const NormalizedSplit& data,
                                        std::span<const ValidationItem> items, std::size_t window, std::size_t k = 5);

/// Training objective for one batch; `training` toggles dropout.
nn::Var batch_objective(const models::Model& model, nn::Tape& tape, const nn::Tensor& windows,
                        const nn::Tensor& targets, const LossWeights& weights, bool training, nn::Rng& rng);

using EpochCallback = std::function<void(const EpochRecord&, const models::Model&)>;
using Logger = std::function<void(const std::string&)>;

struct TrainResult {
  RunHistory history;
  std::unique_ptr<models::Model> model;
};

/// Trains a fresh model for `epochs` epochs (config.epochs when 0). The
/// callback runs after every epoch with the current weights.
TrainResult train_model(const TrainConfig& config, const NormalizedSplit& data, const FoldData& fold,
                        std::uint64_t seed, std::size_t epochs = 0, const EpochCallback& on_epoch = {},
                        const Logger& log = {});

/// Centred moving average, truncated at the ends.
std::vector<double> moving_average(std::span<const double> values, std::size_t width = 5);

/// 0-based index of the minimum of the 5-epoch smoothed curve; earliest on ties.
std::size_t select_plateau_epoch(std::span<const double> val_rmse);
std::size_t select_plateau_epoch(const RunHistory& history);

/// Per-engine mean over several prediction vectors.
std::vector<double> average_predictions(std::span<const std::vector<double>> per_checkpoint);

/// Restores each checkpoint into `model` in turn and averages the per-engine
/// estimates. Requires at least `min_checkpoints` checkpoints.
std::vector<double> checkpoint_average_predict(models::Model& model, std::span<const nn::Checkpoint> checkpoints,
                                               const NormalizedSplit& test, std::size_t k = 5,
                                               std::size_t min_checkpoints = 5);

struct SeedOutcome {
  std::uint64_t seed = 0;
  std::optional<double> rmse;
  std::optional<double> score;
  std::string error;
};

struct MultiRunReport {
  std::vector<SeedOutcome> runs;
  double rmse_mean = 0.0;
  double rmse_std = 0.0;
  double score_mean = 0.0;
  double score_std = 0.0;
  bool incomplete = false;
};

/// Mean and sample standard deviation over the completed runs.
MultiRunReport aggregate_runs(std::vector<SeedOutcome> runs);
/// Runs `run_one` per seed (returning RMSE and Score); a throwing seed marks the report incomplete.
MultiRunReport multi_run(std::span<const std::uint64_t> seeds,
                         const std::function<std::pair<double, double>(std::uint64_t)>& run_one);
std::string multi_run_to_json(const MultiRunReport& report);

struct ProtocolResult {
  std::vector<RunHistory> cv_histories;
  std::vector<double> mean_val_rmse;
  std::size_t selected_epoch = 0;  // 1-based
  RunHistory final_history;
  std::vector<nn::Checkpoint> averaged_checkpoints;
  EvalReport report;
};

/// Full protocol for one seed: engine-split CV to choose the epoch, retrain
/// on all training data up to that epoch plus the averaging span, then
/// evaluate the checkpoint-averaged model on the test set. When `run_dir`
/// is given, the config, normalization stats, history, checkpoints and
/// report are written there.
ProtocolResult run_protocol(const TrainConfig& config, std::span<const EngineTrajectory> train,
                            std::span<const EngineTrajectory> test, std::span<const int> test_rul,
                            std::uint64_t seed, const std::optional<std::filesystem::path>& run_dir = std::nullopt,
                            const Logger& log = {});

std::string history_csv(const ProtocolResult& result);

/// Provenance record of one CLI invocation; written once per run directory.
struct RunManifest {
  std::string command;
  std::string config_json;
  std::string dataset_hash;
  std::vector<std::uint64_t> seeds;
  std::string output_dir;
  std::string tool_version;
  std::string data_dir;
  std::size_t engines = 0;  // 0 = every engine
  bool strict_counts = true;
};

std::string manifest_to_json(const RunManifest& manifest);
RunManifest manifest_from_json(const std::string& text);
/// Fails if a manifest already exists in the directory.
void write_manifest(const std::filesystem::path& dir, const RunManifest& manifest);

}  // namespace rul
