#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "rul/nn/autograd.hpp"
#include "rul/nn/ops.hpp"

namespace rul::models {

enum class Architecture { Lstm, Cnn, Tfm, Dtfm, Tfim };

std::string to_string(Architecture arch);
Architecture parse_architecture(const std::string& tag);

/// Every hyperparameter needed to rebuild a model graph.
struct ModelConfig {
  Architecture arch = Architecture::Tfm;
  std::size_t window = 32;
  std::size_t sensors = 21;
  std::uint64_t init_seed = 1;

  // LSTM baseline.
  std::size_t lstm_hidden = 21;
  std::size_t lstm_layers = 3;
  double lstm_dropout = 0.5;
  std::size_t lstm_head = 126;

  // CNN baseline.
  std::vector<std::size_t> cnn_kernels{7, 3};
  std::vector<std::size_t> cnn_channels{5, 10};
  std::vector<std::size_t> cnn_strides{1, 1};
  std::vector<std::size_t> cnn_pool_kernels{3, 3};
  std::vector<std::size_t> cnn_pool_strides{2, 1};
  std::vector<std::size_t> cnn_mlp{60, 120};
  double cnn_dropout = 0.5;

  // Time-feature extractor and heads.
  std::size_t tfm_layers = 3;
  double tfm_dropout = 0.5;
  std::size_t head_hidden = 256;
  double head_dropout = 0.5;

  // Adapted SCINet extractor.
  std::size_t scinet_levels = 3;
  std::size_t scinet_hidden = 16;
  std::size_t scinet_kernel = 3;
  double scinet_dropout = 0.65;
  std::size_t scinet_stacks = 2;

  /// Length of one block latent.
  std::size_t latent_dim() const { return window * sensors; }
  /// Extractor blocks feeding the fused head (0 for the baselines).
  std::size_t block_count() const;

  bool operator==(const ModelConfig&) const = default;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);
/// SHA-256 of the canonical JSON form.
std::string config_hash(const ModelConfig& c);

struct ForwardOptions {
  bool training = false;
  /// Per-block flags; a set flag replaces that block's latent with zeros
  /// after normalization. Empty means no masking.
  std::vector<bool> zero_mask;
};

/// Predictions are [B, 1]; latents are [B, latent_dim] and unit-norm.
struct ForwardOutput {
  nn::Var prediction;
  std::vector<nn::Var> block_predictions;
  std::vector<nn::Var> block_latents;
  /// Auxiliary heads inside extractors (the SCINet intermediate taps).
  std::vector<nn::Var> skip_predictions;
};

class Model {
 public:
  explicit Model(ModelConfig config) : config_(std::move(config)) {}
  virtual ~Model() = default;
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  /// Input is a batch of windows [B, W, sensors].
  ForwardOutput forward(nn::Tape& tape, const nn::Var& windows, const ForwardOptions& options,
                        nn::Rng& rng) const;

  const ModelConfig& config() const { return config_; }
  nn::ParameterSet& params() { return params_; }
  const nn::ParameterSet& params() const { return params_; }
  std::size_t block_count() const { return config_.block_count(); }

 protected:
  virtual ForwardOutput forward_impl(nn::Tape& tape, const nn::Var& windows, const ForwardOptions& options,
                                     nn::Rng& rng) const = 0;

  ModelConfig config_;
  nn::ParameterSet params_;
};

std::unique_ptr<Model> make_model(const ModelConfig& config);

/// Inference on a batch of windows [B, W, sensors]; returns B predictions.
std::vector<double> predict_batch(const Model& model, const nn::Tensor& windows,
                                  const std::vector<bool>& zero_mask = {});

}  // namespace rul::models
