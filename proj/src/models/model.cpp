#include "rul/models/model.hpp"

#include <nlohmann/json.hpp>

#include <stdexcept>

#include "rul/io.hpp"
#include "rul/models/architectures.hpp"

namespace rul::models {

std::string to_string(Architecture arch) {
  switch (arch) {
    case Architecture::Lstm: return "lstm";
    case Architecture::Cnn: return "cnn";
    case Architecture::Tfm: return "tfm";
    case Architecture::Dtfm: return "dtfm";
    case Architecture::Tfim: return "tfim";
  }
  return "?";
}

Architecture parse_architecture(const std::string& tag) {
  for (auto a : {Architecture::Lstm, Architecture::Cnn, Architecture::Tfm, Architecture::Dtfm, Architecture::Tfim}) {
    if (to_string(a) == tag) return a;
  }
  throw std::invalid_argument("unknown model '" + tag + "' (expected lstm, cnn, tfm, dtfm or tfim)");
}

std::size_t ModelConfig::block_count() const {
  switch (arch) {
    case Architecture::Lstm:
    case Architecture::Cnn: return 0;
    case Architecture::Tfm: return 1;
    case Architecture::Dtfm: return 2;
    case Architecture::Tfim: return 3;
  }
  return 0;
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{
      {"arch", to_string(c.arch)},
      {"window", c.window},
      {"sensors", c.sensors},
      {"init_seed", c.init_seed},
      {"lstm_hidden", c.lstm_hidden},
      {"lstm_layers", c.lstm_layers},
      {"lstm_dropout", c.lstm_dropout},
      {"lstm_head", c.lstm_head},
      {"cnn_kernels", c.cnn_kernels},
      {"cnn_channels", c.cnn_channels},
      {"cnn_strides", c.cnn_strides},
      {"cnn_pool_kernels", c.cnn_pool_kernels},
      {"cnn_pool_strides", c.cnn_pool_strides},
      {"cnn_mlp", c.cnn_mlp},
      {"cnn_dropout", c.cnn_dropout},
      {"tfm_layers", c.tfm_layers},
      {"tfm_dropout", c.tfm_dropout},
      {"head_hidden", c.head_hidden},
      {"head_dropout", c.head_dropout},
      {"scinet_levels", c.scinet_levels},
      {"scinet_hidden", c.scinet_hidden},
      {"scinet_kernel", c.scinet_kernel},
      {"scinet_dropout", c.scinet_dropout},
      {"scinet_stacks", c.scinet_stacks},
  };
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  ModelConfig d;
  c.arch = parse_architecture(j.value("arch", to_string(d.arch)));
  c.window = j.value("window", d.window);
  c.sensors = j.value("sensors", d.sensors);
  c.init_seed = j.value("init_seed", d.init_seed);
  c.lstm_hidden = j.value("lstm_hidden", d.lstm_hidden);
  c.lstm_layers = j.value("lstm_layers", d.lstm_layers);
  c.lstm_dropout = j.value("lstm_dropout", d.lstm_dropout);
  c.lstm_head = j.value("lstm_head", d.lstm_head);
  c.cnn_kernels = j.value("cnn_kernels", d.cnn_kernels);
  c.cnn_channels = j.value("cnn_channels", d.cnn_channels);
  c.cnn_strides = j.value("cnn_strides", d.cnn_strides);
  c.cnn_pool_kernels = j.value("cnn_pool_kernels", d.cnn_pool_kernels);
  c.cnn_pool_strides = j.value("cnn_pool_strides", d.cnn_pool_strides);
  c.cnn_mlp = j.value("cnn_mlp", d.cnn_mlp);
  c.cnn_dropout = j.value("cnn_dropout", d.cnn_dropout);
  c.tfm_layers = j.value("tfm_layers", d.tfm_layers);
  c.tfm_dropout = j.value("tfm_dropout", d.tfm_dropout);
  c.head_hidden = j.value("head_hidden", d.head_hidden);
  c.head_dropout = j.value("head_dropout", d.head_dropout);
  c.scinet_levels = j.value("scinet_levels", d.scinet_levels);
  c.scinet_hidden = j.value("scinet_hidden", d.scinet_hidden);
  c.scinet_kernel = j.value("scinet_kernel", d.scinet_kernel);
  c.scinet_dropout = j.value("scinet_dropout", d.scinet_dropout);
  c.scinet_stacks = j.value("scinet_stacks", d.scinet_stacks);
}

std::string config_hash(const ModelConfig& c) { return sha256_hex(nlohmann::json(c).dump()); }

ForwardOutput Model::forward(nn::Tape& tape, const nn::Var& windows, const ForwardOptions& options,
                             nn::Rng& rng) const {
  const auto& s = windows.shape();
  if (s.size() != 3 || s[1] != config_.window || s[2] != config_.sensors || s[0] == 0) {
    throw std::invalid_argument(to_string(config_.arch) + ": expected input [B, " + std::to_string(config_.window) +
                                ", " + std::to_string(config_.sensors) + "], got " + nn::shape_str(s));
  }
  if (!options.zero_mask.empty() && options.zero_mask.size() != block_count()) {
    throw std::invalid_argument("zero mask has " + std::to_string(options.zero_mask.size()) + " entries for " +
                                std::to_string(block_count()) + " blocks");
  }
  return forward_impl(tape, windows, options, rng);
}

std::unique_ptr<Model> make_model(const ModelConfig& config) {
  if (config.window == 0 || config.sensors == 0) throw std::invalid_argument("model window and sensors must be positive");
  switch (config.arch) {
    case Architecture::Lstm: return std::make_unique<LstmBaseline>(config);
    case Architecture::Cnn: return std::make_unique<CnnBaseline>(config);
    case Architecture::Tfm: return std::make_unique<TimeFeatureModel>(config);
    case Architecture::Dtfm:
    case Architecture::Tfim: return std::make_unique<InteractionModel>(config);
  }
  throw std::invalid_argument("unsupported architecture");
}

std::vector<double> predict_batch(const Model& model, const nn::Tensor& windows, const std::vector<bool>& zero_mask) {
  nn::Tape tape;
  tape.set_grad_enabled(false);
  nn::Rng rng(0);
  ForwardOptions options;
  options.zero_mask = zero_mask;
  const auto out = model.forward(tape, tape.constant(windows), options, rng);
  const auto& p = out.prediction.value();
  return std::vector<double>(p.data().begin(), p.data().end());
}

}  // namespace rul::models
