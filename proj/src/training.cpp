#include "rul/training.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "rul/io.hpp"
#include "rul/metrics.hpp"
#include "rul/nn/optim.hpp"

namespace rul {

using models::Architecture;

TrainConfig default_train_config(Architecture arch, SubsetId subset) {
  TrainConfig c;
  c.model.arch = arch;
  c.subset = to_string(subset);
  c.model.window = subset == SubsetId::FD003 ? 40 : 32;
  if (uses_block_objective(arch)) {
    c.batch_size = 210;
    c.lr_min = 9e-5;
    c.lr_max = 2e-4;
  } else {
    c.batch_size = 128;
    c.lr_min = 1e-4;
    c.lr_max = 5e-4;
  }
  return c;
}

bool uses_block_objective(Architecture arch) { return arch != Architecture::Lstm && arch != Architecture::Cnn; }

void validate(const TrainConfig& c) {
  if (c.batch_size == 0) throw std::invalid_argument("batch size must be positive");
  if (!(c.lr_min > 0 && c.lr_min < c.lr_max)) throw std::invalid_argument("learning rates need 0 < lr_min < lr_max");
  if (c.epochs == 0) throw std::invalid_argument("epochs must be positive");
  if (c.noise_sigma < 0) throw std::invalid_argument("noise sigma must be non-negative");
  if (c.seeds.empty()) throw std::invalid_argument("at least one seed is required");
  if (c.folds < 2) throw std::invalid_argument("cross-validation needs at least 2 folds");
  if (c.epochs_per_cycle < 1) throw std::invalid_argument("epochs per LR cycle must be positive");
  if (c.average_epochs < 1) throw std::invalid_argument("average_epochs must be positive");
  if (c.eval_k < 1) throw std::invalid_argument("eval_k must be positive");
  if (c.clip_norm <= 0) throw std::invalid_argument("clip norm must be positive");
  parse_subset_id(c.subset);
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{
      {"model", c.model},
      {"subset", c.subset},
      {"batch_size", c.batch_size},
      {"lr_min", c.lr_min},
      {"lr_max", c.lr_max},
      {"epochs", c.epochs},
      {"noise_sigma", c.noise_sigma},
      {"loss", {{"lambda", c.loss.lambda}, {"sigma", c.loss.sigma}, {"beta", c.loss.beta}, {"epsilon", c.loss.epsilon}}},
      {"seeds", c.seeds},
      {"folds", c.folds},
      {"epochs_per_cycle", c.epochs_per_cycle},
      {"lr_amplitude_decay", c.lr_amplitude_decay},
      {"weight_decay", c.weight_decay},
      {"clip_norm", c.clip_norm},
      {"average_epochs", c.average_epochs},
      {"capped_stride", c.capped_stride},
      {"eval_k", c.eval_k},
  };
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  if (j.contains("model")) {
    // Start from the current model settings so partial model blocks override field by field.
    nlohmann::json merged = c.model;
    merged.update(j.at("model"));
    c.model = merged.get<models::ModelConfig>();
  }
  c.subset = j.value("subset", c.subset);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.lr_min = j.value("lr_min", c.lr_min);
  c.lr_max = j.value("lr_max", c.lr_max);
  c.epochs = j.value("epochs", c.epochs);
  c.noise_sigma = j.value("noise_sigma", c.noise_sigma);
  if (j.contains("loss")) {
    const auto& l = j.at("loss");
    c.loss.lambda = l.value("lambda", c.loss.lambda);
    c.loss.sigma = l.value("sigma", c.loss.sigma);
    c.loss.beta = l.value("beta", c.loss.beta);
    c.loss.epsilon = l.value("epsilon", c.loss.epsilon);
  }
  c.seeds = j.value("seeds", c.seeds);
  c.folds = j.value("folds", c.folds);
  c.epochs_per_cycle = j.value("epochs_per_cycle", c.epochs_per_cycle);
  c.lr_amplitude_decay = j.value("lr_amplitude_decay", c.lr_amplitude_decay);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.clip_norm = j.value("clip_norm", c.clip_norm);
  c.average_epochs = j.value("average_epochs", c.average_epochs);
  c.capped_stride = j.value("capped_stride", c.capped_stride);
  c.eval_k = j.value("eval_k", c.eval_k);
}

TrainingDiverged::TrainingDiverged(std::size_t epoch, std::size_t step, const std::string& what)
    : std::runtime_error("training diverged at epoch " + std::to_string(epoch) + ", step " + std::to_string(step) +
                         ": " + what),
      epoch_(epoch),
      step_(step) {}

FoldData build_fold(const NormalizedSplit& data, const std::optional<DatasetSplit>& split, std::size_t window,
                    int capped_stride, std::size_t eval_k) {
  FoldData fold;
  for (std::size_t e = 0; e < data.features.size(); ++e) {
    const int id = data.engine_ids[e];
    const std::optional<HoldoutSegment> seg = split ? split->exclusion_for(id) : std::nullopt;
    for (const auto& w : make_train_windows(data.features[e], id, window, capped_stride, kRulCap, seg)) {
      fold.train.push_back(TrainSample{e, w.end_cycle, *w.target});
    }
    if (seg) {
      const int T = static_cast<int>(data.features[e].dim(0));
      if (static_cast<std::size_t>(seg->length) < eval_k) throw std::invalid_argument("holdout shorter than eval_k");
      fold.validation.push_back(ValidationItem{e, seg->end(), static_cast<double>(piecewise_rul(T, seg->end()))});
    }
  }
  if (fold.train.empty()) throw std::invalid_argument("fold has no training windows");
  return fold;
}

std::pair<nn::Tensor, nn::Tensor> assemble_batch(const NormalizedSplit& data, std::span<const TrainSample> samples,
                                                 std::size_t window, double sigma, nn::Rng& rng) {
  std::vector<nn::Tensor> windows;
  windows.reserve(samples.size());
  nn::Tensor targets({samples.size(), 1});
  for (std::size_t i = 0; i < samples.size(); ++i) {
    windows.push_back(window_ending_at(data.features[samples[i].engine], samples[i].end_cycle, window));
    targets[i] = samples[i].target;
  }
  nn::Tensor batch = stack_windows(windows);
  if (sigma > 0) add_noise(batch, sigma, rng);
  return {std::move(batch), std::move(targets)};
}

std::pair<double, double> validate_fold(const Predictor& predict, const NormalizedSplit& data,
                                        std::span<const ValidationItem> items, std::size_t window, std::size_t k) {
  if (items.empty()) return {std::nan(""), std::nan("")};
  std::vector<nn::Tensor> windows;
  for (const auto& it : items) {
    for (std::size_t j = 0; j < k; ++j) {
      windows.push_back(window_ending_at(data.features[it.engine], it.end_cycle - static_cast<int>(j), window));
    }
  }
  const auto p = predict(stack_windows(windows));
  std::vector<EvalPair> pairs;
  for (std::size_t i = 0; i < items.size(); ++i) {
    pairs.push_back({corrected_estimate(std::span<const double>(p).subspan(i * k, k)), items[i].truth});
  }
  return {rmse(pairs), phm_score(pairs)};
}

nn::Var batch_objective(const models::Model& model, nn::Tape& tape, const nn::Tensor& windows,
                        const nn::Tensor& targets, const LossWeights& weights, bool training, nn::Rng& rng) {
  models::ForwardOptions opts;
  opts.training = training;
  const auto out = model.forward(tape, tape.constant(windows), opts, rng);
  const nn::Var target = tape.constant(targets);
  if (!uses_block_objective(model.config().arch)) return huber_loss(out.prediction, target, weights.beta);
  nn::Var loss = composite_loss(out.prediction, out.block_predictions, out.block_latents, target, weights);
  for (const auto& skip : out.skip_predictions) {
    loss = nn::add(loss, nn::scale(huber_loss(skip, target, weights.beta), weights.lambda));
  }
  return loss;
}

TrainResult train_model(const TrainConfig& config, const NormalizedSplit& data, const FoldData& fold,
                        std::uint64_t seed, std::size_t epochs, const EpochCallback& on_epoch, const Logger& log) {
  validate(config);
  if (epochs == 0) epochs = config.epochs;
  models::ModelConfig mc = config.model;
  mc.init_seed = seed;
  TrainResult result;
  result.model = models::make_model(mc);
  models::Model& model = *result.model;

  auto params = model.params().all();
  nn::AdamW optimizer(params, nn::AdamWOptions{.weight_decay = config.weight_decay});
  const std::size_t steps_per_epoch = (fold.train.size() + config.batch_size - 1) / config.batch_size;
  const auto half_period =
      static_cast<std::int64_t>(std::max<std::size_t>(1, steps_per_epoch * config.epochs_per_cycle / 2));
  const nn::TriangularCyclicLr schedule(config.lr_min, config.lr_max, half_period, config.lr_amplitude_decay);

  // Independent streams for shuffling/noise and for dropout.
  nn::Rng data_rng(seed * 0x9E3779B97F4A7C15ULL + 1);
  nn::Rng dropout_rng(seed * 0xBF58476D1CE4E5B9ULL + 2);
  std::vector<std::size_t> order(fold.train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<TrainSample> batch_samples;
  std::int64_t step = 0;

  for (std::size_t epoch = 1; epoch <= epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), data_rng);
    double loss_sum = 0.0;
    double lr = 0.0;
    for (std::size_t b = 0; b < steps_per_epoch; ++b) {
      const std::size_t lo = b * config.batch_size;
      const std::size_t hi = std::min(lo + config.batch_size, order.size());
      batch_samples.clear();
      for (std::size_t i = lo; i < hi; ++i) batch_samples.push_back(fold.train[order[i]]);
      auto [windows, targets] = assemble_batch(data, batch_samples, mc.window, config.noise_sigma, data_rng);

      nn::Tape tape;
      optimizer.zero_grad();
      const nn::Var loss = batch_objective(model, tape, windows, targets, config.loss, true, dropout_rng);
      const double value = loss.value()[0];
      if (!std::isfinite(value)) throw TrainingDiverged(epoch, b + 1, "non-finite loss");
      tape.backward(loss);
      const double norm = nn::clip_grad_norm(params, config.clip_norm);
      if (!std::isfinite(norm)) throw TrainingDiverged(epoch, b + 1, "non-finite gradient norm");
      lr = schedule(step++);
      optimizer.step(lr);
      loss_sum += value * static_cast<double>(hi - lo);
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    rec.lr = lr;
    std::tie(rec.val_rmse, rec.val_score) =
        validate_fold(model_predictor(model), data, fold.validation, mc.window, config.eval_k);
    result.history.epochs.push_back(rec);
    if (log) {
      std::ostringstream msg;
      msg << "epoch " << epoch << "/" << epochs << " loss " << rec.train_loss;
      if (!fold.validation.empty()) msg << " val_rmse " << rec.val_rmse << " val_score " << rec.val_score;
      log(msg.str());
    }
    if (on_epoch) on_epoch(rec, model);
  }
  return result;
}

std::vector<double> moving_average(std::span<const double> values, std::size_t width) {
  if (width == 0) throw std::invalid_argument("moving_average: width must be positive");
  const std::size_t half = width / 2;
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(values.size() - 1, i + (width - 1 - half));
    double s = 0.0;
    for (std::size_t j = lo; j <= hi; ++j) s += values[j];
    out[i] = s / static_cast<double>(hi - lo + 1);
  }
  return out;
}

std::size_t select_plateau_epoch(std::span<const double> val_rmse) {
  if (val_rmse.empty()) throw std::invalid_argument("select_plateau_epoch: empty history");
  const auto smooth = moving_average(val_rmse, 5);
  std::size_t best = 0;
  for (std::size_t i = 1; i < smooth.size(); ++i) {
    if (smooth[i] < smooth[best]) best = i;
  }
  return best;
}

std::size_t select_plateau_epoch(const RunHistory& history) {
  std::vector<double> v;
  for (const auto& e : history.epochs) v.push_back(e.val_rmse);
  return select_plateau_epoch(v);
}

std::vector<double> average_predictions(std::span<const std::vector<double>> per_checkpoint) {
  if (per_checkpoint.empty()) throw std::invalid_argument("average_predictions: nothing to average");
  std::vector<double> out(per_checkpoint.front().size(), 0.0);
  for (const auto& p : per_checkpoint) {
    if (p.size() != out.size()) throw std::invalid_argument("average_predictions: ragged inputs");
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += p[i];
  }
  for (auto& v : out) v /= static_cast<double>(per_checkpoint.size());
  return out;
}

std::vector<double> checkpoint_average_predict(models::Model& model, std::span<const nn::Checkpoint> checkpoints,
                                               const NormalizedSplit& test, std::size_t k,
                                               std::size_t min_checkpoints) {
  if (checkpoints.size() < min_checkpoints) {
    throw std::invalid_argument("checkpoint averaging needs " + std::to_string(min_checkpoints) +
                                " checkpoints, got " + std::to_string(checkpoints.size()));
  }
  std::vector<std::vector<double>> per;
  for (const auto& ckpt : checkpoints) {
    nn::restore(model.params(), ckpt);
    const Predictor predict = model_predictor(model);
    std::vector<double> est;
    for (const auto& m : test.features) est.push_back(predict_engine_rul(predict, m, model.config().window, k));
    per.push_back(std::move(est));
  }
  return average_predictions(per);
}

MultiRunReport aggregate_runs(std::vector<SeedOutcome> runs) {
  MultiRunReport r;
  r.runs = std::move(runs);
  std::vector<double> rm, sc;
  for (const auto& o : r.runs) {
    if (o.rmse && o.score) {
      rm.push_back(*o.rmse);
      sc.push_back(*o.score);
    } else {
      r.incomplete = true;
    }
  }
  auto stats = [](const std::vector<double>& v, double& mean, double& sd) {
    if (v.empty()) {
      mean = sd = std::nan("");
      return;
    }
    mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : std::nan("");
  };
  stats(rm, r.rmse_mean, r.rmse_std);
  stats(sc, r.score_mean, r.score_std);
  return r;
}

MultiRunReport multi_run(std::span<const std::uint64_t> seeds,
                         const std::function<std::pair<double, double>(std::uint64_t)>& run_one) {
  if (seeds.size() < 2) throw std::invalid_argument("multi_run needs at least 2 seeds");
  std::vector<SeedOutcome> runs;
  for (auto seed : seeds) {
    SeedOutcome o;
    o.seed = seed;
    try {
      const auto [rm, sc] = run_one(seed);
      o.rmse = rm;
      o.score = sc;
    } catch (const std::exception& e) {
      o.error = e.what();
    }
    runs.push_back(std::move(o));
  }
  return aggregate_runs(std::move(runs));
}

std::string multi_run_to_json(const MultiRunReport& r) {
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& o : r.runs) {
    nlohmann::json j{{"seed", o.seed}};
    j["rmse"] = o.rmse ? nlohmann::json(*o.rmse) : nlohmann::json(nullptr);
    j["score"] = o.score ? nlohmann::json(*o.score) : nlohmann::json(nullptr);
    if (!o.error.empty()) j["error"] = o.error;
    runs.push_back(j);
  }
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  nlohmann::json j{{"runs", runs},
                   {"rmse_mean", num(r.rmse_mean)},
                   {"rmse_std", num(r.rmse_std)},
                   {"score_mean", num(r.score_mean)},
                   {"score_std", num(r.score_std)},
                   {"incomplete", r.incomplete}};
  return j.dump(2) + "\n";
}

namespace {

std::string fmt(double v) {
  if (!std::isfinite(v)) return "";
  std::ostringstream o;
  o << std::setprecision(17) << v;
  return o.str();
}

void append_history(std::ostringstream& out, const std::string& phase, const std::string& fold,
                    const RunHistory& h) {
  for (const auto& e : h.epochs) {
    out << phase << ',' << fold << ',' << e.epoch << ',' << fmt(e.train_loss) << ',' << fmt(e.val_rmse) << ','
        << fmt(e.val_score) << ',' << fmt(e.lr) << '\n';
  }
}

}  // namespace

std::string history_csv(const ProtocolResult& result) {
  std::ostringstream out;
  out << "phase,fold,epoch,train_loss,val_rmse,val_score,lr\n";
  for (std::size_t f = 0; f < result.cv_histories.size(); ++f) {
    append_history(out, "cv", std::to_string(f), result.cv_histories[f]);
  }
  append_history(out, "final", "", result.final_history);
  return out.str();
}

ProtocolResult run_protocol(const TrainConfig& config, std::span<const EngineTrajectory> train,
                            std::span<const EngineTrajectory> test, std::span<const int> test_rul,
                            std::uint64_t seed, const std::optional<std::filesystem::path>& run_dir,
                            const Logger& log) {
  validate(config);
  const std::size_t W = config.model.window;
  const auto stats = fit_normalizer(train);
  const NormalizedSplit train_data = normalize_split(stats, train);
  const NormalizedSplit test_data = normalize_split(stats, test);
  const std::string hash = models::config_hash([&] {
    auto m = config.model;
    m.init_seed = seed;
    return m;
  }());

  if (run_dir) {
    std::filesystem::create_directories(*run_dir / "checkpoints");
    nlohmann::json cfg = config;
    cfg["seed"] = seed;
    atomic_write(*run_dir / "config.json", cfg.dump(2) + "\n");
    atomic_write(*run_dir / "normalization.json", stats_to_text(stats));
  }

  ProtocolResult result;
  std::vector<std::size_t> lengths;
  for (const auto& m : train_data.features) lengths.push_back(m.dim(0));
  nn::Rng split_rng(seed * 0x94D049BB133111EBULL + 3);
  const auto splits = make_cv_splits(train_data.engine_ids, lengths, config.folds, W, split_rng);

  result.mean_val_rmse.assign(config.epochs, 0.0);
  for (const auto& split : splits) {
    if (log) log("cv fold " + std::to_string(split.fold + 1) + "/" + std::to_string(splits.size()));
    const FoldData fold = build_fold(train_data, split, W, config.capped_stride, config.eval_k);
    auto trained = train_model(config, train_data, fold, seed, config.epochs, {}, log);
    for (std::size_t e = 0; e < config.epochs; ++e) {
      result.mean_val_rmse[e] += trained.history.epochs[e].val_rmse / static_cast<double>(splits.size());
    }
    result.cv_histories.push_back(std::move(trained.history));
  }
  result.selected_epoch = select_plateau_epoch(result.mean_val_rmse) + 1;
  if (log) log("selected epoch " + std::to_string(result.selected_epoch));

  // Retrain on every training window and keep the checkpoints of the averaging span.
  const FoldData full = build_fold(train_data, std::nullopt, W, config.capped_stride, config.eval_k);
  const std::size_t last = result.selected_epoch + config.average_epochs - 1;
  auto keep = [&](const EpochRecord& rec, const models::Model& model) {
    if (rec.epoch < result.selected_epoch) return;
    result.averaged_checkpoints.push_back(nn::snapshot(model.params(), hash));
    if (run_dir) {
      std::ostringstream name;
      name << "epoch_" << std::setw(3) << std::setfill('0') << rec.epoch << ".ckpt";
      nn::save_checkpoint(*run_dir / "checkpoints" / name.str(), result.averaged_checkpoints.back());
      result.final_history.checkpoints.push_back("checkpoints/" + name.str());
    }
  };
  if (log) log("final training, " + std::to_string(last) + " epochs");
  auto final_run = train_model(config, train_data, full, seed, last, keep, log);
  final_run.history.checkpoints = result.final_history.checkpoints;
  result.final_history = std::move(final_run.history);

  const auto predicted = checkpoint_average_predict(*final_run.model, result.averaged_checkpoints, test_data,
                                                    config.eval_k, config.average_epochs);
  std::vector<double> truth;
  for (int label : test_rul) truth.push_back(static_cast<double>(std::min(label, kRulCap)));
  if (truth.size() != predicted.size()) throw std::invalid_argument("test labels do not match test trajectories");
  result.report = make_report(config.subset, test_data.engine_ids, predicted, truth);
  result.report.model_manifest = hash;

  if (run_dir) {
    atomic_write(*run_dir / "history.csv", history_csv(result));
    save_report(*run_dir / "report.json", *run_dir / "predictions.csv", result.report);
  }
  return result;
}

std::string manifest_to_json(const RunManifest& m) {
  nlohmann::json j{{"command", m.command},
                   {"config", nlohmann::json::parse(m.config_json.empty() ? "{}" : m.config_json)},
                   {"dataset_hash", m.dataset_hash},
                   {"seeds", m.seeds},
                   {"output_dir", m.output_dir},
                   {"tool_version", m.tool_version},
                   {"data_dir", m.data_dir},
                   {"engines", m.engines},
                   {"strict_counts", m.strict_counts}};
  return j.dump(2) + "\n";
}

RunManifest manifest_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  RunManifest m;
  m.command = j.at("command").get<std::string>();
  m.config_json = j.at("config").dump();
  m.dataset_hash = j.at("dataset_hash").get<std::string>();
  m.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  m.output_dir = j.at("output_dir").get<std::string>();
  m.tool_version = j.at("tool_version").get<std::string>();
  m.data_dir = j.value("data_dir", "");
  m.engines = j.value("engines", std::size_t{0});
  m.strict_counts = j.value("strict_counts", true);
  return m;
}

void write_manifest(const std::filesystem::path& dir, const RunManifest& manifest) {
  const auto path = dir / "manifest.json";
  if (std::filesystem::exists(path)) throw std::runtime_error("manifest already exists: " + path.string());
  std::filesystem::create_directories(dir);
  atomic_write(path, manifest_to_json(manifest));
}

}  // namespace rul
