// Command-line driver: ingest, train, evaluate, ablate, plot, reproduce-table, synth.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include "rul/cmapss.hpp"
#include "rul/evaluation.hpp"
#include "rul/io.hpp"
#include "rul/synthetic.hpp"
#include "rul/training.hpp"

namespace fs = std::filesystem;
using namespace rul;

namespace {

constexpr const char* kToolVersion = "0.1.0";

/// Published RMSE / Score (mean, spread) per model and subset.
struct Published {
  double rmse, rmse_sd, score, score_sd;
};
const std::map<std::pair<std::string, std::string>, Published>& published() {
  static const std::map<std::pair<std::string, std::string>, Published> table{
      {{"cnn", "FD001"}, {14.38, 0, 332, 0}},       {{"cnn", "FD003"}, {15.12, 0, 495, 0}},
      {{"lstm", "FD001"}, {14.88, 0, 400, 0}},      {{"lstm", "FD003"}, {14.75, 0, 382, 0}},
      {{"tfm", "FD001"}, {11.73, 0.09, 215, 5}},    {{"tfm", "FD003"}, {11.64, 0.03, 191, 9}},
      {{"dtfm", "FD001"}, {11.65, 0.07, 210, 6}},   {{"dtfm", "FD003"}, {11.58, 0.03, 204, 6}},
      {{"tfim", "FD001"}, {11.59, 0.08, 208, 3}},   {{"tfim", "FD003"}, {10.9, 0.06, 187, 8}},
  };
  return table;
}

fs::path resolve_data_dir(const std::string& flag, const std::string& fallback = "") {
  if (!flag.empty()) return flag;
  if (auto env = data_root_from_env()) return *env;
  if (!fallback.empty()) return fallback;
  throw std::runtime_error(std::string("no dataset directory: pass --data-dir or set ") + kDataRootEnv);
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    std::size_t used = 0;
    const auto v = std::stoull(tok, &used);
    if (used != tok.size()) throw std::invalid_argument("bad seed '" + tok + "'");
    seeds.push_back(v);
  }
  if (seeds.empty()) throw std::invalid_argument("empty seed list");
  return seeds;
}

std::vector<bool> parse_mask(const std::string& text) {
  std::vector<bool> mask;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok == "0") mask.push_back(false);
    else if (tok == "1") mask.push_back(true);
    else throw std::invalid_argument("mask entries must be 0 or 1, got '" + tok + "'");
  }
  return mask;
}

/// Keeps the first `engines` trajectories of each split (all when 0).
SubsetData restrict_engines(SubsetData d, std::size_t engines) {
  if (engines == 0) return d;
  if (d.train.size() > engines) d.train.resize(engines);
  if (d.test.size() > engines) {
    d.test.resize(engines);
    d.test_rul.resize(engines);
  }
  return d;
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream o;
  o << std::fixed << std::setprecision(precision) << v;
  return o.str();
}

// ---- ingest ---------------------------------------------------------------

struct IngestArgs {
  std::string data_dir, subset = "FD001", out;
  bool lenient = false;
};

int cmd_ingest(const IngestArgs& a) {
  const fs::path root = resolve_data_dir(a.data_dir);
  const SubsetId id = parse_subset_id(a.subset);
  const SubsetData d = load_subset(root, id, false);
  const auto& meta = subset_meta(id);
  std::cout << std::left << std::setw(8) << "split" << std::setw(14) << "trajectories" << std::setw(10) << "rows"
            << "expected\n";
  std::cout << std::setw(8) << "train" << std::setw(14) << d.train.size() << std::setw(10) << total_rows(d.train)
            << meta.train_trajectories << " / " << meta.train_samples << "\n";
  std::cout << std::setw(8) << "test" << std::setw(14) << d.test.size() << std::setw(10) << total_rows(d.test)
            << meta.test_trajectories << " / " << meta.test_samples << "\n";
  if (!a.lenient) {
    check_counts(id, Split::Train, d.train);
    check_counts(id, Split::Test, d.test);
  }
  if (!a.out.empty()) {
    const fs::path out = a.out;
    fs::create_directories(out);
    const auto stats = fit_normalizer(d.train);
    atomic_write(out / "normalization.json", stats_to_text(stats));
    for (auto [name, split] : {std::pair{"train", &d.train}, std::pair{"test", &d.test}}) {
      const auto norm = normalize_split(stats, *split);
      std::ostringstream csv;
      csv << std::setprecision(17) << "engine_id,cycle";
      for (std::size_t k = 1; k <= kSensorCount; ++k) csv << ",s" << k;
      csv << '\n';
      for (std::size_t e = 0; e < norm.features.size(); ++e) {
        const auto& m = norm.features[e];
        for (std::size_t r = 0; r < m.dim(0); ++r) {
          csv << norm.engine_ids[e] << ',' << r + 1;
          for (std::size_t k = 0; k < m.dim(1); ++k) csv << ',' << m.at(r, k);
          csv << '\n';
        }
      }
      atomic_write(out / (std::string(name) + "_normalized.csv"), csv.str());
    }
    nlohmann::json counts{{"subset", a.subset},
                          {"train_trajectories", d.train.size()},
                          {"train_rows", total_rows(d.train)},
                          {"test_trajectories", d.test.size()},
                          {"test_rows", total_rows(d.test)},
                          {"dataset_hash", subset_hash(root, id)}};
    atomic_write(out / "counts.json", counts.dump(2) + "\n");
  }
  return 0;
}

// ---- train ----------------------------------------------------------------

struct TrainArgs {
  std::string data_dir, subset = "FD001", model = "tfim", config, seeds, out;
  std::size_t epochs = 0, engines = 0, folds = 0;
  bool lenient = false;
  bool quiet = false;
};

TrainConfig resolve_config(const TrainArgs& a) {
  TrainConfig c = default_train_config(models::parse_architecture(a.model), parse_subset_id(a.subset));
  if (!a.config.empty()) {
    // A config file may not override the model or subset chosen on the command line.
    auto j = nlohmann::json::parse(read_file(a.config));
    if (j.contains("model")) j["model"]["arch"] = a.model;
    j["subset"] = a.subset;
    from_json(j, c);
  }
  if (!a.seeds.empty()) c.seeds = parse_seeds(a.seeds);
  if (a.epochs) c.epochs = a.epochs;
  if (a.folds) c.folds = a.folds;
  validate(c);
  return c;
}

Logger make_logger(bool quiet) {
  if (quiet) return {};
  return [](const std::string& line) { std::cerr << line << '\n'; };
}

/// Runs the protocol for every seed into <out>/seed_<s>; returns the aggregate.
MultiRunReport train_all(const TrainArgs& a, const TrainConfig& c, const std::string& command) {
  const fs::path root = resolve_data_dir(a.data_dir);
  const SubsetId id = parse_subset_id(a.subset);
  const SubsetData d = restrict_engines(load_subset(root, id, !a.lenient), a.engines);
  const fs::path out = a.out;
  RunManifest m;
  m.command = command;
  m.config_json = nlohmann::json(c).dump();
  m.dataset_hash = subset_hash(root, id);
  m.seeds = c.seeds;
  m.output_dir = out.string();
  m.tool_version = kToolVersion;
  m.data_dir = fs::absolute(root).string();
  m.engines = a.engines;
  m.strict_counts = !a.lenient;
  write_manifest(out, m);

  const Logger log = make_logger(a.quiet);
  std::vector<SeedOutcome> outcomes;
  for (auto seed : c.seeds) {
    SeedOutcome o;
    o.seed = seed;
    try {
      if (log) log("seed " + std::to_string(seed));
      const auto r = run_protocol(c, d.train, d.test, d.test_rul, seed, out / ("seed_" + std::to_string(seed)), log);
      o.rmse = r.report.rmse;
      o.score = r.report.score;
      std::cout << "seed " << seed << ": epoch " << r.selected_epoch << ", RMSE " << fmt(r.report.rmse)
                << ", Score " << fmt(r.report.score) << "\n";
    } catch (const TrainingDiverged& e) {
      if (c.seeds.size() < 2) throw;
      o.error = e.what();
      std::cerr << "seed " << seed << " aborted: " << e.what() << '\n';
    }
    outcomes.push_back(std::move(o));
  }
  const auto report = aggregate_runs(std::move(outcomes));
  if (c.seeds.size() >= 2) {
    atomic_write(out / "aggregate.json", multi_run_to_json(report));
    std::cout << "RMSE " << fmt(report.rmse_mean) << " +- " << fmt(report.rmse_std) << ", Score "
              << fmt(report.score_mean) << " +- " << fmt(report.score_std)
              << (report.incomplete ? " (incomplete)" : "") << "\n";
  }
  return report;
}

int cmd_train(const TrainArgs& a, const std::string& command) {
  const auto report = train_all(a, resolve_config(a), command);
  return report.incomplete ? 1 : 0;
}

// ---- loading a trained run ------------------------------------------------

struct LoadedRun {
  fs::path dir;
  TrainConfig config;
  std::uint64_t seed = 0;
  std::unique_ptr<models::Model> model;
  NormalizationStats stats;
  std::vector<nn::Checkpoint> checkpoints;
};

/// Seed directories of a run: the directory itself or its seed_* children.
std::vector<fs::path> seed_dirs(const fs::path& run_dir) {
  if (fs::exists(run_dir / "config.json")) return {run_dir};
  std::vector<fs::path> dirs;
  if (fs::is_directory(run_dir)) {
    for (const auto& e : fs::directory_iterator(run_dir)) {
      if (e.is_directory() && e.path().filename().string().starts_with("seed_") &&
          fs::exists(e.path() / "config.json")) {
        dirs.push_back(e.path());
      }
    }
  }
  std::sort(dirs.begin(), dirs.end());
  if (dirs.empty()) throw std::runtime_error("no trained run found in " + run_dir.string());
  return dirs;
}

std::optional<RunManifest> find_manifest(const fs::path& dir) {
  for (fs::path p = fs::absolute(dir); !p.empty(); p = p.parent_path()) {
    if (fs::exists(p / "manifest.json")) return manifest_from_json(read_file(p / "manifest.json"));
    if (p == p.parent_path()) break;
  }
  return std::nullopt;
}

LoadedRun load_run(const fs::path& dir) {
  LoadedRun run;
  run.dir = dir;
  const auto j = nlohmann::json::parse(read_file(dir / "config.json"));
  from_json(j, run.config);
  run.seed = j.at("seed").get<std::uint64_t>();
  auto mc = run.config.model;
  mc.init_seed = run.seed;
  run.model = models::make_model(mc);
  run.stats = stats_from_text(read_file(dir / "normalization.json"));
  std::vector<fs::path> files;
  if (fs::is_directory(dir / "checkpoints")) {
    for (const auto& e : fs::directory_iterator(dir / "checkpoints")) {
      if (e.path().extension() == ".ckpt") files.push_back(e.path());
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw std::runtime_error("no checkpoints in " + (dir / "checkpoints").string());
  const std::string hash = models::config_hash(mc);
  for (const auto& f : files) {
    auto ckpt = nn::load_checkpoint(f);
    if (ckpt.config_hash != hash) throw std::runtime_error(f.string() + " was produced by a different config");
    run.checkpoints.push_back(std::move(ckpt));
  }
  return run;
}

struct DataArgs {
  std::string data_dir, subset;
};

SubsetData load_for_run(const LoadedRun& run, const DataArgs& a, NormalizedSplit& test_out) {
  const auto manifest = find_manifest(run.dir);
  const fs::path root = resolve_data_dir(a.data_dir, manifest ? manifest->data_dir : "");
  const std::string subset = a.subset.empty() ? run.config.subset : a.subset;
  SubsetData d = load_subset(root, parse_subset_id(subset), manifest ? manifest->strict_counts : true);
  d = restrict_engines(std::move(d), manifest ? manifest->engines : 0);
  test_out = normalize_split(run.stats, d.test);
  return d;
}

std::size_t engine_index(const NormalizedSplit& test, int engine_id) {
  for (std::size_t i = 0; i < test.engine_ids.size(); ++i) {
    if (test.engine_ids[i] == engine_id) return i;
  }
  throw std::invalid_argument("unknown test engine " + std::to_string(engine_id));
}

/// Per-cycle curve averaged over the run's checkpoints.
std::vector<double> averaged_curve(LoadedRun& run, const nn::Tensor& matrix, const std::vector<bool>& mask) {
  std::vector<std::vector<double>> curves;
  for (const auto& ckpt : run.checkpoints) {
    nn::restore(run.model->params(), ckpt);
    curves.push_back(mask.empty() ? trajectory_curve(model_predictor(*run.model), matrix, run.config.model.window)
                                  : ablate_blocks(*run.model, matrix, mask));
  }
  return average_predictions(curves);
}

std::vector<double> true_curve(std::size_t observed, int rul_at_end) {
  std::vector<double> t(observed);
  for (std::size_t c = 1; c <= observed; ++c) {
    t[c - 1] = std::min<double>(kRulCap, static_cast<double>(observed - c) + rul_at_end);
  }
  return t;
}

std::vector<double> cycles(std::size_t n) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = static_cast<double>(i + 1);
  return x;
}

// ---- evaluate / ablate / plot ---------------------------------------------

int cmd_evaluate(const std::string& run_dir, const DataArgs& a) {
  for (const auto& dir : seed_dirs(run_dir)) {
    LoadedRun run = load_run(dir);
    NormalizedSplit test;
    const SubsetData d = load_for_run(run, a, test);
    const auto predicted =
        checkpoint_average_predict(*run.model, run.checkpoints, test, run.config.eval_k, run.checkpoints.size());
    std::vector<double> truth;
    for (int l : d.test_rul) truth.push_back(std::min(l, kRulCap));
    EvalReport r = make_report(a.subset.empty() ? run.config.subset : a.subset, test.engine_ids, predicted, truth);
    r.model_manifest = run.checkpoints.front().config_hash;
    save_report(dir / "evaluation.json", dir / "evaluation.csv", r);
    std::cout << dir.filename().string() << ": RMSE " << fmt(r.rmse) << ", Score " << fmt(r.score) << "\n";
  }
  return 0;
}

struct CurveArgs {
  std::string run_dir;
  DataArgs data;
  int engine = 0;
  std::string mask;
  double smooth = 0.0;
};

int cmd_ablate(const CurveArgs& a) {
  LoadedRun run = load_run(seed_dirs(a.run_dir).front());
  const auto mask = parse_mask(a.mask);
  if (mask.size() != run.model->block_count()) {
    throw std::invalid_argument("--mask needs " + std::to_string(run.model->block_count()) + " entries for " +
                                to_string(run.config.model.arch));
  }
  NormalizedSplit test;
  const SubsetData d = load_for_run(run, a.data, test);
  const std::size_t i = engine_index(test, a.engine);
  const auto base = averaged_curve(run, test.features[i], {});
  const auto masked = averaged_curve(run, test.features[i], mask);
  const auto truth = true_curve(base.size(), d.test_rul[i]);

  std::string tag = a.mask;
  std::replace(tag.begin(), tag.end(), ',', '-');
  const std::string stem = "ablation_engine" + std::to_string(a.engine) + "_mask" + tag;
  std::ostringstream csv;
  csv << std::setprecision(17) << "cycle,true_rul,unmasked,masked\n";
  for (std::size_t c = 0; c < base.size(); ++c) {
    csv << c + 1 << ',' << truth[c] << ',' << base[c] << ',' << masked[c] << '\n';
  }
  atomic_write(run.dir / (stem + ".csv"), csv.str());
  const auto x = cycles(base.size());
  const std::vector<PlotSeries> series{{"true RUL", x, truth, "#000000", true},
                                       {"all blocks", x, base, "#1f77b4", false},
                                       {"mask " + a.mask, x, masked, "#d62728", false}};
  atomic_write(run.dir / (stem + ".svg"),
               render_svg("Engine " + std::to_string(a.engine) + " block ablation", "cycle", "RUL", series));
  std::cout << (run.dir / (stem + ".csv")).string() << "\n";
  return 0;
}

int cmd_plot(const CurveArgs& a) {
  LoadedRun run = load_run(seed_dirs(a.run_dir).front());
  NormalizedSplit test;
  const SubsetData d = load_for_run(run, a.data, test);
  const std::size_t i = engine_index(test, a.engine);
  const auto pred = averaged_curve(run, test.features[i], {});
  const auto truth = true_curve(pred.size(), d.test_rul[i]);
  std::vector<double> smoothed;
  if (a.smooth > 0) smoothed = lowess_smooth(pred, a.smooth);

  const std::string stem = "curve_engine" + std::to_string(a.engine);
  std::ostringstream csv;
  csv << std::setprecision(17) << "cycle,true_rul,predicted,abs_error" << (smoothed.empty() ? "" : ",smoothed") << '\n';
  for (std::size_t c = 0; c < pred.size(); ++c) {
    csv << c + 1 << ',' << truth[c] << ',' << pred[c] << ',' << std::abs(pred[c] - truth[c]);
    if (!smoothed.empty()) csv << ',' << smoothed[c];
    csv << '\n';
  }
  atomic_write(run.dir / (stem + ".csv"), csv.str());
  const auto x = cycles(pred.size());
  std::vector<PlotSeries> series{{"true RUL", x, truth, "#000000", true}, {"predicted", x, pred, "#1f77b4", false}};
  if (!smoothed.empty()) series.push_back({"LOWESS frac " + fmt(a.smooth, 2), x, smoothed, "#ff7f0e", false});
  const double ae = std::abs(pred.back() - truth.back());
  atomic_write(run.dir / (stem + ".svg"),
               render_svg("Engine " + std::to_string(a.engine) + " (AE at last cycle " + fmt(ae, 2) + ")", "cycle",
                          "RUL", series));
  std::cout << (run.dir / (stem + ".csv")).string() << "\n";
  return 0;
}

// ---- reproduce-table ------------------------------------------------------

int cmd_reproduce(TrainArgs a, int table, const std::string& command) {
  const auto arch = models::parse_architecture(a.model);
  const bool baseline = arch == models::Architecture::Lstm || arch == models::Architecture::Cnn;
  if ((table == 3) != baseline) {
    throw std::invalid_argument("table " + std::to_string(table) + " has no row for " + a.model);
  }
  TrainConfig c = resolve_config(a);
  if (c.seeds.size() < 2) throw std::invalid_argument("reproduce-table needs at least 2 seeds");
  const auto report = train_all(a, c, command);
  const auto it = published().find({a.model, a.subset});
  if (it != published().end()) {
    const auto& p = it->second;
    std::cout << "published: RMSE " << fmt(p.rmse, 2) << " +- " << fmt(p.rmse_sd, 2) << ", Score " << fmt(p.score, 0)
              << " +- " << fmt(p.score_sd, 0) << "\n";
    std::cout << "difference: RMSE " << std::showpos << fmt(report.rmse_mean - p.rmse, 2) << ", Score "
              << fmt(report.score_mean - p.score, 1) << std::noshowpos << "\n";
  }
  return report.incomplete ? 1 : 0;
}

// ---- synth ----------------------------------------------------------------

int cmd_synth(const std::string& out, const std::string& subset, const SyntheticFleetOptions& opts) {
  write_fleet(out, parse_subset_id(subset), make_synthetic_fleet(opts));
  std::cout << "wrote " << subset << " fleet to " << out << "\n";
  return 0;
}

std::string joined_args(int argc, char** argv) {
  std::string s;
  for (int i = 0; i < argc; ++i) s += (i ? " " : "") + std::string(argv[i]);
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Remaining-useful-life pipeline for the C-MAPSS turbofan data"};
  app.require_subcommand(1);
  const std::string command = joined_args(argc, argv);
  std::function<int()> run;

  IngestArgs ingest;
  auto* ing = app.add_subcommand("ingest", "Parse a subset, check its counts, optionally cache normalized data");
  ing->add_option("--data-dir", ingest.data_dir, "Dataset directory (default: $CMAPSS_DATA_DIR)");
  ing->add_option("--subset", ingest.subset, "FD001..FD004")->capture_default_str();
  ing->add_option("--out", ingest.out, "Write normalized CSVs and stats here");
  ing->add_flag("--lenient", ingest.lenient, "Do not require the published counts");
  ing->callback([&] { run = [&] { return cmd_ingest(ingest); }; });

  TrainArgs train;
  auto add_train_flags = [&](CLI::App* cmd, TrainArgs& t) {
    cmd->add_option("--data-dir", t.data_dir, "Dataset directory (default: $CMAPSS_DATA_DIR)");
    cmd->add_option("--subset", t.subset, "FD001..FD004")->capture_default_str();
    cmd->add_option("--model", t.model, "lstm, cnn, tfm, dtfm or tfim")->capture_default_str();
    cmd->add_option("--config", t.config, "JSON config file; flags take precedence");
    cmd->add_option("--epochs", t.epochs, "Override the epoch count");
    cmd->add_option("--engines", t.engines, "Use only the first N engines of each split");
    cmd->add_option("--folds", t.folds, "Override the number of CV folds");
    cmd->add_option("--out", t.out, "Output run directory")->required();
    cmd->add_flag("--lenient", t.lenient, "Do not require the published counts");
    cmd->add_flag("--quiet", t.quiet, "No per-epoch progress on stderr");
  };
  auto* tr = app.add_subcommand("train", "Cross-validate, retrain and evaluate one model");
  add_train_flags(tr, train);
  tr->add_option("--seed", train.seeds, "Seed or comma-separated seed list");
  tr->callback([&] { run = [&] { return cmd_train(train, command); }; });

  std::string run_dir;
  DataArgs data;
  auto* ev = app.add_subcommand("evaluate", "Evaluate the checkpoint-averaged model on the test split");
  ev->add_option("--run-dir", run_dir, "Run directory")->required();
  ev->add_option("--data-dir", data.data_dir, "Dataset directory");
  ev->add_option("--subset", data.subset, "Evaluate on another subset");
  ev->callback([&] { run = [&] { return cmd_evaluate(run_dir, data); }; });

  CurveArgs curve;
  auto* ab = app.add_subcommand("ablate", "Prediction curve with selected blocks zeroed");
  ab->add_option("--run-dir", curve.run_dir, "Run directory")->required();
  ab->add_option("--data-dir", curve.data.data_dir, "Dataset directory");
  ab->add_option("--engine", curve.engine, "Test engine id")->required();
  ab->add_option("--mask", curve.mask, "Comma-separated 0/1 per block, e.g. 0,0,1")->required();
  ab->callback([&] { run = [&] { return cmd_ablate(curve); }; });

  auto* pl = app.add_subcommand("plot", "Per-cycle prediction curve of one test engine");
  pl->add_option("--run-dir", curve.run_dir, "Run directory")->required();
  pl->add_option("--data-dir", curve.data.data_dir, "Dataset directory");
  pl->add_option("--engine", curve.engine, "Test engine id")->required();
  pl->add_option("--smooth", curve.smooth, "Add a LOWESS curve with this frac");
  pl->callback([&] { run = [&] { return cmd_plot(curve); }; });

  TrainArgs repro;
  repro.seeds = "1,2,3,4,5";
  int table = 4;
  auto* rp = app.add_subcommand("reproduce-table", "Multi-seed run of one results-table row");
  add_train_flags(rp, repro);
  rp->add_option("--table", table, "3 (baselines) or 4 (block models)")->check(CLI::IsMember({3, 4}));
  rp->add_option("--seeds", repro.seeds, "Comma-separated seed list")->capture_default_str();
  rp->callback([&] { run = [&] { return cmd_reproduce(repro, table, command); }; });

  std::string synth_out, synth_subset = "FD001";
  SyntheticFleetOptions synth;
  auto* sy = app.add_subcommand("synth", "Write a synthetic fleet in the dataset file layout");
  sy->add_option("--out", synth_out, "Output directory")->required();
  sy->add_option("--subset", synth_subset, "File-name subset id")->capture_default_str();
  sy->add_option("--train-engines", synth.train_engines)->capture_default_str();
  sy->add_option("--test-engines", synth.test_engines)->capture_default_str();
  sy->add_option("--seed", synth.seed)->capture_default_str();
  sy->callback([&] { run = [&] { return cmd_synth(synth_out, synth_subset, synth); }; });

  CLI11_PARSE(app, argc, argv);
  try {
    return run();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
