#include "rul/evaluation.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "rul/io.hpp"
#include "rul/metrics.hpp"
#include "rul/windowing.hpp"

namespace rul {

namespace {

constexpr std::size_t kInferenceChunk = 256;

std::vector<double> predict_all(const Predictor& predict, std::span<const nn::Tensor> windows) {
  std::vector<double> out;
  out.reserve(windows.size());
  for (std::size_t s = 0; s < windows.size(); s += kInferenceChunk) {
    const auto chunk = windows.subspan(s, std::min(kInferenceChunk, windows.size() - s));
    const auto p = predict(stack_windows(chunk));
    if (p.size() != chunk.size()) throw std::logic_error("predictor returned the wrong number of values");
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

}  // namespace

Predictor model_predictor(const models::Model& model, std::vector<bool> zero_mask) {
  return [&model, mask = std::move(zero_mask)](const nn::Tensor& windows) {
    return models::predict_batch(model, windows, mask);
  };
}

nn::Tensor stack_windows(std::span<const nn::Tensor> windows) {
  if (windows.empty()) throw std::invalid_argument("stack_windows: no windows");
  const nn::Shape& s = windows.front().shape();
  if (s.size() != 2) throw std::invalid_argument("stack_windows: windows must be [W, C]");
  nn::Tensor out({windows.size(), s[0], s[1]});
  const std::size_t n = s[0] * s[1];
  for (std::size_t i = 0; i < windows.size(); ++i) {
    if (windows[i].shape() != s) throw std::invalid_argument("stack_windows: mismatched window shapes");
    std::copy_n(windows[i].ptr(), n, out.ptr() + i * n);
  }
  return out;
}

double corrected_estimate(std::span<const double> predictions) {
  if (predictions.empty()) throw std::invalid_argument("corrected_estimate: no predictions");
  double sum = 0.0;
  for (std::size_t j = 0; j < predictions.size(); ++j) sum += predictions[j] - static_cast<double>(j);
  return std::max(0.0, sum / static_cast<double>(predictions.size()));
}

double predict_engine_rul(const Predictor& predict, const nn::Tensor& matrix, std::size_t window, std::size_t k) {
  if (k == 0) throw std::invalid_argument("predict_engine_rul: k must be positive");
  std::vector<nn::Tensor> windows;
  for (auto& s : make_eval_windows_last_k(matrix, 0, window, k)) windows.push_back(std::move(s.features));
  return corrected_estimate(predict_all(predict, windows));
}

std::vector<double> trajectory_curve(const Predictor& predict, const nn::Tensor& matrix, std::size_t window) {
  std::vector<nn::Tensor> windows;
  for (int c = 1; c <= static_cast<int>(matrix.dim(0)); ++c) windows.push_back(window_ending_at(matrix, c, window));
  return predict_all(predict, windows);
}

std::vector<double> ablate_blocks(const models::Model& model, const nn::Tensor& matrix,
                                  const std::vector<bool>& zero_mask) {
  if (zero_mask.size() != model.block_count()) {
    throw std::invalid_argument("mask has " + std::to_string(zero_mask.size()) + " entries but the model has " +
                                std::to_string(model.block_count()) + " blocks");
  }
  return trajectory_curve(model_predictor(model, zero_mask), matrix, model.config().window);
}

EvalReport make_report(const std::string& subset, std::vector<int> engine_ids, std::vector<double> predicted,
                       std::vector<double> truth) {
  if (engine_ids.size() != predicted.size() || predicted.size() != truth.size() || predicted.empty()) {
    throw std::invalid_argument("report needs one prediction and one label per engine");
  }
  std::vector<EvalPair> pairs;
  for (std::size_t i = 0; i < predicted.size(); ++i) pairs.push_back({predicted[i], truth[i]});
  EvalReport r;
  r.subset = subset;
  r.engine_ids = std::move(engine_ids);
  r.predicted = std::move(predicted);
  r.truth = std::move(truth);
  r.rmse = rmse(pairs);
  r.score = phm_score(pairs);
  return r;
}

EvalReport evaluate_subset(const Predictor& predict, const NormalizedSplit& test, std::span<const int> rul_labels,
                           std::size_t window, const std::string& subset, const EvalOptions& options) {
  if (rul_labels.size() != test.features.size()) {
    throw std::invalid_argument("evaluate_subset: " + std::to_string(rul_labels.size()) + " labels for " +
                                std::to_string(test.features.size()) + " trajectories");
  }
  std::vector<double> predicted, truth;
  for (std::size_t i = 0; i < test.features.size(); ++i) {
    predicted.push_back(predict_engine_rul(predict, test.features[i], window, options.k));
    const int label = options.cap_labels ? std::min(rul_labels[i], kRulCap) : rul_labels[i];
    truth.push_back(static_cast<double>(label));
  }
  return make_report(subset, test.engine_ids, std::move(predicted), std::move(truth));
}

std::string report_to_json(const EvalReport& r) {
  nlohmann::json j{{"subset", r.subset},       {"engine_ids", r.engine_ids}, {"predicted", r.predicted},
                   {"truth", r.truth},         {"rmse", r.rmse},             {"score", r.score},
                   {"model_manifest", r.model_manifest}};
  return j.dump(2) + "\n";
}

EvalReport report_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  EvalReport r;
  r.subset = j.at("subset").get<std::string>();
  r.engine_ids = j.at("engine_ids").get<std::vector<int>>();
  r.predicted = j.at("predicted").get<std::vector<double>>();
  r.truth = j.at("truth").get<std::vector<double>>();
  r.rmse = j.at("rmse").get<double>();
  r.score = j.at("score").get<double>();
  r.model_manifest = j.value("model_manifest", "");
  return r;
}

std::string report_to_csv(const EvalReport& r) {
  std::ostringstream out;
  out << std::setprecision(17) << "engine_id,predicted_rul,true_rul\n";
  for (std::size_t i = 0; i < r.engine_ids.size(); ++i) {
    out << r.engine_ids[i] << ',' << r.predicted[i] << ',' << r.truth[i] << '\n';
  }
  return out.str();
}

void save_report(const std::filesystem::path& json_path, const std::filesystem::path& csv_path,
                 const EvalReport& report) {
  atomic_write(json_path, report_to_json(report));
  atomic_write(csv_path, report_to_csv(report));
}

EvalReport load_report(const std::filesystem::path& json_path) { return report_from_json(read_file(json_path)); }

std::vector<double> lowess(std::span<const double> x, std::span<const double> y, double frac) {
  const std::size_t n = x.size();
  if (y.size() != n) throw std::invalid_argument("lowess: x and y differ in length");
  if (n < 3) throw std::invalid_argument("lowess: need at least 3 points");
  if (!(frac > 0.0 && frac <= 1.0)) throw std::invalid_argument("lowess: frac must lie in (0, 1]");
  if (!std::is_sorted(x.begin(), x.end())) throw std::invalid_argument("lowess: x must be sorted");
  const std::size_t k =
      std::clamp<std::size_t>(static_cast<std::size_t>(std::ceil(frac * static_cast<double>(n) - 1e-9)), 1, n);

  std::vector<double> out(n);
  std::size_t left = 0;
  for (std::size_t i = 0; i < n; ++i) {
    // Slide the k-point neighbourhood while that brings it closer to x[i].
    while (left + k < n && x[i] - x[left] > x[left + k] - x[i]) ++left;
    const std::size_t right = left + k - 1;
    const double h = std::max(x[i] - x[left], x[right] - x[i]);
    double sw = 0, sx = 0, sy = 0;
    std::vector<double> w(k);
    for (std::size_t j = left; j <= right; ++j) {
      const double u = h > 0 ? std::abs(x[j] - x[i]) / h : 0.0;
      const double t = u < 1.0 ? 1.0 - u * u * u : 0.0;
      w[j - left] = t * t * t;
      sw += w[j - left];
      sx += w[j - left] * x[j];
      sy += w[j - left] * y[j];
    }
    if (sw <= 0.0) {
      out[i] = y[i];
      continue;
    }
    const double mx = sx / sw, my = sy / sw;
    double sxx = 0, sxy = 0;
    for (std::size_t j = left; j <= right; ++j) {
      sxx += w[j - left] * (x[j] - mx) * (x[j] - mx);
      sxy += w[j - left] * (x[j] - mx) * (y[j] - my);
    }
    // Degenerate spread (all weight on one abscissa) falls back to the weighted mean.
    const double range = x[right] - x[left];
    out[i] = sxx > 1e-12 * range * range * sw && range > 0 ? my + sxy / sxx * (x[i] - mx) : my;
  }
  return out;
}

std::vector<double> lowess_smooth(std::span<const double> curve, double frac) {
  std::vector<double> x(curve.size());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<double>(i);
  return lowess(x, curve, frac);
}

namespace {

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

double nice_step(double span) {
  const double raw = span / 6.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0}) {
    if (raw <= m * mag) return m * mag;
  }
  return 10.0 * mag;
}

}  // namespace

std::string render_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                       std::span<const PlotSeries> series) {
  constexpr double kW = 800, kH = 480, kL = 70, kR = 160, kT = 40, kB = 60;
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& s : series) {
    if (s.x.size() != s.y.size()) throw std::invalid_argument("render_svg: series '" + s.label + "' is ragged");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  }
  if (!(x0 <= x1)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;
  auto px = [&](double v) { return kL + (v - x0) / (x1 - x0) * (kW - kL - kR); };
  auto py = [&](double v) { return kH - kB - (v - y0) / (y1 - y0) * (kH - kT - kB); };

  std::ostringstream o;
  o << std::fixed << std::setprecision(2);
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << kW / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << escape_xml(title) << "</text>\n";
  o << "<rect x=\"" << kL << "\" y=\"" << kT << "\" width=\"" << kW - kL - kR << "\" height=\"" << kH - kT - kB
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (double axis : {0.0, 1.0}) {
    const double lo = axis == 0 ? x0 : y0, hi = axis == 0 ? x1 : y1;
    const double step = nice_step(hi - lo);
    for (double v = std::ceil(lo / step) * step; v <= hi + 1e-9 * step; v += step) {
      if (axis == 0) {
        o << "<line x1=\"" << px(v) << "\" y1=\"" << kH - kB << "\" x2=\"" << px(v) << "\" y2=\"" << kH - kB + 5
          << "\" stroke=\"black\"/><text x=\"" << px(v) << "\" y=\"" << kH - kB + 18 << "\" text-anchor=\"middle\">"
          << std::setprecision(0) << v << std::setprecision(2) << "</text>\n";
      } else {
        o << "<line x1=\"" << kL - 5 << "\" y1=\"" << py(v) << "\" x2=\"" << kL << "\" y2=\"" << py(v)
          << "\" stroke=\"black\"/><text x=\"" << kL - 8 << "\" y=\"" << py(v) + 4 << "\" text-anchor=\"end\">"
          << std::setprecision(0) << v << std::setprecision(2) << "</text>\n";
      }
    }
  }
  o << "<text x=\"" << (kL + kW - kR) / 2 << "\" y=\"" << kH - 15 << "\" text-anchor=\"middle\">" << escape_xml(x_label)
    << "</text>\n";
  o << "<text transform=\"translate(18," << (kT + kH - kB) / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
    << escape_xml(y_label) << "</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    o << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\"";
    if (s.dashed) o << " stroke-dasharray=\"6,4\"";
    o << " points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (std::isfinite(s.x[i]) && std::isfinite(s.y[i])) o << px(s.x[i]) << ',' << py(s.y[i]) << ' ';
    }
    o << "\"/>\n";
    const double ly = kT + 10 + 20 * static_cast<double>(k);
    o << "<line x1=\"" << kW - kR + 10 << "\" y1=\"" << ly << "\" x2=\"" << kW - kR + 35 << "\" y2=\"" << ly
      << "\" stroke=\"" << s.color << "\" stroke-width=\"2\"" << (s.dashed ? " stroke-dasharray=\"6,4\"" : "")
      << "/><text x=\"" << kW - kR + 40 << "\" y=\"" << ly + 4 << "\">" << escape_xml(s.label) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace rul
