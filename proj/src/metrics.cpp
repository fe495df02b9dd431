#include "rul/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace rul {

double rmse(std::span<const EvalPair> pairs) {
  if (pairs.empty()) throw std::invalid_argument("rmse: no prediction pairs");
  double sq = 0.0;
  for (const auto& p : pairs) {
    const double d = p.predicted - p.truth;
    sq += d * d;
  }
  return std::sqrt(sq / static_cast<double>(pairs.size()));
}

double phm_score_term(double diff) {
  return diff < 0.0 ? std::exp(-diff / 13.0) - 1.0 : std::exp(diff / 10.0) - 1.0;
}

double phm_score(std::span<const EvalPair> pairs) {
  if (pairs.empty()) throw std::invalid_argument("phm_score: no prediction pairs");
  double s = 0.0;
  for (const auto& p : pairs) s += phm_score_term(p.predicted - p.truth);
  return s;
}

}  // namespace rul
