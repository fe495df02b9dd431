#pragma once

#include <span>

namespace rul {

struct EvalPair {
  double predicted = 0.0;
  double truth = 0.0;
};

/// Root mean squared error; throws on empty input.
double rmse(std::span<const EvalPair> pairs);

/// Asymmetric PHM'08 score with diff = predicted - truth:
/// exp(-diff/13) - 1 for diff < 0, exp(diff/10) - 1 otherwise, summed over engines.
double phm_score(std::span<const EvalPair> pairs);
double phm_score_term(double diff);

}  // namespace rul
