#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <span>
#include <string>

#include "kgflow/clinical.hpp"
#include "kgflow/training.hpp"

namespace kgflow {

// Per care action correct/total counts for one or more realizations.
struct EvalReport {
  std::array<std::size_t, kCareActionCount> correct{};
  std::array<std::size_t, kCareActionCount> total{};
  std::size_t realizations = 1;
  std::string fingerprint;

  std::size_t correct_sum() const {
    std::size_t s = 0;
    for (auto c : correct) s += c;
    return s;
  }
  std::size_t total_sum() const {
    std::size_t s = 0;
    for (auto t : total) s += t;
    return s;
  }

  // Total correct over total predictions; NaN when there are none.
  double micro() const {
    const std::size_t t = total_sum();
    return t ? static_cast<double>(correct_sum()) / static_cast<double>(t)
             : std::numeric_limits<double>::quiet_NaN();
  }

  double accuracy(CareAction a) const {
    const auto k = index_of(a);
    return total[k] ? static_cast<double>(correct[k]) / static_cast<double>(total[k])
                    : std::numeric_limits<double>::quiet_NaN();
  }

  EvalReport& operator+=(const EvalReport& o) {
    for (std::size_t k = 0; k < kCareActionCount; ++k) {
      correct[k] += o.correct[k];
      total[k] += o.total[k];
    }
    realizations += o.realizations;
    return *this;
  }
};

inline EvalReport evaluate_predictions(std::span<const Prediction> predictions,
                                       const std::map<std::string, CareAction>& truth) {
  EvalReport r;
  for (const auto& p : predictions) {
    const auto it = truth.find(p.encounter);
    if (it == truth.end()) throw Error("no ground truth for encounter '" + p.encounter + "'");
    const auto k = index_of(it->second);
    ++r.total[k];
    if (p.predicted == it->second) ++r.correct[k];
  }
  return r;
}

// Ground truth taken from each prediction's own truth field.
inline EvalReport evaluate_predictions(std::span<const Prediction> predictions) {
  std::map<std::string, CareAction> truth;
  for (const auto& p : predictions) {
    if (p.truth) truth[p.encounter] = *p.truth;
  }
  return evaluate_predictions(predictions, truth);
}

}  // namespace kgflow
