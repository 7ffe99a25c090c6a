#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "kgflow/common.hpp"
#include "kgflow/model.hpp"

namespace kgflow {

// Piecewise-constant learning rate. Each phase is (last epoch, rate); epochs
// are 1-based and a phase covers (previous last epoch, last epoch].
struct LrSchedule {
  std::vector<std::pair<std::size_t, double>> phases = {{100, 0.1}, {700, 0.01}, {1000, 0.001}};

  std::size_t total_epochs() const { return phases.empty() ? 0 : phases.back().first; }

  double at(std::size_t epoch) const {
    if (epoch < 1 || epoch > total_epochs()) {
      throw Error("epoch " + std::to_string(epoch) + " outside [1, " +
                  std::to_string(total_epochs()) + "]");
    }
    for (const auto& [last, lr] : phases) {
      if (epoch <= last) return lr;
    }
    return phases.back().second;
  }

  // Same rates with every phase boundary scaled to `epochs` total.
  LrSchedule scaled_to(std::size_t epochs) const {
    LrSchedule s;
    s.phases.clear();
    const double ratio = static_cast<double>(epochs) / static_cast<double>(total_epochs());
    for (const auto& [last, lr] : phases) {
      s.phases.emplace_back(static_cast<std::size_t>(std::llround(static_cast<double>(last) * ratio)), lr);
    }
    s.phases.back().first = epochs;
    return s;
  }
};

// 0.1 for epochs 1-100, 0.01 for 101-700, 0.001 for 701-1000.
inline double lr_at_epoch(std::size_t epoch) { return LrSchedule{}.at(epoch); }

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0005;
  // Decay applies to encoder and decoder weights; initial embeddings only
  // when this is set.
  bool decay_embeddings = false;
};

struct AdamState {
  AdamConfig config;
  std::vector<double> m;
  std::vector<double> v;
  std::size_t step = 0;

  AdamState() = default;
  AdamState(AdamConfig cfg, std::size_t size) : config(cfg), m(size, 0.0), v(size, 0.0) {}
};

// One Adam update with L2 decay folded into the gradient (g + lambda * theta)
// and bias-corrected moments. Frozen embedding rows are skipped.
inline void adam_step(ModelParams& params, const ModelParams& gradients, AdamState& state, double lr) {
  if (gradients.size() != params.size()) throw Error("adam_step: gradient shape mismatch");
  if (state.m.empty() && state.v.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw Error("adam_step: optimizer state shape mismatch");
  }
  const AdamConfig& c = state.config;
  ++state.step;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  auto theta = params.values();
  const auto g_raw = gradients.values();
  for (std::size_t k = 0; k < theta.size(); ++k) {
    if (!params.trainable(k)) continue;
    const bool decayed = c.decay_embeddings || k >= params.embedding_size();
    const double g = g_raw[k] + (decayed ? c.weight_decay * theta[k] : 0.0);
    state.m[k] = c.beta1 * state.m[k] + (1.0 - c.beta1) * g;
    state.v[k] = c.beta2 * state.v[k] + (1.0 - c.beta2) * g * g;
    const double m_hat = state.m[k] / bc1;
    const double v_hat = state.v[k] / bc2;
    theta[k] -= lr * m_hat / (std::sqrt(v_hat) + c.epsilon);
  }
}

inline void adam_step(ModelParams& params, const ModelParams& gradients, AdamState& state,
                      const LrSchedule& schedule, std::size_t epoch) {
  adam_step(params, gradients, state, schedule.at(epoch));
}

}  // namespace kgflow
