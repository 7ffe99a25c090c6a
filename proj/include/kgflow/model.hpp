#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "kgflow/common.hpp"
#include "kgflow/connectivity.hpp"
#include "kgflow/knowledge_graph.hpp"

namespace kgflow {

struct ModelDims {
  std::size_t nodes = 0;
  std::size_t dim = 0;
  std::size_t layers = 0;
  std::size_t message_relations = 0;
  std::size_t relations = 0;

  bool operator==(const ModelDims&) const = default;
};

// All trainable state in one flat buffer:
//
//   [ e0: nodes x dim ]
//   [ layer 0: W_self, W_rel[0..P) ] ... [ layer L-1: ... ]   (dim x dim each)
//   [ decoder: relations x dim ]                               (DistMult diagonals)
//
// Weight matrices are row-major and map an input vector x to W x. Rows of e0
// that belong to frozen node types are zero and never updated.
class ModelParams {
 public:
  ModelParams() = default;

  ModelParams(ModelDims dims, std::vector<bool> frozen_rows)
      : dims_(dims), frozen_(std::move(frozen_rows)) {
    if (frozen_.size() != dims_.nodes) throw Error("frozen mask size does not match node count");
    values_.assign(decoder_offset() + dims_.relations * dims_.dim, 0.0);
  }

  const ModelDims& dims() const { return dims_; }
  std::size_t size() const { return values_.size(); }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  bool frozen_row(NodeId i) const { return frozen_[i]; }
  const std::vector<bool>& frozen_rows() const { return frozen_; }
  bool trainable(std::size_t index) const {
    return index >= embedding_size() || !frozen_[index / dims_.dim];
  }

  std::span<double> embedding(NodeId i) { return {values_.data() + i * dims_.dim, dims_.dim}; }
  std::span<const double> embedding(NodeId i) const {
    return {values_.data() + i * dims_.dim, dims_.dim};
  }
  const double* self_weight(std::size_t layer) const { return values_.data() + self_offset(layer); }
  double* self_weight(std::size_t layer) { return values_.data() + self_offset(layer); }
  const double* relation_weight(std::size_t layer, std::size_t rho) const {
    return values_.data() + self_offset(layer) + (1 + rho) * dims_.dim * dims_.dim;
  }
  double* relation_weight(std::size_t layer, std::size_t rho) {
    return values_.data() + self_offset(layer) + (1 + rho) * dims_.dim * dims_.dim;
  }
  std::span<const double> decoder(RelationId r) const {
    return {values_.data() + decoder_offset() + r * dims_.dim, dims_.dim};
  }
  std::span<double> decoder(RelationId r) {
    return {values_.data() + decoder_offset() + r * dims_.dim, dims_.dim};
  }

  std::size_t embedding_size() const { return dims_.nodes * dims_.dim; }
  std::size_t self_offset(std::size_t layer) const {
    return embedding_size() + layer * (dims_.message_relations + 1) * dims_.dim * dims_.dim;
  }
  std::size_t decoder_offset() const { return self_offset(dims_.layers); }

  // Human-readable name of a scalar, e.g. "W_rel[layer 1][rel 3][2,0]".
  std::string describe(std::size_t index) const {
    const std::size_t d = dims_.dim;
    if (index < embedding_size()) {
      return "e0[node " + std::to_string(index / d) + "][" + std::to_string(index % d) + "]";
    }
    if (index < decoder_offset()) {
      const std::size_t block = (index - embedding_size()) / (d * d);
      const std::size_t within = (index - embedding_size()) % (d * d);
      const std::size_t layer = block / (dims_.message_relations + 1);
      const std::size_t slot = block % (dims_.message_relations + 1);
      const std::string cell = "[" + std::to_string(within / d) + "," + std::to_string(within % d) + "]";
      if (slot == 0) return "W_self[layer " + std::to_string(layer) + "]" + cell;
      return "W_rel[layer " + std::to_string(layer) + "][rel " + std::to_string(slot - 1) + "]" + cell;
    }
    const std::size_t off = index - decoder_offset();
    return "w_dec[rel " + std::to_string(off / d) + "][" + std::to_string(off % d) + "]";
  }

  ModelParams zeros_like() const {
    ModelParams z = *this;
    std::fill(z.values_.begin(), z.values_.end(), 0.0);
    return z;
  }

  // Copy with `extra` additional zero, frozen embedding rows appended.
  ModelParams with_extra_nodes(std::size_t extra) const {
    ModelDims dims = dims_;
    dims.nodes += extra;
    std::vector<bool> frozen = frozen_;
    frozen.resize(dims.nodes, true);
    ModelParams out(dims, std::move(frozen));
    std::copy(values_.begin(), values_.begin() + static_cast<std::ptrdiff_t>(embedding_size()),
              out.values_.begin());
    std::copy(values_.begin() + static_cast<std::ptrdiff_t>(embedding_size()), values_.end(),
              out.values_.begin() + static_cast<std::ptrdiff_t>(out.embedding_size()));
    return out;
  }

  bool operator==(const ModelParams&) const = default;

 private:
  ModelDims dims_;
  std::vector<bool> frozen_;
  std::vector<double> values_;
};

// Initial embeddings and all weights uniform on [-1/sqrt(d), 1/sqrt(d)];
// rows of the frozen node types are zero.
inline ModelParams init_params(const Schema& schema, const std::vector<TypeId>& node_types,
                               std::size_t dim, std::size_t layers, std::size_t message_relations,
                               std::uint64_t seed, const std::vector<std::string>& frozen_types) {
  if (dim < 1) throw Error("embedding size must be at least 1");
  if (layers < 1) throw Error("layer count must be at least 1");
  std::vector<bool> frozen_type(schema.node_type_count(), false);
  for (const auto& name : frozen_types) {
    const auto t = schema.find_node_type(name);
    if (!t) throw Error("frozen type '" + name + "' is not a node type of the schema");
    frozen_type[*t] = true;
  }
  std::vector<bool> frozen_rows(node_types.size());
  for (std::size_t i = 0; i < node_types.size(); ++i) frozen_rows[i] = frozen_type.at(node_types[i]);

  ModelParams params({node_types.size(), dim, layers, message_relations, schema.relation_count()},
                     std::move(frozen_rows));
  Rng rng(seed);
  const double a = 1.0 / std::sqrt(static_cast<double>(dim));
  auto values = params.values();
  for (std::size_t k = 0; k < values.size(); ++k) {
    values[k] = params.trainable(k) ? rng.uniform(-a, a) : 0.0;
  }
  return params;
}

// Per-layer pre-activations and outputs. out[0] is e0, out[L] the final
// embedding fed to the decoder. Each matrix is nodes x dim, row-major.
struct LayerActivations {
  std::size_t nodes = 0;
  std::size_t dim = 0;
  std::vector<std::vector<double>> pre;
  std::vector<std::vector<double>> out;

  std::span<const double> final_embedding(NodeId i) const {
    return {out.back().data() + i * dim, dim};
  }
};

namespace detail {

// y += alpha * W x   (W is d x d row-major)
inline void gemv_acc(const double* w, const double* x, double alpha, double* y, std::size_t d) {
  for (std::size_t a = 0; a < d; ++a) {
    double s = 0.0;
    for (std::size_t b = 0; b < d; ++b) s += w[a * d + b] * x[b];
    y[a] += alpha * s;
  }
}

// y += alpha * W^T g
inline void gemv_t_acc(const double* w, const double* g, double alpha, double* y, std::size_t d) {
  for (std::size_t a = 0; a < d; ++a) {
    const double ga = alpha * g[a];
    for (std::size_t b = 0; b < d; ++b) y[b] += w[a * d + b] * ga;
  }
}

// G += alpha * g x^T
inline void outer_acc(const double* g, const double* x, double alpha, double* out, std::size_t d) {
  for (std::size_t a = 0; a < d; ++a) {
    const double ga = alpha * g[a];
    for (std::size_t b = 0; b < d; ++b) out[a * d + b] += ga * x[b];
  }
}

inline void check_dims(const ModelParams& params, const MessageGraph& mg) {
  const auto& dims = params.dims();
  if (mg.node_count() != dims.nodes) {
    throw Error("message graph has " + std::to_string(mg.node_count()) + " nodes, model has " +
                std::to_string(dims.nodes));
  }
  if (mg.relation_count() != dims.message_relations) {
    throw Error("message graph has " + std::to_string(mg.relation_count()) +
                " message relations, model has " + std::to_string(dims.message_relations));
  }
}

}  // namespace detail

// Relational graph convolution:
//   pre_i = W_self e_i + sum_{(j -rho-> i)} W_rho e_j / c[i, rho]
//   e'    = relu(pre) between layers, identity after the last layer.
// Messages are accumulated in the graph's canonical edge order.
inline LayerActivations encoder_forward(const ModelParams& params, const MessageGraph& mg) {
  detail::check_dims(params, mg);
  const auto& dims = params.dims();
  const std::size_t n = dims.nodes;
  const std::size_t d = dims.dim;
  LayerActivations act{n, d, {}, {}};
  act.out.emplace_back(params.values().begin(), params.values().begin() + static_cast<std::ptrdiff_t>(n * d));

  for (std::size_t l = 0; l < dims.layers; ++l) {
    const std::vector<double>& x = act.out.back();
    std::vector<double> pre(n * d, 0.0);
    const double* w_self = params.self_weight(l);
    for (std::size_t i = 0; i < n; ++i) detail::gemv_acc(w_self, &x[i * d], 1.0, &pre[i * d], d);
    for (const auto& e : mg.edges()) {
      const double norm = 1.0 / mg.in_degree(e.target, e.relation);
      detail::gemv_acc(params.relation_weight(l, e.relation), &x[e.source * d], norm,
                       &pre[e.target * d], d);
    }
    std::vector<double> out = pre;
    if (l + 1 < dims.layers) {
      for (double& v : out) v = v > 0.0 ? v : 0.0;
    }
    act.pre.push_back(std::move(pre));
    act.out.push_back(std::move(out));
  }
  return act;
}

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double ez = std::exp(z);
  return ez / (1.0 + ez);
}

struct EdgeScore {
  double logit = 0.0;
  double probability = 0.5;

  // Thresholded existence decision: a link is predicted when the score
  // exceeds the confidence threshold.
  bool exists(double threshold = 0.9) const { return probability > threshold; }
};

// DistMult: z = sum_k e_s[k] * w_r[k] * e_o[k].
inline EdgeScore score_edge(const ModelParams& params, const LayerActivations& act, NodeId subject,
                            RelationId relation, NodeId object) {
  const auto es = act.final_embedding(subject);
  const auto eo = act.final_embedding(object);
  const auto w = params.decoder(relation);
  double z = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) z += es[k] * w[k] * eo[k];
  return {z, sigmoid(z)};
}

// -log sigma(z) if y = 1, -log(1 - sigma(z)) if y = 0, without overflow.
inline double bce_with_logit(double z, bool positive) {
  return std::max(z, 0.0) - (positive ? z : 0.0) + std::log1p(std::exp(-std::abs(z)));
}

inline double loss_only(const ModelParams& params, const MessageGraph& mg,
                        std::span<const Edge> loss_edges) {
  if (loss_edges.empty()) throw Error("loss requires at least one edge");
  const LayerActivations act = encoder_forward(params, mg);
  double total = 0.0;
  for (const auto& e : loss_edges) {
    total += bce_with_logit(score_edge(params, act, e.subject, e.relation, e.object).logit, e.positive());
  }
  return total / static_cast<double>(loss_edges.size());
}

struct LossAndGradients {
  double loss = 0.0;
  ModelParams gradients;
};

// Mean binary cross-entropy over `loss_edges` and its exact gradient with
// respect to every parameter (frozen rows get zero), by reverse-mode
// propagation through the decoder and each encoder layer.
inline LossAndGradients loss_and_gradients(const ModelParams& params, const MessageGraph& mg,
                                           std::span<const Edge> loss_edges) {
  if (loss_edges.empty()) throw Error("loss requires at least one edge");
  const LayerActivations act = encoder_forward(params, mg);
  const auto& dims = params.dims();
  const std::size_t n = dims.nodes;
  const std::size_t d = dims.dim;
  const double inv_m = 1.0 / static_cast<double>(loss_edges.size());

  LossAndGradients result{0.0, params.zeros_like()};
  ModelParams& grad = result.gradients;

  std::vector<double> g_out(n * d, 0.0);
  const std::vector<double>& final_out = act.out.back();
  for (const auto& e : loss_edges) {
    const double* es = &final_out[e.subject * d];
    const double* eo = &final_out[e.object * d];
    const auto w = params.decoder(e.relation);
    auto gw = grad.decoder(e.relation);
    double z = 0.0;
    for (std::size_t k = 0; k < d; ++k) z += es[k] * w[k] * eo[k];
    result.loss += bce_with_logit(z, e.positive());
    const double dz = (sigmoid(z) - (e.positive() ? 1.0 : 0.0)) * inv_m;
    for (std::size_t k = 0; k < d; ++k) {
      g_out[e.subject * d + k] += dz * w[k] * eo[k];
      g_out[e.object * d + k] += dz * es[k] * w[k];
      gw[k] += dz * es[k] * eo[k];
    }
  }
  result.loss *= inv_m;

  for (std::size_t l = dims.layers; l-- > 0;) {
    const std::vector<double>& x = act.out[l];
    const std::vector<double>& pre = act.pre[l];
    std::vector<double> g_pre = std::move(g_out);
    if (l + 1 < dims.layers) {
      for (std::size_t k = 0; k < g_pre.size(); ++k) {
        if (!(pre[k] > 0.0)) g_pre[k] = 0.0;
      }
    }
    std::vector<double> g_in(n * d, 0.0);
    const double* w_self = params.self_weight(l);
    double* gw_self = grad.self_weight(l);
    for (std::size_t i = 0; i < n; ++i) {
      detail::outer_acc(&g_pre[i * d], &x[i * d], 1.0, gw_self, d);
      detail::gemv_t_acc(w_self, &g_pre[i * d], 1.0, &g_in[i * d], d);
    }
    for (const auto& e : mg.edges()) {
      const double norm = 1.0 / mg.in_degree(e.target, e.relation);
      detail::outer_acc(&g_pre[e.target * d], &x[e.source * d], norm,
                        grad.relation_weight(l, e.relation), d);
      detail::gemv_t_acc(params.relation_weight(l, e.relation), &g_pre[e.target * d], norm,
                         &g_in[e.source * d], d);
    }
    g_out = std::move(g_in);
  }

  for (NodeId i = 0; i < n; ++i) {
    auto row = grad.embedding(i);
    if (params.frozen_row(i)) {
      std::fill(row.begin(), row.end(), 0.0);
    } else {
      std::copy(g_out.begin() + static_cast<std::ptrdiff_t>(i * d),
                g_out.begin() + static_cast<std::ptrdiff_t>((i + 1) * d), row.begin());
    }
  }
  return result;
}

struct GradientCheck {
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  std::string worst_parameter;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t checked = 0;
};

// Compares `analytic` against central differences (L(p+h) - L(p-h)) / 2h for
// every trainable scalar. Relative error uses max(|a|, |n|, 1e-8) as the
// denominator.
inline GradientCheck compare_gradients(const ModelParams& params, const MessageGraph& mg,
                                       std::span<const Edge> loss_edges, const ModelParams& analytic,
                                       double h) {
  if (!(h > 0.0)) throw Error("finite-difference step must be positive");
  if (analytic.size() != params.size()) throw Error("gradient shape does not match parameters");
  GradientCheck check;
  ModelParams probe = params;
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (!params.trainable(k)) continue;
    const double orig = params.values()[k];
    probe.values()[k] = orig + h;
    const double up = loss_only(probe, mg, loss_edges);
    probe.values()[k] = orig - h;
    const double down = loss_only(probe, mg, loss_edges);
    probe.values()[k] = orig;
    const double numeric = (up - down) / (2.0 * h);
    const double a = analytic.values()[k];
    const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
    const double err = std::abs(a - numeric) / denom;
    ++check.checked;
    if (check.checked == 1 || err > check.max_relative_error) {
      check.max_relative_error = err;
      check.worst_index = k;
      check.worst_parameter = params.describe(k);
      check.analytic = a;
      check.numeric = numeric;
    }
  }
  return check;
}

inline GradientCheck finite_difference_check(const ModelParams& params, const MessageGraph& mg,
                                             std::span<const Edge> loss_edges, double h = 1e-5) {
  const auto lg = loss_and_gradients(params, mg, loss_edges);
  return compare_gradients(params, mg, loss_edges, lg.gradients, h);
}

}  // namespace kgflow
