#pragma once

#include <array>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "kgflow/clinical.hpp"
#include "kgflow/config.hpp"
#include "kgflow/connectivity.hpp"
#include "kgflow/knowledge_graph.hpp"
#include "kgflow/model.hpp"
#include "kgflow/optimizer.hpp"

namespace kgflow {

struct TrainConfig {
  std::size_t dim = 5;
  std::size_t layers = 2;
  std::size_t epochs = 1000;
  LrSchedule schedule;
  AdamConfig adam;
  std::string policy = "C4";  // preset name, used when policy_text is empty
  std::string policy_text;    // rules in policy-file syntax
  std::vector<std::string> loss_relations = {std::string(clinical::kEncounterCareAction)};
  std::vector<std::string> frozen_types = {std::string(clinical::kEncounter),
                                           std::string(clinical::kPatient)};
  double threshold = 0.9;
  std::uint64_t seed = 1;

  // Keys: dim, layers, epochs, lr_schedule (e.g. "100:0.1,700:0.01,1000:0.001"),
  // weight_decay, decay_embeddings, policy, policy_file, loss_relations, frozen_types,
  // threshold, seed.
  void read(KeyValueConfig& kv) {
    kv.read("dim", dim);
    kv.read("layers", layers);
    kv.read("epochs", epochs);
    kv.read("weight_decay", adam.weight_decay);
    kv.read("decay_embeddings", adam.decay_embeddings);
    kv.read("policy", policy);
    kv.read("threshold", threshold);
    kv.read("seed", seed);
    kv.read_list("loss_relations", loss_relations);
    kv.read_list("frozen_types", frozen_types);
    std::string file;
    kv.read("policy_file", file);
    if (!file.empty()) {
      std::ifstream in(file);
      if (!in) throw Error("cannot open policy file '" + file + "'");
      std::stringstream ss;
      ss << in.rdbuf();
      policy_text = ss.str();
    }
    std::vector<std::string> phases;
    kv.read_list("lr_schedule", phases);
    if (!phases.empty()) {
      schedule.phases.clear();
      for (const auto& p : phases) {
        const auto colon = p.find(':');
        if (colon == std::string::npos) throw Error("lr_schedule entries look like last_epoch:rate");
        KeyValueConfig one;
        one.set("e", p.substr(0, colon));
        one.set("r", p.substr(colon + 1));
        std::size_t e = 0;
        double r = 0.0;
        one.read("e", e);
        one.read("r", r);
        if (!schedule.phases.empty() && e <= schedule.phases.back().first) {
          throw Error("lr_schedule epochs must increase");
        }
        schedule.phases.emplace_back(e, r);
      }
    }
  }

  LrSchedule effective_schedule() const {
    return epochs == schedule.total_epochs() ? schedule : schedule.scaled_to(epochs);
  }
};

inline ConnectivityPolicy resolve_policy(const TrainConfig& cfg, const Schema& schema) {
  if (!cfg.policy_text.empty()) {
    std::istringstream in(cfg.policy_text);
    return parse_policy(in, schema);
  }
  return preset_policy(cfg.policy, schema);
}

// Edges whose relation is listed in the filter, both polarities.
inline std::vector<Edge> select_loss_edges(const KnowledgeGraph& kg, const std::vector<std::string>& relations) {
  std::vector<bool> wanted(kg.schema().relation_count(), false);
  for (const auto& name : relations) {
    if (auto r = kg.schema().find_relation(name)) wanted[*r] = true;
  }
  std::vector<Edge> out;
  for (const auto& e : kg.edges()) {
    if (wanted[e.relation]) out.push_back(e);
  }
  return out;
}

inline std::uint64_t param_checksum(const ModelParams& p) {
  return fnv1a(p.values().data(), p.values().size() * sizeof(double));
}

struct TrainHistory {
  std::vector<double> losses;
  double seconds = 0.0;
  std::uint64_t checksum = 0;
};

struct TrainResult {
  ModelParams params;
  TrainHistory history;
};

// Full-batch training: the message graph comes from the configured policy
// over the graph's positive edges; the loss covers the filtered edges.
inline TrainResult train(const KnowledgeGraph& kg, const TrainConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  const ConnectivityPolicy policy = resolve_policy(cfg, kg.schema());
  const MessageGraph mg = build_message_graph(kg, policy);
  const std::vector<Edge> loss_edges = select_loss_edges(kg, cfg.loss_relations);
  if (loss_edges.empty()) throw Error("loss-edge filter selects no edges");

  TrainResult result{init_params(kg.schema(), kg.node_types(), cfg.dim, cfg.layers, mg.relation_count(),
                                 cfg.seed, cfg.frozen_types),
                     {}};
  const LrSchedule schedule = cfg.effective_schedule();
  AdamState state(cfg.adam, result.params.size());
  result.history.losses.reserve(cfg.epochs);
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    auto lg = loss_and_gradients(result.params, mg, loss_edges);
    result.history.losses.push_back(lg.loss);
    adam_step(result.params, lg.gradients, state, schedule, epoch);
  }
  result.history.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  result.history.checksum = param_checksum(result.params);
  return result;
}

// ---------------------------------------------------------------------------
// Inductive prediction
// ---------------------------------------------------------------------------

// Training graph with test nodes merged in (fresh ids after the seen ones),
// the masked message graph over it, and the model extended with zero rows
// for the new nodes.
struct InductiveGraph {
  KnowledgeGraph merged;
  std::size_t seen_count = 0;
  std::vector<NodeId> test_to_merged;
  MessageGraph messages;
  ModelParams params;
};

inline bool is_instance_type(const std::string& type_name) {
  return type_name == clinical::kPatient || type_name == clinical::kEncounter;
}

inline InductiveGraph build_inductive_graph(const ModelParams& params, const KnowledgeGraph& train_kg,
                                            const KnowledgeGraph& test_kg, const TrainConfig& cfg) {
  if (params.dims().nodes != train_kg.node_count()) {
    throw Error("model has " + std::to_string(params.dims().nodes) + " node rows, training graph has " +
                std::to_string(train_kg.node_count()) + " nodes");
  }
  InductiveGraph g;
  g.merged = train_kg;
  g.seen_count = train_kg.node_count();
  const Schema& ts = test_kg.schema();
  Schema& ms = g.merged.schema();
  const std::size_t relation_count = ms.relation_count();

  g.test_to_merged.resize(test_kg.node_count());
  for (NodeId i = 0; i < test_kg.node_count(); ++i) {
    const std::string& name = test_kg.node_name(i);
    const std::string& type = ts.node_type_name(test_kg.node_type(i));
    if (is_instance_type(type) && g.merged.find_node(name)) {
      throw Error("test " + type + " '" + name + "' already exists in the training graph");
    }
    g.test_to_merged[i] = g.merged.add_node(name, ms.add_node_type(type));
  }

  std::vector<RelationId> rel_map(ts.relation_count());
  for (RelationId r = 0; r < ts.relation_count(); ++r) {
    const auto& rel = ts.relation(r);
    rel_map[r] = ms.add_relation(rel.name, ms.require_node_type(ts.node_type_name(rel.subject_type)),
                                 ms.require_node_type(ts.node_type_name(rel.object_type)));
  }
  if (ms.relation_count() != relation_count) {
    throw Error("test graph uses relations the model was not trained on");
  }
  // Test encounter-careaction links are the unknowns; they never enter the
  // message graph in either direction.
  const auto hidden = ts.find_relation(clinical::kEncounterCareAction);
  for (const auto& e : test_kg.edges()) {
    if (hidden && e.relation == *hidden) continue;
    const Edge m{g.test_to_merged[e.subject], rel_map[e.relation], g.test_to_merged[e.object], e.polarity};
    if (!g.merged.contains(m.subject, m.relation, m.object)) g.merged.add_edge(m);
  }

  const ConnectivityPolicy policy = resolve_policy(cfg, g.merged.schema());
  std::vector<bool> seen(g.merged.node_count(), false);
  std::fill(seen.begin(), seen.begin() + static_cast<std::ptrdiff_t>(g.seen_count), true);
  g.messages = apply_inference_mask(build_message_graph(g.merged, policy), seen);
  g.params = params.with_extra_nodes(g.merged.node_count() - g.seen_count);
  return g;
}

struct Prediction {
  std::string encounter;
  NodeId test_node = 0;
  CareAction predicted = CareAction::Wellness;
  std::optional<CareAction> truth;
  std::array<double, kCareActionCount> scores{};
  // Set when the encounter has no observation or condition; the prediction
  // then falls back to the most frequent training care action.
  bool no_evidence = false;
};

// Most frequent positive care action in the training graph; ties go to the
// lowest canonical index.
inline CareAction prior_care_action(const KnowledgeGraph& kg) {
  std::array<std::size_t, kCareActionCount> counts{};
  for (const auto& [enc, a] : encounter_truth(kg)) ++counts[index_of(a)];
  std::size_t best = 0;
  for (std::size_t k = 1; k < kCareActionCount; ++k) {
    if (counts[k] > counts[best]) best = k;
  }
  return kCareActions[best];
}

inline std::vector<Prediction> predict_care_action(const ModelParams& params, const KnowledgeGraph& train_kg,
                                                   const KnowledgeGraph& test_kg, const TrainConfig& cfg) {
  const InductiveGraph g = build_inductive_graph(params, train_kg, test_kg, cfg);
  const LayerActivations act = encoder_forward(g.params, g.messages);
  const auto care_nodes = care_action_nodes(g.merged);
  const RelationId rel = g.merged.schema().require_relation(clinical::kEncounterCareAction);
  const CareAction fallback = prior_care_action(train_kg);
  const auto truth = encounter_truth(test_kg);

  const auto encounter = test_kg.schema().find_node_type(clinical::kEncounter);
  if (!encounter) return {};
  std::vector<bool> has_evidence(test_kg.node_count(), false);
  for (const auto& e : test_kg.edges()) {
    const auto& name = test_kg.schema().relation(e.relation).name;
    if (e.positive() && (name == clinical::kEncounterObservation || name == clinical::kEncounterCondition)) {
      has_evidence[e.subject] = true;
    }
  }

  std::vector<Prediction> out;
  for (NodeId i : test_kg.nodes_of_type(*encounter)) {
    Prediction p;
    p.encounter = test_kg.node_name(i);
    p.test_node = i;
    if (auto it = truth.find(i); it != truth.end()) p.truth = it->second;
    std::size_t best = 0;
    for (std::size_t k = 0; k < kCareActionCount; ++k) {
      p.scores[k] = score_edge(g.params, act, g.test_to_merged[i], rel, care_nodes[k]).probability;
      if (p.scores[k] > p.scores[best]) best = k;
    }
    p.predicted = kCareActions[best];
    if (!has_evidence[i]) {
      p.no_evidence = true;
      p.predicted = fallback;
    }
    out.push_back(std::move(p));
  }
  return out;
}

inline void write_predictions(std::ostream& out, const std::vector<Prediction>& preds) {
  out << "encounter,predicted,truth";
  for (CareAction a : kCareActions) out << ",score_" << care_action_name(a);
  out << '\n';
  char buf[32];
  for (const auto& p : preds) {
    out << csv::quote(p.encounter) << ',' << care_action_name(p.predicted) << ','
        << (p.truth ? care_action_name(*p.truth) : std::string_view{});
    for (double s : p.scores) {
      std::snprintf(buf, sizeof buf, "%.17g", s);
      out << ',' << buf;
    }
    out << '\n';
  }
}

}  // namespace kgflow
