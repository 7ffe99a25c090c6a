#pragma once

#include <algorithm>
#include <istream>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "kgflow/clinical.hpp"
#include "kgflow/common.hpp"
#include "kgflow/knowledge_graph.hpp"

namespace kgflow {

enum class Direction : std::uint8_t { Forward, Reverse };

// A typed flow of embedding information along one relation. A forward rule
// sends from subject to object, a reverse rule from object to subject.
struct MessageRule {
  TypeId source_type = 0;
  RelationId relation = 0;
  TypeId target_type = 0;
  Direction direction = Direction::Forward;

  auto operator<=>(const MessageRule&) const = default;
};

inline MessageRule make_rule(const Schema& schema, RelationId relation, Direction direction) {
  const auto& rel = schema.relation(relation);
  if (direction == Direction::Forward) return {rel.subject_type, relation, rel.object_type, direction};
  return {rel.object_type, relation, rel.subject_type, direction};
}

inline MessageRule make_rule(const Schema& schema, std::string_view relation, Direction direction) {
  return make_rule(schema, schema.require_relation(relation), direction);
}

inline void check_rule(const Schema& schema, const MessageRule& rule) {
  if (rule.relation >= schema.relation_count()) {
    throw Error("message rule references undeclared relation #" + std::to_string(rule.relation));
  }
  const MessageRule expected = make_rule(schema, rule.relation, rule.direction);
  if (expected.source_type != rule.source_type || expected.target_type != rule.target_type) {
    throw Error("message rule on '" + schema.relation(rule.relation).name +
                "' does not match the relation's " +
                (rule.direction == Direction::Forward ? "signature" : "reversed signature"));
  }
}

class ConnectivityPolicy {
 public:
  ConnectivityPolicy() = default;
  explicit ConnectivityPolicy(std::string name) : name_(std::move(name)) {}

  // Returns false when the rule is already present.
  bool add(const MessageRule& rule) {
    if (contains(rule)) return false;
    rules_.push_back(rule);
    return true;
  }

  bool remove(const MessageRule& rule) {
    auto it = std::find(rules_.begin(), rules_.end(), rule);
    if (it == rules_.end()) return false;
    rules_.erase(it);
    return true;
  }

  bool contains(const MessageRule& rule) const {
    return std::find(rules_.begin(), rules_.end(), rule) != rules_.end();
  }

  const std::string& name() const { return name_; }
  void set_name(std::string name) { name_ = std::move(name); }
  const std::vector<MessageRule>& rules() const { return rules_; }
  std::size_t size() const { return rules_.size(); }
  bool empty() const { return rules_.empty(); }

 private:
  std::string name_ = "custom";
  std::vector<MessageRule> rules_;
};

// Presets for the clinical schema:
//   C1  every relation, forward (the graph's own connectivity)
//   C2  C1 plus every reverse
//   C3  C2 without careaction -> encounter
//   C4  observation -> encounter and condition -> encounter only
inline ConnectivityPolicy preset_policy(std::string_view name, const Schema& schema) {
  namespace c = clinical;
  for (auto t : {c::kPatient, c::kEncounter, c::kObservation, c::kCondition, c::kCareAction}) {
    schema.require_node_type(t);
  }
  const std::string_view relations[] = {c::kPatientEncounter, c::kEncounterObservation,
                                        c::kEncounterCondition, c::kEncounterCareAction};
  for (auto r : relations) {
    const auto& rel = schema.relation(schema.require_relation(r));
    const auto dash = r.find('-');
    if (schema.node_type_name(rel.subject_type) != r.substr(0, dash) ||
        schema.node_type_name(rel.object_type) != r.substr(dash + 1)) {
      throw Error("relation '" + std::string(r) + "' does not have the clinical signature");
    }
  }

  ConnectivityPolicy policy{std::string(name)};
  auto all = [&](Direction d) {
    for (auto r : relations) policy.add(make_rule(schema, r, d));
  };
  if (name == "C1") {
    all(Direction::Forward);
  } else if (name == "C2") {
    all(Direction::Forward);
    all(Direction::Reverse);
  } else if (name == "C3") {
    all(Direction::Forward);
    all(Direction::Reverse);
    policy.remove(make_rule(schema, c::kEncounterCareAction, Direction::Reverse));
  } else if (name == "C4") {
    policy.add(make_rule(schema, c::kEncounterObservation, Direction::Reverse));
    policy.add(make_rule(schema, c::kEncounterCondition, Direction::Reverse));
  } else {
    throw Error("unknown connectivity preset '" + std::string(name) + "' (expected C1, C2, C3 or C4)");
  }
  return policy;
}

// Policy text: one rule per line, `source_type relation target_type [reverse]`,
// or `preset <C1..C4>` to include a preset's rules. '#' starts a comment.
inline ConnectivityPolicy parse_policy(std::istream& in, const Schema& schema) {
  ConnectivityPolicy policy;
  std::vector<std::string> presets;
  bool custom = false;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    std::vector<std::string> tok;
    for (std::string t; ss >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    const std::string where = "policy line " + std::to_string(lineno) + ": ";
    try {
      if (tok[0] == "preset" && tok.size() == 2) {
        for (const auto& r : preset_policy(tok[1], schema).rules()) policy.add(r);
        presets.push_back(tok[1]);
        continue;
      }
      if (tok.size() != 3 && !(tok.size() == 4 && tok[3] == "reverse")) {
        throw Error("expected 'source_type relation target_type [reverse]'");
      }
      std::string rel = tok[1];
      if (rel.size() >= 2 && rel.front() == '<' && rel.back() == '>') rel = rel.substr(1, rel.size() - 2);
      const MessageRule rule{schema.require_node_type(tok[0]), schema.require_relation(rel),
                             schema.require_node_type(tok[2]),
                             tok.size() == 4 ? Direction::Reverse : Direction::Forward};
      check_rule(schema, rule);
      policy.add(rule);
      custom = true;
    } catch (const Error& e) {
      throw Error(where + e.what());
    }
  }
  if (presets.size() == 1 && !custom) {
    policy.set_name(presets.front());
  }
  return policy;
}

inline std::string format_policy(const ConnectivityPolicy& policy, const Schema& schema) {
  std::ostringstream out;
  for (const auto& r : policy.rules()) {
    out << schema.node_type_name(r.source_type) << ' ' << schema.relation(r.relation).name << ' '
        << schema.node_type_name(r.target_type);
    if (r.direction == Direction::Reverse) out << " reverse";
    out << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Message graph
// ---------------------------------------------------------------------------

// Message-relation ids: forward flows keep the KG relation id r, reverse flows
// use R + r. The vocabulary therefore always has 2R entries.
inline std::uint32_t message_relation_id(RelationId r, Direction d, std::size_t relation_count) {
  return d == Direction::Forward ? r : static_cast<std::uint32_t>(relation_count + r);
}

struct MessageEdge {
  NodeId source = 0;
  std::uint32_t relation = 0;
  NodeId target = 0;

  bool operator==(const MessageEdge&) const = default;
};

// Canonical order: (target, relation, source).
inline bool canonical_less(const MessageEdge& a, const MessageEdge& b) {
  return std::tie(a.target, a.relation, a.source) < std::tie(b.target, b.relation, b.source);
}

class MessageGraph {
 public:
  MessageGraph() = default;

  MessageGraph(std::size_t node_count, std::size_t relation_count, std::vector<MessageEdge> edges)
      : node_count_(node_count), relation_count_(relation_count), edges_(std::move(edges)) {
    for (const auto& e : edges_) {
      if (e.source >= node_count_ || e.target >= node_count_ || e.relation >= relation_count_) {
        throw Error("message edge out of range");
      }
    }
    std::sort(edges_.begin(), edges_.end(), canonical_less);
    edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());
    in_degree_.assign(node_count_ * relation_count_, 0);
    for (const auto& e : edges_) ++in_degree_[e.target * relation_count_ + e.relation];
  }

  std::size_t node_count() const { return node_count_; }
  // Number of message relations (2R for a graph built from a KG).
  std::size_t relation_count() const { return relation_count_; }
  const std::vector<MessageEdge>& edges() const { return edges_; }
  std::size_t size() const { return edges_.size(); }

  std::uint32_t in_degree(NodeId target, std::uint32_t relation) const {
    return in_degree_[target * relation_count_ + relation];
  }

  bool operator==(const MessageGraph&) const = default;

 private:
  std::size_t node_count_ = 0;
  std::size_t relation_count_ = 0;
  std::vector<MessageEdge> edges_;
  std::vector<std::uint32_t> in_degree_;
};

inline MessageGraph build_message_graph(const KnowledgeGraph& kg, const ConnectivityPolicy& policy) {
  const Schema& schema = kg.schema();
  for (const auto& rule : policy.rules()) check_rule(schema, rule);
  const std::size_t R = schema.relation_count();

  std::vector<MessageEdge> out;
  for (const auto& e : kg.edges()) {
    if (!e.positive()) continue;
    const TypeId st = kg.node_type(e.subject);
    const TypeId ot = kg.node_type(e.object);
    for (const auto& rule : policy.rules()) {
      if (rule.relation != e.relation) continue;
      const std::uint32_t rho = message_relation_id(e.relation, rule.direction, R);
      if (rule.direction == Direction::Forward && rule.source_type == st && rule.target_type == ot) {
        out.push_back({e.subject, rho, e.object});
      } else if (rule.direction == Direction::Reverse && rule.source_type == ot &&
                 rule.target_type == st) {
        out.push_back({e.object, rho, e.subject});
      }
    }
  }
  return MessageGraph(kg.node_count(), 2 * R, std::move(out));
}

// Drops every message from an unseen node into a seen node, so merging new
// nodes into a trained graph leaves the seen nodes' embeddings unchanged.
inline MessageGraph apply_inference_mask(const MessageGraph& mg, const std::vector<bool>& seen) {
  if (seen.size() != mg.node_count()) throw Error("inference mask size does not match the graph");
  std::vector<MessageEdge> kept;
  kept.reserve(mg.size());
  for (const auto& e : mg.edges()) {
    if (!seen[e.source] && seen[e.target]) continue;
    kept.push_back(e);
  }
  return MessageGraph(mg.node_count(), mg.relation_count(), std::move(kept));
}

}  // namespace kgflow
