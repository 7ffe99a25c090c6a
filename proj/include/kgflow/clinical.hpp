#pragma once

#include <array>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "kgflow/common.hpp"
#include "kgflow/knowledge_graph.hpp"

namespace kgflow {

// Node types and relations of the clinical triage graph.
namespace clinical {

inline constexpr std::string_view kPatient = "patient";
inline constexpr std::string_view kEncounter = "encounter";
inline constexpr std::string_view kObservation = "observation";
inline constexpr std::string_view kCondition = "condition";
inline constexpr std::string_view kCareAction = "careaction";

inline constexpr std::string_view kPatientEncounter = "patient-encounter";
inline constexpr std::string_view kEncounterObservation = "encounter-observation";
inline constexpr std::string_view kEncounterCondition = "encounter-condition";
inline constexpr std::string_view kEncounterCareAction = "encounter-careaction";

inline Schema schema() {
  Schema s;
  const TypeId patient = s.add_node_type(kPatient);
  const TypeId encounter = s.add_node_type(kEncounter);
  const TypeId observation = s.add_node_type(kObservation);
  const TypeId condition = s.add_node_type(kCondition);
  const TypeId care = s.add_node_type(kCareAction);
  s.add_relation(kPatientEncounter, patient, encounter);
  s.add_relation(kEncounterObservation, encounter, observation);
  s.add_relation(kEncounterCondition, encounter, condition);
  s.add_relation(kEncounterCareAction, encounter, care);
  return s;
}

}  // namespace clinical

enum class CareAction : std::uint8_t { Wellness, Inpatient, Outpatient, Ambulatory, Emergency };

inline constexpr std::size_t kCareActionCount = 5;
inline constexpr std::array<CareAction, kCareActionCount> kCareActions = {
    CareAction::Wellness, CareAction::Inpatient, CareAction::Outpatient, CareAction::Ambulatory,
    CareAction::Emergency};

inline std::string_view care_action_name(CareAction a) {
  static constexpr std::array<std::string_view, kCareActionCount> names = {
      "wellness", "inpatient", "outpatient", "ambulatory", "emergency"};
  return names[static_cast<std::size_t>(a)];
}

inline std::optional<CareAction> parse_care_action(std::string_view name) {
  for (CareAction a : kCareActions) {
    if (care_action_name(a) == name) return a;
  }
  return std::nullopt;
}

inline std::size_t index_of(CareAction a) { return static_cast<std::size_t>(a); }

// Adds any of the five care-action nodes the graph does not have yet, and
// declares the clinical types and relations a sparse sample may lack (for
// example a dataset without conditions).
inline void ensure_care_action_nodes(KnowledgeGraph& kg) {
  namespace c = clinical;
  Schema& s = kg.schema();
  for (auto t : {c::kPatient, c::kEncounter, c::kObservation, c::kCondition, c::kCareAction}) s.add_node_type(t);
  s.add_relation(c::kPatientEncounter, s.require_node_type(c::kPatient), s.require_node_type(c::kEncounter));
  s.add_relation(c::kEncounterObservation, s.require_node_type(c::kEncounter), s.require_node_type(c::kObservation));
  s.add_relation(c::kEncounterCondition, s.require_node_type(c::kEncounter), s.require_node_type(c::kCondition));
  s.add_relation(c::kEncounterCareAction, s.require_node_type(c::kEncounter), s.require_node_type(c::kCareAction));
  const TypeId care = s.require_node_type(c::kCareAction);
  for (CareAction a : kCareActions) kg.add_node(care_action_name(a), care);
}

// Node ids of the five care actions in canonical order.
inline std::array<NodeId, kCareActionCount> care_action_nodes(const KnowledgeGraph& kg) {
  const TypeId care = kg.schema().require_node_type(clinical::kCareAction);
  std::array<NodeId, kCareActionCount> ids{};
  for (CareAction a : kCareActions) {
    const auto id = kg.find_node(care_action_name(a));
    if (!id || kg.node_type(*id) != care) {
      throw Error("graph is missing care-action node '" + std::string(care_action_name(a)) + "'");
    }
    ids[index_of(a)] = *id;
  }
  return ids;
}

// One-of-N negative synthesis for `relation`: every subject with exactly one
// positive edge to a node in `candidates` receives a negative edge to every
// other candidate. Returns the number of edges added. Subjects with zero or
// several positive edges are an error.
inline std::size_t synthesize_one_of_n_negatives(KnowledgeGraph& kg, RelationId relation,
                                                 const std::vector<NodeId>& candidates) {
  const auto& rel = kg.schema().relation(relation);
  const auto subjects = kg.nodes_of_type(rel.subject_type);
  std::vector<std::vector<NodeId>> positives(kg.node_count());
  for (const auto& e : kg.edges()) {
    if (e.relation == relation && e.positive()) positives[e.subject].push_back(e.object);
  }
  std::size_t added = 0;
  for (NodeId s : subjects) {
    if (positives[s].size() != 1) {
      throw Error(kg.node_name(s) + " has " + std::to_string(positives[s].size()) +
                  " positive '" + rel.name + "' edges; exactly one is required");
    }
    for (NodeId c : candidates) {
      if (c == positives[s].front() || kg.contains(s, relation, c)) continue;
      kg.add_edge({s, relation, c, Polarity::Negative});
      ++added;
    }
  }
  return added;
}

// Negative encounter-careaction edges: for every encounter, one to each care
// action it is not positively linked to. Idempotent.
inline std::size_t synthesize_negative_careaction_edges(KnowledgeGraph& kg) {
  const auto encounter = kg.schema().find_node_type(clinical::kEncounter);
  if (!encounter || kg.nodes_of_type(*encounter).empty()) return 0;
  const RelationId rel = kg.schema().require_relation(clinical::kEncounterCareAction);
  const auto ids = care_action_nodes(kg);
  return synthesize_one_of_n_negatives(kg, rel, std::vector<NodeId>(ids.begin(), ids.end()));
}

// Copy of `kg` with every negative edge removed.
inline KnowledgeGraph drop_negative_edges(const KnowledgeGraph& kg) {
  KnowledgeGraph out(kg.schema());
  for (NodeId i = 0; i < kg.node_count(); ++i) out.add_node(kg.node_name(i), kg.node_type(i));
  for (const auto& e : kg.edges()) {
    if (e.positive()) out.add_edge(e);
  }
  return out;
}

// Care action each encounter is positively linked to. Encounters without
// exactly one positive link are absent from the map.
inline std::map<NodeId, CareAction> encounter_truth(const KnowledgeGraph& kg) {
  std::map<NodeId, CareAction> truth;
  const auto rel = kg.schema().find_relation(clinical::kEncounterCareAction);
  if (!rel) return truth;
  std::map<NodeId, int> count;
  for (const auto& e : kg.edges()) {
    if (e.relation != *rel || !e.positive()) continue;
    if (auto a = parse_care_action(kg.node_name(e.object))) {
      truth[e.subject] = *a;
      ++count[e.subject];
    }
  }
  for (const auto& [enc, c] : count) {
    if (c != 1) truth.erase(enc);
  }
  return truth;
}

// ---------------------------------------------------------------------------
// Patient-level split
// ---------------------------------------------------------------------------

// Copy of `kg` restricted to `keep` (a node mask). Node order is preserved;
// the schema is copied whole.
inline KnowledgeGraph induced_subgraph(const KnowledgeGraph& kg, const std::vector<bool>& keep) {
  KnowledgeGraph out(kg.schema());
  std::vector<NodeId> remap(kg.node_count(), kInvalidNode);
  for (NodeId i = 0; i < kg.node_count(); ++i) {
    if (keep[i]) remap[i] = out.add_node(kg.node_name(i), kg.node_type(i));
  }
  for (const auto& e : kg.edges()) {
    if (keep[e.subject] && keep[e.object]) {
      out.add_edge({remap[e.subject], e.relation, remap[e.object], e.polarity});
    }
  }
  return out;
}

struct PatientSplit {
  KnowledgeGraph train;
  KnowledgeGraph test;
};

// Samples n_train + n_test patients uniformly without replacement. Each side
// keeps its patients, their encounters, every incident edge, and all nodes of
// the other (shared vocabulary) types.
inline PatientSplit split_by_patients(const KnowledgeGraph& kg, std::size_t n_train,
                                      std::size_t n_test, std::uint64_t seed) {
  const TypeId patient = kg.schema().require_node_type(clinical::kPatient);
  const TypeId encounter = kg.schema().require_node_type(clinical::kEncounter);
  const RelationId has_encounter = kg.schema().require_relation(clinical::kPatientEncounter);

  auto patients = kg.nodes_of_type(patient);
  if (patients.size() < n_train + n_test) {
    throw Error("split_by_patients: need " + std::to_string(n_train + n_test) +
                " patients, graph has " + std::to_string(patients.size()));
  }
  Rng rng(seed);
  rng.shuffle(patients);

  std::vector<std::vector<NodeId>> encounters_of(kg.node_count());
  for (const auto& e : kg.edges()) {
    if (e.relation == has_encounter) encounters_of[e.subject].push_back(e.object);
  }

  auto side = [&](std::size_t begin, std::size_t end) {
    std::vector<bool> keep(kg.node_count(), false);
    for (NodeId i = 0; i < kg.node_count(); ++i) {
      keep[i] = kg.node_type(i) != patient && kg.node_type(i) != encounter;
    }
    for (std::size_t k = begin; k < end; ++k) {
      keep[patients[k]] = true;
      for (NodeId enc : encounters_of[patients[k]]) keep[enc] = true;
    }
    return induced_subgraph(kg, keep);
  };
  return {side(0, n_train), side(n_train, n_train + n_test)};
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

enum class FindingKind { SchemaViolation, DanglingReference, DuplicateTriple, CareActionRule };

inline std::string_view finding_kind_name(FindingKind k) {
  switch (k) {
    case FindingKind::SchemaViolation: return "schema-violation";
    case FindingKind::DanglingReference: return "dangling-reference";
    case FindingKind::DuplicateTriple: return "duplicate-triple";
    case FindingKind::CareActionRule: return "care-action-rule";
  }
  return "unknown";
}

struct Finding {
  FindingKind kind;
  std::string message;
};

struct ValidationReport {
  std::vector<Finding> findings;

  bool ok() const { return findings.empty(); }
  std::size_t count(FindingKind k) const {
    std::size_t n = 0;
    for (const auto& f : findings) n += f.kind == k;
    return n;
  }
};

inline ValidationReport validate_kg(const KnowledgeGraph& kg) {
  ValidationReport report;
  auto add = [&](FindingKind k, std::string msg) { report.findings.push_back({k, std::move(msg)}); };
  const auto& schema = kg.schema();
  const std::size_t n = kg.node_count();

  for (RelationId r = 0; r < schema.relation_count(); ++r) {
    const auto& rel = schema.relation(r);
    if (rel.subject_type >= schema.node_type_count() || rel.object_type >= schema.node_type_count()) {
      add(FindingKind::SchemaViolation, "relation '" + rel.name + "' references an undeclared node type");
    }
  }
  for (NodeId i = 0; i < n; ++i) {
    if (kg.node_type(i) >= schema.node_type_count()) {
      add(FindingKind::SchemaViolation, "node '" + kg.node_name(i) + "' has an undeclared type");
    }
  }

  std::unordered_set<TripleKey, TripleKeyHash> seen;
  for (std::size_t k = 0; k < kg.edge_count(); ++k) {
    const Edge& e = kg.edges()[k];
    const std::string where = "edge " + std::to_string(k) + ": ";
    if (e.subject >= n || e.object >= n || e.relation >= schema.relation_count()) {
      add(FindingKind::DanglingReference, where + "references a missing node or relation");
      continue;
    }
    const auto& rel = schema.relation(e.relation);
    if (kg.node_type(e.subject) != rel.subject_type || kg.node_type(e.object) != rel.object_type) {
      add(FindingKind::SchemaViolation, where + "endpoint types do not match relation '" + rel.name + "'");
    }
    if (!seen.insert({e.subject, e.relation, e.object}).second) {
      add(FindingKind::DuplicateTriple, where + "duplicates (" + kg.node_name(e.subject) + ", " +
                                            rel.name + ", " + kg.node_name(e.object) + ")");
    }
  }

  const auto encounter = schema.find_node_type(clinical::kEncounter);
  const auto care_rel = schema.find_relation(clinical::kEncounterCareAction);
  if (encounter && care_rel) {
    std::vector<int> positives(n, 0);
    for (const auto& e : kg.edges()) {
      if (e.relation == *care_rel && e.positive() && e.subject < n && e.object < n) ++positives[e.subject];
    }
    for (NodeId i = 0; i < n; ++i) {
      if (kg.node_type(i) == *encounter && positives[i] != 1) {
        add(FindingKind::CareActionRule, "encounter '" + kg.node_name(i) + "' has " +
                                             std::to_string(positives[i]) +
                                             " positive care-action edges");
      }
    }
  }
  return report;
}

}  // namespace kgflow
