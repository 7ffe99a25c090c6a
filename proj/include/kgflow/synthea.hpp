#pragma once

#include <istream>
#include <string>

#include "kgflow/clinical.hpp"
#include "kgflow/csv.hpp"
#include "kgflow/knowledge_graph.hpp"

namespace kgflow {

// Builds the clinical triage graph from a Synthea CSV export.
//
// Columns are located by header name; everything else is ignored:
//   patients:     Id
//   encounters:   Id, PATIENT, ENCOUNTERCLASS
//   conditions:   ENCOUNTER, DESCRIPTION
//   observations: ENCOUNTER, DESCRIPTION
//
// Conditions and observations become nodes named by their DESCRIPTION.
// A repeated (encounter, description) pair, e.g. an observation measured
// twice during one visit, yields a single edge. Care-action nodes are created
// for the encounter classes that occur.
inline KnowledgeGraph ingest_clinical_csv(std::istream& patients, std::istream& encounters,
                                          std::istream& conditions, std::istream& observations) {
  KnowledgeGraph kg(clinical::schema());
  const auto& s = kg.schema();
  const TypeId t_patient = s.require_node_type(clinical::kPatient);
  const TypeId t_encounter = s.require_node_type(clinical::kEncounter);
  const TypeId t_observation = s.require_node_type(clinical::kObservation);
  const TypeId t_condition = s.require_node_type(clinical::kCondition);
  const TypeId t_care = s.require_node_type(clinical::kCareAction);
  const RelationId r_pe = s.require_relation(clinical::kPatientEncounter);
  const RelationId r_eo = s.require_relation(clinical::kEncounterObservation);
  const RelationId r_ec = s.require_relation(clinical::kEncounterCondition);
  const RelationId r_ea = s.require_relation(clinical::kEncounterCareAction);

  auto open = [](std::istream& in, const char* what) {
    csv::Reader reader(in);
    auto header = reader.next();
    if (!header) throw Error(std::string(what) + ": missing header");
    return std::pair{std::move(reader), csv::Header(*header)};
  };
  auto field = [](const std::vector<std::string>& row, std::size_t col, const char* what,
                  std::size_t line) -> const std::string& {
    if (col >= row.size()) {
      throw Error(std::string(what) + " line " + std::to_string(line) + ": too few fields");
    }
    return row[col];
  };

  {
    auto [reader, header] = open(patients, "patients.csv");
    const std::size_t c_id = header.require("Id", "patients.csv");
    while (auto row = reader.next()) {
      const auto& id = field(*row, c_id, "patients.csv", reader.line());
      if (id.empty()) throw Error("patients.csv line " + std::to_string(reader.line()) + ": empty Id");
      kg.add_node(id, t_patient);
    }
  }
  {
    auto [reader, header] = open(encounters, "encounters.csv");
    const std::size_t c_id = header.require("Id", "encounters.csv");
    const std::size_t c_patient = header.require("PATIENT", "encounters.csv");
    const std::size_t c_class = header.require("ENCOUNTERCLASS", "encounters.csv");
    while (auto row = reader.next()) {
      const std::size_t line = reader.line();
      const auto& id = field(*row, c_id, "encounters.csv", line);
      const auto& patient = field(*row, c_patient, "encounters.csv", line);
      const auto& cls = field(*row, c_class, "encounters.csv", line);
      const auto action = parse_care_action(cls);
      if (!action) {
        throw Error("encounters.csv line " + std::to_string(line) + ": encounter '" + id +
                    "' has class '" + cls +
                    "', expected one of wellness, inpatient, outpatient, ambulatory, emergency");
      }
      const auto p = kg.find_node(patient);
      if (!p || kg.node_type(*p) != t_patient) {
        throw Error("encounters.csv line " + std::to_string(line) + ": unknown patient '" + patient + "'");
      }
      if (kg.find_node(id)) {
        throw Error("encounters.csv line " + std::to_string(line) + ": duplicate encounter '" + id + "'");
      }
      const NodeId e = kg.add_node(id, t_encounter);
      const NodeId a = kg.add_node(care_action_name(*action), t_care);
      kg.add_edge({*p, r_pe, e, Polarity::Positive});
      kg.add_edge({e, r_ea, a, Polarity::Positive});
    }
  }

  auto attach = [&](std::istream& in, const char* what, TypeId type, RelationId rel) {
    auto [reader, header] = open(in, what);
    const std::size_t c_enc = header.require("ENCOUNTER", what);
    const std::size_t c_desc = header.require("DESCRIPTION", what);
    while (auto row = reader.next()) {
      const std::size_t line = reader.line();
      const auto& enc = field(*row, c_enc, what, line);
      const auto& desc = field(*row, c_desc, what, line);
      const auto e = kg.find_node(enc);
      if (!e || kg.node_type(*e) != t_encounter) {
        throw Error(std::string(what) + " line " + std::to_string(line) +
                    ": references unknown encounter '" + enc + "'");
      }
      if (desc.empty()) {
        throw Error(std::string(what) + " line " + std::to_string(line) + ": empty DESCRIPTION");
      }
      NodeId item;
      try {
        item = kg.add_node(desc, type);
      } catch (const Error& err) {
        throw Error(std::string(what) + " line " + std::to_string(line) + ": " + err.what());
      }
      if (!kg.contains(*e, rel, item)) kg.add_edge({*e, rel, item, Polarity::Positive});
    }
  };
  attach(conditions, "conditions.csv", t_condition, r_ec);
  attach(observations, "observations.csv", t_observation, r_eo);
  return kg;
}

}  // namespace kgflow
