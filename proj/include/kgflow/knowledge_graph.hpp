#pragma once

#include <algorithm>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "kgflow/common.hpp"
#include "kgflow/csv.hpp"

namespace kgflow {

enum class Polarity : std::uint8_t { Negative = 0, Positive = 1 };

struct RelationType {
  std::string name;
  TypeId subject_type = 0;
  TypeId object_type = 0;

  bool operator==(const RelationType&) const = default;
};

// Declared node types and typed relation signatures. IDs are dense and
// assigned in declaration order.
class Schema {
 public:
  TypeId add_node_type(std::string_view name) {
    if (auto t = find_node_type(name)) return *t;
    node_types_.emplace_back(name);
    return static_cast<TypeId>(node_types_.size() - 1);
  }

  // Declares a relation, or returns the existing id when the signature agrees.
  RelationId add_relation(std::string_view name, TypeId subject_type, TypeId object_type) {
    if (auto r = find_relation(name)) {
      const auto& rel = relations_[*r];
      if (rel.subject_type != subject_type || rel.object_type != object_type) {
        throw Error("relation '" + std::string(name) + "' used with inconsistent endpoint types (" +
                    type_name_or(subject_type) + "->" + type_name_or(object_type) + " vs " +
                    type_name_or(rel.subject_type) + "->" + type_name_or(rel.object_type) + ")");
      }
      return *r;
    }
    relations_.push_back({std::string(name), subject_type, object_type});
    return static_cast<RelationId>(relations_.size() - 1);
  }

  std::optional<TypeId> find_node_type(std::string_view name) const {
    for (std::size_t i = 0; i < node_types_.size(); ++i) {
      if (node_types_[i] == name) return static_cast<TypeId>(i);
    }
    return std::nullopt;
  }

  std::optional<RelationId> find_relation(std::string_view name) const {
    for (std::size_t i = 0; i < relations_.size(); ++i) {
      if (relations_[i].name == name) return static_cast<RelationId>(i);
    }
    return std::nullopt;
  }

  TypeId require_node_type(std::string_view name) const {
    if (auto t = find_node_type(name)) return *t;
    throw Error("schema has no node type '" + std::string(name) + "'");
  }

  RelationId require_relation(std::string_view name) const {
    if (auto r = find_relation(name)) return *r;
    throw Error("schema has no relation '" + std::string(name) + "'");
  }

  const std::vector<std::string>& node_types() const { return node_types_; }
  const std::vector<RelationType>& relations() const { return relations_; }
  // Unchecked access, used to build deliberately inconsistent schemas.
  std::vector<RelationType>& raw_relations() { return relations_; }

  const std::string& node_type_name(TypeId t) const { return node_types_.at(t); }
  const RelationType& relation(RelationId r) const { return relations_.at(r); }
  std::size_t node_type_count() const { return node_types_.size(); }
  std::size_t relation_count() const { return relations_.size(); }

  bool operator==(const Schema&) const = default;

 private:
  std::string type_name_or(TypeId t) const {
    return t < node_types_.size() ? node_types_[t] : "#" + std::to_string(t);
  }

  std::vector<std::string> node_types_;
  std::vector<RelationType> relations_;
};

struct Edge {
  NodeId subject = 0;
  RelationId relation = 0;
  NodeId object = 0;
  Polarity polarity = Polarity::Positive;

  bool positive() const { return polarity == Polarity::Positive; }
  bool operator==(const Edge&) const = default;
};

struct TripleKey {
  NodeId subject;
  RelationId relation;
  NodeId object;
  bool operator==(const TripleKey&) const = default;
};

struct TripleKeyHash {
  std::size_t operator()(const TripleKey& k) const noexcept {
    std::uint64_t h = splitmix64((static_cast<std::uint64_t>(k.subject) << 32) | k.object);
    return static_cast<std::size_t>(splitmix64(h ^ k.relation));
  }
};

// Signed, typed, directed multigraph over interned node names.
//
// The checked mutators (add_node, add_edge) keep every invariant: names are
// unique, endpoint types match the relation signature, and no (subject,
// relation, object) triple appears twice. raw_edges() bypasses the checks.
class KnowledgeGraph {
 public:
  KnowledgeGraph() = default;
  explicit KnowledgeGraph(Schema schema) : schema_(std::move(schema)) {}

  const Schema& schema() const { return schema_; }
  Schema& schema() { return schema_; }

  // Interns a node. Re-adding a name with the same type returns its id.
  NodeId add_node(std::string_view name, TypeId type) {
    if (type >= schema_.node_type_count()) {
      throw Error("node '" + std::string(name) + "' has undeclared type #" + std::to_string(type));
    }
    if (auto it = index_.find(std::string(name)); it != index_.end()) {
      if (types_[it->second] != type) {
        throw Error("node '" + std::string(name) + "' appears with two types: " +
                    schema_.node_type_name(types_[it->second]) + " and " +
                    schema_.node_type_name(type));
      }
      return it->second;
    }
    const auto id = static_cast<NodeId>(names_.size());
    names_.emplace_back(name);
    types_.push_back(type);
    index_.emplace(names_.back(), id);
    return id;
  }

  NodeId add_node(std::string_view name, std::string_view type_name) {
    return add_node(name, schema_.add_node_type(type_name));
  }

  void add_edge(const Edge& e) {
    if (e.subject >= node_count() || e.object >= node_count()) {
      throw Error("edge references a node id outside [0, " + std::to_string(node_count()) + ")");
    }
    if (e.relation >= schema_.relation_count()) {
      throw Error("edge references undeclared relation #" + std::to_string(e.relation));
    }
    const auto& rel = schema_.relation(e.relation);
    if (types_[e.subject] != rel.subject_type || types_[e.object] != rel.object_type) {
      throw Error("edge " + names_[e.subject] + " -" + rel.name + "-> " + names_[e.object] +
                  " does not match the relation's endpoint types");
    }
    ensure_index();
    if (!triples_.insert({e.subject, e.relation, e.object}).second) {
      throw Error("duplicate triple (" + names_[e.subject] + ", " + rel.name + ", " +
                  names_[e.object] + ")");
    }
    edges_.push_back(e);
  }

  bool contains(NodeId subject, RelationId relation, NodeId object) const {
    ensure_index();
    return triples_.count({subject, relation, object}) != 0;
  }

  std::optional<NodeId> find_node(std::string_view name) const {
    if (auto it = index_.find(std::string(name)); it != index_.end()) return it->second;
    return std::nullopt;
  }

  NodeId require_node(std::string_view name) const {
    if (auto id = find_node(name)) return *id;
    throw Error("unknown node '" + std::string(name) + "'");
  }

  std::size_t node_count() const { return names_.size(); }
  std::size_t edge_count() const { return edges_.size(); }
  const std::string& node_name(NodeId id) const { return names_.at(id); }
  TypeId node_type(NodeId id) const { return types_.at(id); }
  const std::vector<std::string>& node_names() const { return names_; }
  const std::vector<TypeId>& node_types() const { return types_; }
  const std::vector<Edge>& edges() const { return edges_; }

  // Unchecked mutable edge list. Any later checked call re-derives the
  // duplicate index from the current contents.
  std::vector<Edge>& raw_edges() {
    index_dirty_ = true;
    return edges_;
  }

  std::vector<NodeId> nodes_of_type(TypeId type) const {
    std::vector<NodeId> out;
    for (NodeId i = 0; i < types_.size(); ++i) {
      if (types_[i] == type) out.push_back(i);
    }
    return out;
  }

 private:
  void ensure_index() const {
    if (!index_dirty_) return;
    triples_.clear();
    for (const auto& e : edges_) triples_.insert({e.subject, e.relation, e.object});
    index_dirty_ = false;
  }

  Schema schema_;
  std::vector<std::string> names_;
  std::vector<TypeId> types_;
  std::unordered_map<std::string, NodeId> index_;
  std::vector<Edge> edges_;
  mutable std::unordered_set<TripleKey, TripleKeyHash> triples_;
  mutable bool index_dirty_ = false;
};

// ---------------------------------------------------------------------------
// Triple table: subject,relation,object,subject_type,object_type,link_type
// ---------------------------------------------------------------------------

inline constexpr std::string_view kTripleTableHeader =
    "subject,relation,object,subject_type,object_type,link_type";

struct TripleRow {
  std::string subject, relation, object, subject_type, object_type;
  bool positive = true;

  auto operator<=>(const TripleRow&) const = default;
};

// Adds one row to `kg`, interning names, types and relations on demand.
inline void add_triple(KnowledgeGraph& kg, const TripleRow& row) {
  const TypeId st = kg.schema().add_node_type(row.subject_type);
  const TypeId ot = kg.schema().add_node_type(row.object_type);
  const NodeId s = kg.add_node(row.subject, st);
  const RelationId r = kg.schema().add_relation(row.relation, st, ot);
  const NodeId o = kg.add_node(row.object, ot);
  kg.add_edge({s, r, o, row.positive ? Polarity::Positive : Polarity::Negative});
}

// Builds a graph from rows. Node ids follow first appearance in the subject
// column, then first appearance in the object column; relation and type ids
// follow row order.
inline KnowledgeGraph from_rows(const std::vector<TripleRow>& rows) {
  KnowledgeGraph kg;
  auto located = [](std::size_t i, const Error& e) {
    return Error("row " + std::to_string(i + 1) + ": " + e.what());
  };
  for (std::size_t i = 0; i < rows.size(); ++i) {
    try {
      kg.add_node(rows[i].subject, kg.schema().add_node_type(rows[i].subject_type));
    } catch (const Error& e) {
      throw located(i, e);
    }
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    try {
      kg.add_node(rows[i].object, kg.schema().add_node_type(rows[i].object_type));
    } catch (const Error& e) {
      throw located(i, e);
    }
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    try {
      add_triple(kg, rows[i]);
    } catch (const Error& e) {
      throw located(i, e);
    }
  }
  return kg;
}

inline KnowledgeGraph load_triple_table(std::istream& in) {
  csv::Reader reader(in);
  auto header_row = reader.next();
  if (!header_row) throw Error("triple table: missing header");
  const csv::Header header(*header_row);
  const std::size_t cs = header.require("subject", "triple table");
  const std::size_t cr = header.require("relation", "triple table");
  const std::size_t co = header.require("object", "triple table");
  const std::size_t cst = header.require("subject_type", "triple table");
  const std::size_t cot = header.require("object_type", "triple table");
  const std::size_t cl = header.require("link_type", "triple table");

  std::vector<TripleRow> rows;
  while (auto row = reader.next()) {
    const std::string where = "triple table line " + std::to_string(reader.line()) + ": ";
    if (row->size() != header.size()) {
      throw Error(where + "expected " + std::to_string(header.size()) + " fields, got " +
                  std::to_string(row->size()));
    }
    TripleRow t{(*row)[cs], (*row)[cr], (*row)[co], (*row)[cst], (*row)[cot], true};
    const std::string& link = (*row)[cl];
    if (link == "True") {
      t.positive = true;
    } else if (link == "False") {
      t.positive = false;
    } else {
      throw Error(where + "link_type must be True or False, got '" + link + "'");
    }
    if (t.subject.empty() || t.object.empty() || t.relation.empty() || t.subject_type.empty() ||
        t.object_type.empty()) {
      throw Error(where + "empty field");
    }
    rows.push_back(std::move(t));
  }
  try {
    return from_rows(rows);
  } catch (const Error& e) {
    throw Error(std::string("triple table data ") + e.what());
  }
}

inline TripleRow to_row(const KnowledgeGraph& kg, const Edge& e) {
  const auto& s = kg.schema();
  return {kg.node_name(e.subject), s.relation(e.relation).name, kg.node_name(e.object),
          s.node_type_name(kg.node_type(e.subject)), s.node_type_name(kg.node_type(e.object)),
          e.positive()};
}

inline std::vector<TripleRow> to_rows(const KnowledgeGraph& kg) {
  std::vector<TripleRow> rows;
  rows.reserve(kg.edge_count());
  for (const auto& e : kg.edges()) rows.push_back(to_row(kg, e));
  return rows;
}

inline void write_triple_table(std::ostream& out, const KnowledgeGraph& kg) {
  out << kTripleTableHeader << '\n';
  for (const auto& e : kg.edges()) {
    const TripleRow r = to_row(kg, e);
    csv::write_row(out, {r.subject, r.relation, r.object, r.subject_type, r.object_type,
                         r.positive ? "True" : "False"});
  }
}

}  // namespace kgflow
