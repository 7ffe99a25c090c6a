#include <gtest/gtest.h>

#include <map>
#include <set>

#include "test_support.hpp"

using namespace kgflow;
namespace c = kgflow::clinical;

namespace {

struct SyntheaFiles {
  std::string patients = "Id,BIRTHDATE\n";
  std::string encounters = "Id,START,PATIENT,ENCOUNTERCLASS,DESCRIPTION\n";
  std::string conditions = "START,PATIENT,ENCOUNTER,CODE,DESCRIPTION\n";
  std::string observations = "DATE,PATIENT,ENCOUNTER,CODE,DESCRIPTION,VALUE\n";

  KnowledgeGraph ingest() const {
    std::istringstream p(patients), e(encounters), cnd(conditions), o(observations);
    return ingest_clinical_csv(p, e, cnd, o);
  }
};

std::size_t lines(const std::string& s) { return std::count(s.begin(), s.end(), '\n') - 1; }

}  // namespace

TEST(Synthea, MinimalRecord) {
  SyntheaFiles f;
  f.patients += "p1,1970-01-01\n";
  f.encounters += "e1,2020-01-01,p1,wellness,Checkup\n";
  f.conditions += "2020-01-01,p1,e1,123,Hypertension\n";
  const KnowledgeGraph kg = f.ingest();
  EXPECT_EQ(kg.node_count(), 4u);
  EXPECT_EQ(kg.edge_count(), 3u);
  for (const auto& e : kg.edges()) EXPECT_TRUE(e.positive());
  EXPECT_TRUE(validate_kg(kg).ok());
}

TEST(Synthea, RejectsUnknownClass) {
  SyntheaFiles f;
  f.patients += "p1,1970-01-01\n";
  f.encounters += "e1,2020-01-01,p1,wellness,Checkup\n";
  f.encounters += "e2,2020-02-01,p1,urgentcare,Sprain\n";
  try {
    f.ingest();
    FAIL() << "expected an error";
  } catch (const Error& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("urgentcare"), std::string::npos) << msg;
  }
}

TEST(Synthea, RejectsDanglingReferences) {
  SyntheaFiles f;
  f.patients += "p1,1970-01-01\n";
  f.encounters += "e1,2020-01-01,p1,wellness,Checkup\n";
  SyntheaFiles bad_obs = f;
  bad_obs.observations += "2020-01-01,p1,e9,8302-2,Body Height,180\n";
  EXPECT_THROW(bad_obs.ingest(), Error);
  SyntheaFiles bad_patient = f;
  bad_patient.encounters += "e2,2020-01-01,p7,wellness,Checkup\n";
  EXPECT_THROW(bad_patient.ingest(), Error);
}

// Node and edge counts of a 50-patient export against plain counting over
// the generated CSV lines.
TEST(Synthea, CountsMatchLineCounting) {
  Rng rng(42);
  SyntheaFiles f;
  std::set<std::string> classes, obs_names, cond_names;
  std::set<std::pair<std::string, std::string>> obs_pairs, cond_pairs;
  std::size_t encounters = 0;
  for (int p = 0; p < 50; ++p) {
    const std::string pid = "patient-" + std::to_string(p);
    f.patients += pid + ",1980-05-05\n";
    const int n_enc = 1 + static_cast<int>(rng.below(6));
    for (int k = 0; k < n_enc; ++k) {
      const std::string eid = pid + "-enc-" + std::to_string(k);
      const std::string cls(care_action_name(kCareActions[rng.below(5)]));
      classes.insert(cls);
      f.encounters += eid + ",2020-01-01," + pid + "," + cls + ",Visit\n";
      ++encounters;
      for (int j = 0; j < 4; ++j) {
        const std::string o = "Obs " + std::to_string(rng.below(30));
        f.observations += "2020-01-01," + pid + "," + eid + ",x,\"" + o + "\",1.0\n";
        obs_names.insert(o);
        obs_pairs.insert({eid, o});
      }
      for (int j = 0; j < 2; ++j) {
        const std::string cn = "Cond, type " + std::to_string(rng.below(20));
        f.conditions += "2020-01-01," + pid + "," + eid + ",y,\"" + cn + "\"\n";
        cond_names.insert(cn);
        cond_pairs.insert({eid, cn});
      }
    }
  }
  const KnowledgeGraph kg = f.ingest();
  ASSERT_EQ(lines(f.encounters), encounters);
  EXPECT_EQ(kg.node_count(),
            lines(f.patients) + encounters + classes.size() + obs_names.size() + cond_names.size());
  EXPECT_EQ(kg.edge_count(), 2 * encounters + obs_pairs.size() + cond_pairs.size());
  EXPECT_TRUE(validate_kg(kg).ok());
}

TEST(Negatives, FourPerEncounter) {
  KnowledgeGraph kg(c::schema());
  ensure_care_action_nodes(kg);
  const NodeId e = kg.add_node("e", c::kEncounter);
  const RelationId rel = kg.schema().require_relation(c::kEncounterCareAction);
  kg.add_edge({e, rel, kg.require_node("inpatient"), Polarity::Positive});
  EXPECT_EQ(synthesize_negative_careaction_edges(kg), 4u);
  std::set<std::string> negatives;
  for (const auto& edge : kg.edges()) {
    if (!edge.positive()) negatives.insert(kg.node_name(edge.object));
  }
  EXPECT_EQ(negatives, (std::set<std::string>{"wellness", "outpatient", "ambulatory", "emergency"}));
  EXPECT_EQ(synthesize_negative_careaction_edges(kg), 0u);
}

TEST(Negatives, NoEncounters) {
  KnowledgeGraph kg = kgflow::testing::load_string(kgflow::testing::kToyTable);
  EXPECT_EQ(synthesize_negative_careaction_edges(kg), 0u);
}

TEST(Negatives, RequiresExactlyOnePositive) {
  KnowledgeGraph kg(c::schema());
  ensure_care_action_nodes(kg);
  kg.add_node("e", c::kEncounter);
  EXPECT_THROW(synthesize_negative_careaction_edges(kg), Error);
  const RelationId rel = kg.schema().require_relation(c::kEncounterCareAction);
  kg.add_edge({kg.require_node("e"), rel, kg.require_node("wellness"), Polarity::Positive});
  kg.add_edge({kg.require_node("e"), rel, kg.require_node("emergency"), Polarity::Positive});
  EXPECT_THROW(synthesize_negative_careaction_edges(kg), Error);
}

// Per encounter, the added negatives are exactly all care actions minus the
// positive one.
TEST(Negatives, SetDifferenceOracle) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed);
    KnowledgeGraph kg = kgflow::testing::random_clinical_kg(rng, 5, 5);
    const auto before = kg.edges();
    const auto encounters = kg.nodes_of_type(kg.schema().require_node_type(c::kEncounter));
    const std::size_t added = synthesize_negative_careaction_edges(kg);
    EXPECT_EQ(added, 4 * encounters.size());

    const RelationId rel = kg.schema().require_relation(c::kEncounterCareAction);
    std::set<std::pair<NodeId, NodeId>> expected;
    for (NodeId e : encounters) {
      std::set<NodeId> all;
      for (NodeId a : care_action_nodes(kg)) all.insert(a);
      for (const auto& edge : before) {
        if (edge.subject == e && edge.relation == rel) all.erase(edge.object);
      }
      for (NodeId a : all) expected.insert({e, a});
    }
    std::set<std::pair<NodeId, NodeId>> got;
    for (const auto& edge : kg.edges()) {
      if (!edge.positive()) got.insert({edge.subject, edge.object});
    }
    EXPECT_EQ(got, expected);
  }
}

TEST(Split, SizesAndDisjointness) {
  GenConfig gen;
  gen.seed = 3;
  gen.encounters_per_patient = 4;
  KnowledgeGraph kg = from_rows(generate_dataset(gen));
  ensure_care_action_nodes(kg);
  synthesize_negative_careaction_edges(kg);
  const auto s = split_by_patients(kg, 50, 10, 9);
  const auto patients = [](const KnowledgeGraph& g, std::string_view type) {
    std::set<std::string> names;
    for (NodeId i : g.nodes_of_type(g.schema().require_node_type(type))) names.insert(g.node_name(i));
    return names;
  };
  const auto train_p = patients(s.train, c::kPatient), test_p = patients(s.test, c::kPatient);
  EXPECT_EQ(train_p.size(), 50u);
  EXPECT_EQ(test_p.size(), 10u);
  for (const auto& p : test_p) EXPECT_FALSE(train_p.count(p));
  for (const auto& e : patients(s.test, c::kEncounter)) EXPECT_FALSE(patients(s.train, c::kEncounter).count(e));
  EXPECT_EQ(patients(s.train, c::kObservation), patients(kg, c::kObservation));
  EXPECT_EQ(patients(s.test, c::kCareAction).size(), 5u);
  EXPECT_TRUE(validate_kg(s.train).ok());
  EXPECT_TRUE(validate_kg(s.test).ok());

  const auto again = split_by_patients(kg, 50, 10, 9);
  EXPECT_EQ(again.train.node_names(), s.train.node_names());
  EXPECT_EQ(again.test.edges(), s.test.edges());
  EXPECT_THROW(split_by_patients(kg, 55, 10, 1), Error);
}

TEST(Split, UniformTestMembership) {
  GenConfig gen;
  gen.encounters_per_patient = 1;
  gen.seed = 11;
  const KnowledgeGraph kg = from_rows(generate_dataset(gen));
  std::map<std::string, int> in_test;
  const int trials = 2000;
  for (int seed = 1; seed <= trials; ++seed) {
    const auto s = split_by_patients(kg, 50, 10, static_cast<std::uint64_t>(seed));
    for (NodeId i : s.test.nodes_of_type(s.test.schema().require_node_type(c::kPatient))) {
      ++in_test[s.test.node_name(i)];
    }
  }
  for (NodeId i : kg.nodes_of_type(kg.schema().require_node_type(c::kPatient))) {
    const double freq = in_test[kg.node_name(i)] / static_cast<double>(trials);
    EXPECT_NEAR(freq, 10.0 / 60.0, 0.03) << kg.node_name(i);
  }
}

// ---------------------------------------------------------------------------
// Validation against an independent checker
// ---------------------------------------------------------------------------

namespace {

struct Counts {
  std::size_t schema = 0, dangling = 0, duplicate = 0, care = 0;
  bool operator==(const Counts&) const = default;
};

Counts reference_check(const KnowledgeGraph& kg) {
  Counts n;
  const auto& s = kg.schema();
  std::map<std::tuple<NodeId, RelationId, NodeId>, int> seen;
  std::map<NodeId, int> positives;
  for (const auto& e : kg.edges()) {
    if (e.subject >= kg.node_count() || e.object >= kg.node_count() || e.relation >= s.relation_count()) {
      ++n.dangling;
      continue;
    }
    const auto& rel = s.relation(e.relation);
    if (kg.node_type(e.subject) != rel.subject_type || kg.node_type(e.object) != rel.object_type) ++n.schema;
    if (seen[{e.subject, e.relation, e.object}]++ > 0) ++n.duplicate;
    if (rel.name == c::kEncounterCareAction && e.positive()) ++positives[e.subject];
  }
  const TypeId enc = s.require_node_type(c::kEncounter);
  for (NodeId i = 0; i < kg.node_count(); ++i) {
    if (kg.node_type(i) == enc && positives[i] != 1) ++n.care;
  }
  return n;
}

Counts counts_of(const ValidationReport& r) {
  return {r.count(FindingKind::SchemaViolation), r.count(FindingKind::DanglingReference),
          r.count(FindingKind::DuplicateTriple), r.count(FindingKind::CareActionRule)};
}

}  // namespace

TEST(Validate, ToyTableClean) {
  EXPECT_TRUE(validate_kg(kgflow::testing::load_string(kgflow::testing::kToyTable)).ok());
}

TEST(Validate, InjectedDuplicate) {
  KnowledgeGraph kg = kgflow::testing::load_string(kgflow::testing::kToyTable);
  kg.raw_edges().push_back(kg.edges().front());
  const auto report = validate_kg(kg);
  EXPECT_EQ(report.findings.size(), 1u);
  EXPECT_EQ(report.count(FindingKind::DuplicateTriple), 1u);
}

TEST(Validate, RandomCorruptionsMatchReference) {
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    Rng rng(seed);
    KnowledgeGraph kg = kgflow::testing::random_clinical_kg(rng, 3, 3, 4);
    auto& edges = kg.raw_edges();
    const int corruptions = 1 + static_cast<int>(rng.below(4));
    for (int k = 0; k < corruptions; ++k) {
      const std::size_t pick = rng.below(edges.size());
      switch (rng.below(5)) {
        case 0: edges.push_back(edges[pick]); break;
        case 1: edges[pick].object = static_cast<NodeId>(kg.node_count() + rng.below(3)); break;
        case 2: std::swap(edges[pick].subject, edges[pick].object); break;
        case 3: edges.erase(edges.begin() + static_cast<std::ptrdiff_t>(pick)); break;
        case 4: edges[pick].relation = static_cast<RelationId>(rng.below(6)); break;
      }
    }
    EXPECT_EQ(counts_of(validate_kg(kg)), reference_check(kg)) << "seed " << seed;
  }
}
