#include <gtest/gtest.h>

#include <map>
#include <set>

#include "test_support.hpp"

using namespace kgflow;
using kgflow::testing::kToyTable;
using kgflow::testing::load_string;

TEST(TripleTable, ToyTableIds) {
  const KnowledgeGraph kg = load_string(kToyTable);
  ASSERT_EQ(kg.node_count(), 6u);
  ASSERT_EQ(kg.edge_count(), 4u);
  const std::vector<std::string> names = {"Orla", "Paul", "London", "cholesterol", "New York", "diabetes"};
  EXPECT_EQ(kg.node_names(), names);
  EXPECT_EQ(kg.schema().require_relation("born"), 0u);
  EXPECT_EQ(kg.schema().require_relation("has"), 1u);

  std::vector<int> labels;
  std::vector<std::pair<NodeId, NodeId>> pairs;
  for (const auto& e : kg.edges()) {
    labels.push_back(e.positive() ? 1 : 0);
    pairs.emplace_back(e.subject, e.object);
  }
  EXPECT_EQ(labels, (std::vector<int>{1, 1, 1, 0}));
  const std::vector<std::pair<NodeId, NodeId>> index = {{0, 2}, {0, 3}, {1, 4}, {1, 5}};
  EXPECT_EQ(pairs, index);
  EXPECT_EQ(kg.schema().node_type_name(kg.node_type(0)), "person");
  EXPECT_EQ(kg.schema().node_type_name(kg.node_type(5)), "disease");
}

TEST(TripleTable, HeaderOnly) {
  const KnowledgeGraph kg = load_string("subject,relation,object,subject_type,object_type,link_type\n");
  EXPECT_EQ(kg.node_count(), 0u);
  EXPECT_EQ(kg.edge_count(), 0u);
}

TEST(TripleTable, Errors) {
  const std::string header = "subject,relation,object,subject_type,object_type,link_type\n";
  EXPECT_THROW(load_string(""), Error);
  EXPECT_THROW(load_string(header + "a,r,b,x,y\n"), Error);
  EXPECT_THROW(load_string(header + "a,r,b,x,y,Maybe\n"), Error);
  // a typed both x and z
  EXPECT_THROW(load_string(header + "a,r,b,x,y,True\na,s,c,z,y,True\n"), Error);
  EXPECT_THROW(load_string(header + "a,r,b,x,y,True\na,r,b,x,y,False\n"), Error);
  // r reused with other endpoint types
  EXPECT_THROW(load_string(header + "a,r,b,x,y,True\nc,r,d,y,x,True\n"), Error);
  try {
    load_string(header + "a,r,b,x,y,True\na,r,b,x,y,True\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("row 2"), std::string::npos) << e.what();
  }
}

TEST(TripleTable, QuotedFields) {
  const KnowledgeGraph kg = load_string(
      "subject,relation,object,subject_type,object_type,link_type\n"
      "\"Body mass index, adult\",r,\"say \"\"hi\"\"\",x,y,True\n");
  EXPECT_EQ(kg.node_name(0), "Body mass index, adult");
  EXPECT_EQ(kg.node_name(1), "say \"hi\"");
  const KnowledgeGraph again = load_string(kgflow::testing::table_string(kg));
  EXPECT_EQ(again.node_names(), kg.node_names());
}

// Round trip on random valid tables, compared as sorted row lists.
TEST(TripleTable, RandomRoundTrip) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed);
    const std::vector<std::string> types = {"t0", "t1", "t2"};
    std::map<std::string, std::string> type_of;
    for (int i = 0; i < 30; ++i) type_of["n" + std::to_string(i)] = types[rng.below(types.size())];
    std::set<std::tuple<std::string, std::string, std::string>> used;
    std::vector<TripleRow> rows;
    while (rows.size() < 100) {
      const std::string s = "n" + std::to_string(rng.below(30));
      const std::string o = "n" + std::to_string(rng.below(30));
      const std::string r = "rel_" + type_of[s] + "_" + type_of[o];
      if (!used.insert({s, r, o}).second) continue;
      rows.push_back({s, r, o, type_of[s], type_of[o], rng.bernoulli(0.7)});
    }
    std::ostringstream text;
    write_triple_rows(text, rows);
    const KnowledgeGraph kg = load_string(text.str());
    EXPECT_EQ(kgflow::testing::sorted(to_rows(kg)), kgflow::testing::sorted(rows));

    const KnowledgeGraph again = load_string(kgflow::testing::table_string(kg));
    EXPECT_EQ(again.node_names(), kg.node_names());
    EXPECT_EQ(again.edges(), kg.edges());
    for (const auto& e : kg.edges()) {
      EXPECT_LT(e.subject, kg.node_count());
      EXPECT_LT(e.object, kg.node_count());
    }
  }
}

TEST(KnowledgeGraph, AddEdgeChecks) {
  KnowledgeGraph kg(clinical::schema());
  const NodeId p = kg.add_node("p", clinical::kPatient);
  const NodeId e = kg.add_node("e", clinical::kEncounter);
  const RelationId pe = kg.schema().require_relation(clinical::kPatientEncounter);
  kg.add_edge({p, pe, e, Polarity::Positive});
  EXPECT_THROW(kg.add_edge({p, pe, e, Polarity::Negative}), Error);
  EXPECT_THROW(kg.add_edge({e, pe, p, Polarity::Positive}), Error);
  EXPECT_THROW(kg.add_edge({p, pe, 7, Polarity::Positive}), Error);
  EXPECT_THROW(kg.add_node("p", clinical::kEncounter), Error);
  EXPECT_EQ(kg.add_node("p", clinical::kPatient), p);
  EXPECT_TRUE(kg.contains(p, pe, e));
  EXPECT_FALSE(kg.contains(e, pe, p));
}

TEST(Schema, ClinicalShape) {
  const Schema s = clinical::schema();
  EXPECT_EQ(s.node_type_count(), 5u);
  EXPECT_EQ(s.relation_count(), 4u);
  for (const auto& r : s.relations()) {
    EXPECT_LT(r.subject_type, s.node_type_count());
    EXPECT_LT(r.object_type, s.node_type_count());
  }
}
