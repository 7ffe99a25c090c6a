#include <gtest/gtest.h>

#include "oracles.hpp"
#include "test_support.hpp"

using namespace kgflow;
namespace c = kgflow::clinical;

namespace {

std::size_t count_direction(const ConnectivityPolicy& p, Direction d) {
  return std::count_if(p.rules().begin(), p.rules().end(), [&](const auto& r) { return r.direction == d; });
}

}  // namespace

TEST(Presets, RuleCounts) {
  const Schema s = c::schema();
  const auto c1 = preset_policy("C1", s), c2 = preset_policy("C2", s), c3 = preset_policy("C3", s),
             c4 = preset_policy("C4", s);
  EXPECT_EQ(c1.size(), 4u);
  EXPECT_EQ(count_direction(c1, Direction::Forward), 4u);
  EXPECT_EQ(c2.size(), 8u);
  EXPECT_EQ(c3.size(), 7u);
  EXPECT_FALSE(c3.contains(make_rule(s, c::kEncounterCareAction, Direction::Reverse)));
  EXPECT_TRUE(c3.contains(make_rule(s, c::kEncounterCareAction, Direction::Forward)));
  ASSERT_EQ(c4.size(), 2u);
  EXPECT_EQ(count_direction(c4, Direction::Reverse), 2u);
  for (const auto& r : c4.rules()) EXPECT_EQ(s.node_type_name(r.target_type), c::kEncounter);
  EXPECT_THROW(preset_policy("C5", s), Error);
  EXPECT_THROW(preset_policy("C1", kgflow::testing::load_string(kgflow::testing::kToyTable).schema()), Error);
}

TEST(Presets, EdgeSetContainment) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Rng rng(seed);
    KnowledgeGraph kg = kgflow::testing::random_clinical_kg(rng);
    synthesize_negative_careaction_edges(kg);
    auto edges = [&](const char* name) {
      return oracle::as_set(build_message_graph(kg, preset_policy(name, kg.schema())));
    };
    const auto c1 = edges("C1"), c2 = edges("C2"), c3 = edges("C3"), c4 = edges("C4");
    auto subset = [](const auto& a, const auto& b) { return std::includes(b.begin(), b.end(), a.begin(), a.end()); };
    EXPECT_TRUE(subset(c1, c3));
    EXPECT_TRUE(subset(c3, c2));
    EXPECT_TRUE(subset(c4, c3));
    EXPECT_EQ(c2.size(), 2 * c1.size());
  }
}

TEST(Policy, ParseAndFormat) {
  const Schema s = c::schema();
  std::istringstream text(
      "# observations and conditions feed encounters\n"
      "observation encounter-observation encounter reverse\n"
      "condition encounter-condition encounter reverse   # trailing comment\n");
  const auto p = parse_policy(text, s);
  EXPECT_EQ(p.rules(), preset_policy("C4", s).rules());

  std::istringstream round(format_policy(preset_policy("C3", s), s));
  EXPECT_EQ(parse_policy(round, s).rules(), preset_policy("C3", s).rules());

  std::istringstream preset("preset C2\n");
  const auto p2 = parse_policy(preset, s);
  EXPECT_EQ(p2.name(), "C2");
  EXPECT_EQ(p2.size(), 8u);

  std::istringstream wrong_types("encounter encounter-observation observation\nobservation encounter-observation encounter\n");
  EXPECT_THROW(parse_policy(wrong_types, s), Error);
  std::istringstream unknown("encounter sees observation\n");
  EXPECT_THROW(parse_policy(unknown, s), Error);
}

TEST(MessageGraph, ToyForwardPolicy) {
  const KnowledgeGraph kg = kgflow::testing::load_string(kgflow::testing::kToyTable);
  ConnectivityPolicy forward;
  for (RelationId r = 0; r < kg.schema().relation_count(); ++r) forward.add(make_rule(kg.schema(), r, Direction::Forward));
  const MessageGraph mg = build_message_graph(kg, forward);
  ASSERT_EQ(mg.size(), 3u);
  const NodeId paul = kg.require_node("Paul"), diabetes = kg.require_node("diabetes");
  for (const auto& e : mg.edges()) EXPECT_FALSE(e.source == paul && e.target == diabetes);
  EXPECT_EQ(mg.relation_count(), 4u);

  EXPECT_EQ(build_message_graph(kg, ConnectivityPolicy{}).size(), 0u);
}

TEST(MessageGraph, CanonicalOrderAndDegrees) {
  Rng rng(5);
  KnowledgeGraph kg = kgflow::testing::random_clinical_kg(rng, 6, 4);
  const MessageGraph mg = build_message_graph(kg, preset_policy("C2", kg.schema()));
  EXPECT_TRUE(std::is_sorted(mg.edges().begin(), mg.edges().end(), canonical_less));
  for (const auto& [key, count] : oracle::in_degrees(oracle::as_set(mg))) {
    EXPECT_EQ(mg.in_degree(key.first, key.second), count);
  }
  EXPECT_EQ(build_message_graph(kg, preset_policy("C2", kg.schema())), mg);
}

TEST(MessageGraph, BruteForceOracle) {
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    Rng rng(seed);
    const KnowledgeGraph kg = oracle::random_graph(rng);
    const ConnectivityPolicy policy = oracle::random_policy(rng, kg.schema());
    const MessageGraph mg = build_message_graph(kg, policy);
    const auto expected = oracle::messages(kg, policy);
    EXPECT_EQ(oracle::as_set(mg), expected) << "seed " << seed;
    EXPECT_EQ(mg.size(), expected.size());
    for (const auto& [key, count] : oracle::in_degrees(expected)) {
      EXPECT_EQ(mg.in_degree(key.first, key.second), count);
    }
  }
}

TEST(InferenceMask, PaperExample) {
  KnowledgeGraph kg(c::schema());
  const NodeId o1 = kg.add_node("O1", c::kObservation);
  const NodeId p1 = kg.add_node("P1", c::kPatient);
  const NodeId e_new = kg.add_node("E*", c::kEncounter);
  const auto& s = kg.schema();
  kg.add_edge({e_new, s.require_relation(c::kEncounterObservation), o1, Polarity::Positive});
  kg.add_edge({p1, s.require_relation(c::kPatientEncounter), e_new, Polarity::Positive});
  ConnectivityPolicy policy;
  policy.add(make_rule(s, c::kEncounterObservation, Direction::Reverse));  // O1 -> E*
  policy.add(make_rule(s, c::kPatientEncounter, Direction::Reverse));      // E* -> P1
  const MessageGraph mg = build_message_graph(kg, policy);
  ASSERT_EQ(mg.size(), 2u);
  const MessageGraph masked = apply_inference_mask(mg, {true, true, false});
  ASSERT_EQ(masked.size(), 1u);
  EXPECT_EQ(masked.edges()[0].source, o1);
  EXPECT_EQ(masked.edges()[0].target, e_new);
  EXPECT_EQ(masked.in_degree(p1, static_cast<std::uint32_t>(s.relation_count() + s.require_relation(c::kPatientEncounter))), 0u);
}

TEST(InferenceMask, PredicateOracle) {
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    Rng rng(seed);
    const KnowledgeGraph kg = oracle::random_graph(rng);
    const MessageGraph mg = build_message_graph(kg, oracle::random_policy(rng, kg.schema()));
    std::vector<bool> seen(kg.node_count());
    for (std::size_t i = 0; i < seen.size(); ++i) seen[i] = rng.bernoulli(0.6);
    const MessageGraph masked = apply_inference_mask(mg, seen);
    EXPECT_EQ(oracle::as_set(masked), oracle::mask(oracle::as_set(mg), seen));
    for (const auto& e : masked.edges()) EXPECT_FALSE(!seen[e.source] && seen[e.target]);
    EXPECT_EQ(apply_inference_mask(mg, std::vector<bool>(kg.node_count(), true)), mg);
  }
}
