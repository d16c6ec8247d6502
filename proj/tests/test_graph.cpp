#include <gtest/gtest.h>

#include <algorithm>
#include <cstring>

#include "test_util.hpp"

using namespace ducg;
using namespace testutil;

namespace {

const char* kMinimalChain = R"({
  "variables": [
    {"id": 0, "kind": "B", "states": 2, "prior": [0.4, 0.6]},
    {"id": 1, "kind": "X", "states": 2}
  ],
  "links": [
    {"child": 1, "parent": 0, "r": 1.0, "matrix": [[0.3, 0.8], [0.7, 0.2]]}
  ]
})";

bool has_issue(const ValidationReport& r, const std::string& needle) {
  return std::any_of(r.issues.begin(), r.issues.end(),
                     [&](const std::string& s) { return s.find(needle) != std::string::npos; });
}

}  // namespace

TEST(GraphLoad, MinimalChainIsValid) {
  const Graph g = load_graph(kMinimalChain);
  ASSERT_EQ(g.size(), 2u);
  EXPECT_EQ(g.variable(0).kind, VarKind::B);
  EXPECT_EQ(g.variable(1).states, 2);
  ASSERT_EQ(g.links().size(), 1u);
  EXPECT_DOUBLE_EQ(g.links()[0].matrix(1, 0), 0.7);
}

TEST(GraphLoad, IdsArePreservedVerbatim) {
  const std::string doc = R"({"variables": [
    {"id": 40, "kind": "B", "states": 2, "prior": [0.5, 0.5]},
    {"id": 7, "kind": "X", "states": 2}],
    "links": [{"child": 7, "parent": 40, "r": 2.5, "matrix": [[1, 0], [0, 1]]}]})";
  const Graph g = load_graph(doc);
  EXPECT_TRUE(g.contains(40));
  EXPECT_TRUE(g.contains(7));
  EXPECT_EQ(g.variables().front().id, 7);
  EXPECT_DOUBLE_EQ(g.r_total(7), 2.5);
}

TEST(GraphLoad, CompactDocumentShape) {
  const auto m = compact_fixture();
  const Graph g = load_graph(serialize(m.graph), kCompactTolerance);
  EXPECT_EQ(g.size(), 9u);  // B1 and X2..X9
  EXPECT_EQ(g.links().size(), 17u);
  EXPECT_EQ(g.variable(2).states, 3);
  EXPECT_EQ(g.variable(9).states, 3);
  EXPECT_EQ(std::count_if(g.variables().begin(), g.variables().end(),
                          [](const Variable& v) { return v.kind == VarKind::B; }),
            1);
}

TEST(GraphLoad, ColumnSumOffNamesTheLink) {
  const std::string doc = R"({"variables": [
    {"id": 0, "kind": "B", "states": 2, "prior": [0.5, 0.5]},
    {"id": 1, "kind": "X", "states": 2}],
    "links": [{"child": 1, "parent": 0, "r": 1, "matrix": [[0.5, 0.5], [0.4, 0.5]]}]})";
  try {
    (void)load_graph(doc);
    FAIL() << "expected validation error";
  } catch (const ValidationError& e) {
    ASSERT_EQ(e.issues().size(), 1u);
    EXPECT_NE(e.issues()[0].find("link 0->1"), std::string::npos);
    EXPECT_NE(e.issues()[0].find("column 0"), std::string::npos);
  }
}

TEST(GraphLoad, SyntaxErrorCarriesLine) {
  const std::string doc = "{\n  \"variables\": [\n    {\"id\": 0,, }\n  ]\n}";
  try {
    (void)parse_graph(doc);
    FAIL() << "expected parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(GraphLoad, UnknownKeyIsRejectedWithFieldPath) {
  const std::string doc = R"({"variables": [{"id": 0, "kind": "B", "states": 2, "prior": [1, 0], "colour": 1}],
    "links": []})";
  try {
    (void)parse_graph(doc);
    FAIL() << "expected parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.field(), "variables[0].colour");
  }
}

TEST(GraphLoad, UnknownTopLevelKeyIsRejected) {
  EXPECT_THROW((void)parse_graph(R"({"variables": [], "links": [], "meta": 1})"), ParseError);
}

TEST(GraphLoad, BadMatrixEntryReportsCell) {
  const std::string doc = R"({"variables": [
    {"id": 0, "kind": "B", "states": 2, "prior": [0.5, 0.5]},
    {"id": 1, "kind": "X", "states": 2}],
    "links": [{"child": 1, "parent": 0, "r": 1, "matrix": [[0.5, "x"], [0.5, 0.5]]}]})";
  try {
    (void)parse_graph(doc);
    FAIL() << "expected parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.field(), "links[0].matrix[0][1]");
  }
}

TEST(GraphLoad, BadKindAndMissingField) {
  EXPECT_THROW((void)parse_graph(R"({"variables": [{"id": 0, "kind": "Q", "states": 2}], "links": []})"),
               ParseError);
  try {
    (void)parse_graph(R"({"variables": [{"id": 0, "kind": "X"}], "links": []})");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.field(), "variables[0].states");
  }
}

TEST(Validate, PublishedMatrixPasses) {
  const Graph g({B(1, {0.5, 0.5}), X(2, 3)},
                {L(2, 1, {{0.1890, 0.2490}, {0.3440, 0.4200}, {0.4670, 0.3310}})});
  EXPECT_TRUE(validate(g).ok());
}

TEST(Validate, IdentityPasses) {
  const Graph g({B(0, {0.5, 0.5}), X(1)}, {L(1, 0, {{1, 0}, {0, 1}})});
  EXPECT_TRUE(validate(g).ok());
}

TEST(Validate, CycleDetected) {
  const Graph g({B(0, {0.5, 0.5}), X(1), X(2)},
                {L(1, 0, {{1, 0}, {0, 1}}, 1.0), L(1, 2, {{1, 0}, {0, 1}}), L(2, 1, {{1, 0}, {0, 1}})});
  const auto r = validate(g);
  EXPECT_TRUE(has_issue(r, "cycle detected"));
  EXPECT_FALSE(g.is_acyclic());
}

TEST(Validate, EveryViolationIsListed) {
  Variable bad_b = B(0, {0.7, 0.7});
  Variable x_obs = X(1);
  x_obs.observed = 5;
  const Graph g({bad_b, x_obs, X(2), D(3)},
                {L(1, 0, {{1, 0}, {0, 1}}, -1.0), L(1, 0, {{1, 0}, {0, 1}}), L(3, 1, {{1, 0}})});
  const auto r = validate(g);
  EXPECT_TRUE(has_issue(r, "prior sums to more than 1"));
  EXPECT_TRUE(has_issue(r, "observed state out of range"));
  EXPECT_TRUE(has_issue(r, "r must be positive"));
  EXPECT_TRUE(has_issue(r, "duplicate link"));
  EXPECT_TRUE(has_issue(r, "child must be an X variable"));
  EXPECT_TRUE(has_issue(r, "X2: has no incoming link"));
}

TEST(Validate, CompactFixtureNeedsLooseTolerance) {
  const auto m = compact_fixture();
  const auto strict = validate(m.graph);
  ASSERT_EQ(strict.issues.size(), 1u);
  EXPECT_NE(strict.issues[0].find("link 5->9"), std::string::npos);
  EXPECT_TRUE(validate(m.graph, kCompactTolerance).ok());
}

TEST(Evidence, ChecksKindStateAndObservation) {
  Variable x = X(1);
  x.observed = 0;
  const Graph g({B(0, {0.5, 0.5}), x}, {L(1, 0, {{1, 0}, {0, 1}})});
  EXPECT_TRUE(check_evidence(g, {{1, 0}}).ok());
  EXPECT_FALSE(check_evidence(g, {{1, 1}}).ok());
  EXPECT_FALSE(check_evidence(g, {{0, 0}}).ok());
  EXPECT_FALSE(check_evidence(g, {{9, 0}}).ok());
  EXPECT_EQ(merged_evidence(g, {}), (Evidence{{1, 0}}));
}

TEST(Restrict, CompactKeepsWholeGraph) {
  const auto m = compact_fixture();
  EXPECT_EQ(restrict_to_hypothesis(m.graph, m.evidence, 1), m.graph);
}

TEST(Restrict, DropsNonAncestorOfEvidence) {
  const Graph g = chain({{0.3, 0.6}, {0.7, 0.4}}, {{1, 0}, {0, 1}});
  const Graph sub = restrict_to_hypothesis(g, {{1, 0}}, 0);
  EXPECT_EQ(sub.size(), 2u);
  EXPECT_TRUE(sub.contains(0));
  EXPECT_TRUE(sub.contains(1));
  EXPECT_FALSE(sub.contains(2));
}

TEST(Restrict, EvidenceWithoutRootIsDisconnected) {
  const Graph g({B(0, {0.5, 0.5}), X(1), D(2), X(3)},
                {L(1, 0, {{1, 0}, {0, 1}}), L(3, 2, {{0.5}, {0.5}})});
  EXPECT_THROW((void)restrict_to_hypothesis(g, {{3, 1}}, 0), HypothesisError);
}

TEST(Restrict, KeepsDefaultCauses) {
  const Graph g({B(0, {0.5, 0.5}), D(1), X(2)},
                {L(2, 0, {{1, 0}, {0, 1}}), L(2, 1, {{0.2}, {0.8}})});
  const Graph sub = restrict_to_hypothesis(g, {{2, 1}}, 0);
  EXPECT_EQ(sub, g);
}

TEST(Restrict, OtherRootsAreRemovedAndWeightsRenormalize) {
  const Graph g({B(0, {0.5, 0.5}), B(1, {0.5, 0.5}), X(2)},
                {L(2, 0, {{1, 0}, {0, 1}}, 1.0), L(2, 1, {{0.5, 0.5}, {0.5, 0.5}}, 3.0)});
  const Graph sub = restrict_to_hypothesis(g, {{2, 1}}, 0);
  EXPECT_FALSE(sub.contains(1));
  EXPECT_DOUBLE_EQ(sub.r_total(2), 1.0);
}

TEST(Restrict, IsIdempotentOnRandomGraphs) {
  for (std::uint64_t seed = 1; seed <= 500; ++seed) {
    Gen gen(seed);
    const auto m = random_dag(seed, small_dag(gen, 8));
    for (const auto& v : m.graph.variables()) {
      if (v.kind != VarKind::B) continue;
      Graph once;
      try {
        once = restrict_to_hypothesis(m.graph, m.evidence, v.id);
      } catch (const HypothesisError&) {
        continue;
      }
      EXPECT_EQ(restrict_to_hypothesis(once, m.evidence, v.id), once) << "seed " << seed;
      EXPECT_TRUE(validate(once).ok()) << "seed " << seed;
    }
  }
}

TEST(Layers, FiveGroupExample) {
  const auto m = five_layer_fixture();
  const auto layer = layer_assignment(m.graph, 20);
  for (VarId id = 1; id <= 4; ++id) EXPECT_EQ(layer.at(id), 1);
  for (VarId id = 17; id <= 19; ++id) EXPECT_EQ(layer.at(id), 5);
  EXPECT_EQ(layer.at(20), 0);
  EXPECT_EQ(layer.at(21), 0);
}

TEST(Layers, Chain) {
  const Graph g = chain({{1, 0}, {0, 1}}, {{1, 0}, {0, 1}});
  const auto layer = layer_assignment(g, 0);
  EXPECT_EQ(layer.at(1), 1);
  EXPECT_EQ(layer.at(2), 2);
}

TEST(Layers, DiamondUsesLongestPath) {
  // B0 -> X1, B0 -> X2 -> X3, X3 -> X1
  const Matrix id = Matrix::from_rows({{1, 0}, {0, 1}});
  const Graph g({B(0, {0.5, 0.5}), X(1), X(2), X(3)},
                {{1, 0, 1.0, id}, {2, 0, 1.0, id}, {3, 2, 1.0, id}, {1, 3, 1.0, id}});
  EXPECT_EQ(layer_assignment(g, 0).at(1), 3);
}

TEST(Layers, NonRootHypothesisRejected) {
  const Graph g = chain({{1, 0}, {0, 1}}, {{1, 0}, {0, 1}});
  EXPECT_THROW((void)layer_assignment(g, 1), std::invalid_argument);
}

TEST(Layers, AreATopologicalGrading) {
  for (std::uint64_t seed = 1; seed <= 500; ++seed) {
    Gen gen(seed);
    const auto m = random_dag(seed, small_dag(gen, 10));
    const auto layer = layer_assignment(m.graph);
    for (const auto& v : m.graph.variables()) {
      int best = 0;
      for (VarId p : m.graph.parents(v.id)) {
        EXPECT_GE(layer.at(v.id), layer.at(p) + 1) << "seed " << seed;
        best = std::max(best, layer.at(p) + 1);
      }
      EXPECT_EQ(layer.at(v.id), best) << "seed " << seed;
    }
  }
}

TEST(HypothesisSpace, ListsEveryExplainingRootState) {
  const auto m = five_layer_fixture();
  const auto hs = hypothesis_space(m.graph, m.evidence);
  EXPECT_EQ(hs, (std::vector<Hypothesis>{{20, 0}, {20, 1}, {21, 0}, {21, 1}}));
}

TEST(Serialization, RoundTripIsBitExact) {
  for (std::uint64_t seed = 1; seed <= 300; ++seed) {
    Gen gen(seed);
    const auto m = random_dag(seed, small_dag(gen, 8));
    const Graph back = load_graph(serialize(m.graph));
    ASSERT_EQ(back, m.graph) << "seed " << seed;
    for (std::size_t l = 0; l < back.links().size(); ++l) {
      const auto& a = back.links()[l].matrix;
      const auto& b = m.graph.links()[l].matrix;
      for (int r = 0; r < a.rows(); ++r)
        for (int c = 0; c < a.cols(); ++c) {
          const double x = a(r, c), y = b(r, c);
          EXPECT_EQ(std::memcmp(&x, &y, sizeof(double)), 0);
        }
    }
  }
}

TEST(Serialization, PreservesObservations) {
  const auto m = full_joined(2, 3, 5);
  const Graph back = load_graph(serialize(m.graph));
  EXPECT_EQ(back.observed(), m.evidence);
}

TEST(Serialization, FloatsCarryAtLeastNineDigits) {
  EXPECT_EQ(detail::format_double(0.5), "0.5");
  EXPECT_EQ(detail::format_double(1.0), "1.0");
  EXPECT_EQ(std::stod(detail::format_double(0.1 + 0.2)), 0.1 + 0.2);
  EXPECT_EQ(std::stod(detail::format_double(1.0 / 3.0)), 1.0 / 3.0);
}
