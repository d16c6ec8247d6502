#include <gtest/gtest.h>

#include <chrono>
#include <numeric>

#include "oracles.hpp"
#include "test_util.hpp"

using namespace ducg;
using namespace testutil;

namespace {

constexpr double kCompactExact = 7.939915e-2;
// Brute-force value over the 48 joint states of X2..X6, frozen.
constexpr double kCompactFrozen = 0.0793991547408975;

}  // namespace

TEST(Conditional, EqualWeightsAverageColumns) {
  const Graph g({B(0, {0.5, 0.5}), B(1, {0.5, 0.5}), X(2)},
                {L(2, 0, {{1, 0}, {0, 1}}), L(2, 1, {{1, 0}, {0, 1}})});
  const auto p = conditional_distribution(g, 2, {{0, 0}, {1, 1}});
  EXPECT_DOUBLE_EQ(p[0], 0.5);
  EXPECT_DOUBLE_EQ(p[1], 0.5);
}

TEST(Conditional, SingleParentSelectsColumn) {
  const Graph g({B(0, {0.5, 0.5}), X(1)}, {L(1, 0, {{0.9, 0.3}, {0.1, 0.7}})});
  const auto p = conditional_distribution(g, 1, {{0, 1}});
  EXPECT_DOUBLE_EQ(p[0], 0.3);
  EXPECT_DOUBLE_EQ(p[1], 0.7);
}

TEST(Conditional, CompactBottomNodeGivenZeros) {
  const auto g = compact_fixture().graph;
  const auto p = conditional_distribution(g, 7, {{4, 0}, {5, 0}, {6, 0}});
  EXPECT_NEAR(p[0], (0.0100 + 0.4660 + 0.4990) / 3, 1e-15);
  EXPECT_NEAR(p[1], (0.9900 + 0.5340 + 0.5010) / 3, 1e-15);
  EXPECT_NEAR(p[0], 0.325, 1e-12);
  EXPECT_NEAR(p[1], 0.675, 1e-12);
}

TEST(Conditional, MissingParentOrWrongKind) {
  const auto g = compact_fixture().graph;
  EXPECT_THROW((void)conditional_distribution(g, 7, {{4, 0}, {5, 0}}), std::invalid_argument);
  EXPECT_THROW((void)conditional_distribution(g, 1, {}), std::invalid_argument);
}

TEST(Conditional, AlwaysSumsToOne) {
  for (std::uint64_t seed = 1; seed <= 300; ++seed) {
    Gen gen(seed);
    const auto m = random_dag(seed, small_dag(gen, 8));
    for (const auto& v : m.graph.variables()) {
      if (v.kind != VarKind::X) continue;
      std::map<VarId, int> ps;
      for (VarId p : m.graph.parents(v.id)) ps[p] = gen.below(m.graph.variable(p).states);
      const auto d = conditional_distribution(m.graph, v.id, ps);
      EXPECT_NEAR(std::accumulate(d.begin(), d.end(), 0.0), 1.0, 1e-12) << "seed " << seed;
    }
  }
}

TEST(Enumerate, CompactFixtureExactValue) {
  const auto m = compact_fixture();
  const auto t0 = std::chrono::steady_clock::now();
  const double p = enumerate_likelihood(m.graph, m.evidence, m.hypothesis);
  EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(), 5.0);
  EXPECT_NEAR(p, kCompactExact, 1e-6);
  EXPECT_NEAR(p, kCompactFrozen, 1e-15);
  EXPECT_NEAR(oracle::likelihood(m.graph, m.evidence, m.hypothesis), kCompactFrozen, 1e-15);
}

TEST(Enumerate, ChainSingleLink) {
  const Graph g({B(0, {0.5, 0.5}), X(1)}, {L(1, 0, {{0.9, 0.3}, {0.1, 0.7}})});
  EXPECT_DOUBLE_EQ(enumerate_likelihood(g, {{1, 1}}, {0, 1}), 0.7);
}

TEST(Enumerate, FullJoinedTwoMatchesSymbolic) {
  const auto m = full_joined(2, 3, 1);
  EXPECT_NEAR(enumerate_likelihood(m.graph, m.evidence, m.hypothesis),
              symbolic_likelihood(m.graph, m.evidence, m.hypothesis), 1e-9);
}

TEST(Enumerate, CapSignalsInfeasible) {
  const auto m = full_joined(5);
  EXPECT_THROW((void)enumerate_likelihood(m.graph, m.evidence, m.hypothesis), InfeasibleError);
  const auto small = full_joined(2);
  EXPECT_THROW((void)enumerate_likelihood(small.graph, small.evidence, small.hypothesis, {.max_joint_states = 10}),
               InfeasibleError);
}

TEST(Enumerate, RejectsBadHypothesisAndEvidence) {
  const auto m = compact_fixture();
  EXPECT_THROW((void)enumerate_likelihood(m.graph, m.evidence, {2, 0}), std::invalid_argument);
  EXPECT_THROW((void)enumerate_likelihood(m.graph, m.evidence, {1, 5}), std::invalid_argument);
  EXPECT_THROW((void)enumerate_likelihood(m.graph, {{7, 4}}, m.hypothesis), ValidationError);
}

TEST(Enumerate, ImpossibleEvidenceGivesZero) {
  const Graph g({B(0, {0.5, 0.5}), X(1), X(2)}, {L(1, 0, {{1, 1}, {0, 0}}), L(2, 1, {{1, 0}, {0, 1}})});
  EXPECT_EQ(enumerate_likelihood(g, {{2, 1}}, {0, 0}), 0.0);
  EXPECT_EQ(enumerate_likelihood(g, {{2, 1}}, {0, 1}), 0.0);
}

TEST(BackendAgreement, EnumerationSymbolicAndBruteForce) {
  int checked = 0;
  for (std::uint64_t seed = 1; seed <= 1000; ++seed) {
    Gen gen(seed);
    const auto m = random_dag(seed, small_dag(gen, 8));
    int unknown = 0;
    for (const auto& v : m.graph.variables())
      if (v.kind == VarKind::X && !m.evidence.contains(v.id)) ++unknown;
    ASSERT_LE(unknown, 8);
    const double e = enumerate_likelihood(m.graph, m.evidence, m.hypothesis);
    const double s = symbolic_likelihood(m.graph, m.evidence, m.hypothesis);
    const double o = oracle::likelihood(m.graph, m.evidence, m.hypothesis);
    EXPECT_NEAR(e, s, 1e-9) << "seed " << seed;
    EXPECT_NEAR(e, o, 1e-12) << "seed " << seed;
    EXPECT_GE(e, 0.0);
    EXPECT_LE(e, 1.0 + 1e-12);
    ++checked;
  }
  EXPECT_EQ(checked, 1000);
}

TEST(Propagation, ChainThroughIdentity) {
  const Graph g = chain({{0.9, 0.3}, {0.1, 0.7}}, {{1, 0}, {0, 1}});
  const auto m = marginal_propagation(g, {0, 1});
  EXPECT_DOUBLE_EQ(m.at(2)[0], 0.3);
  EXPECT_DOUBLE_EQ(m.at(2)[1], 0.7);
}

TEST(Propagation, CompactFirstLinkIsSelectedColumn) {
  const auto m = marginal_propagation(compact_fixture().graph, {1, 1});
  EXPECT_EQ(m.at(2), (std::vector<double>{0.249, 0.42, 0.331}));
}

TEST(Propagation, SingleEvidenceMarginalIsLikelihood) {
  for (std::uint64_t seed = 1; seed <= 300; ++seed) {
    Gen gen(seed);
    auto o = small_dag(gen, 8);
    o.evidence_count = 1;
    const auto m = random_dag(seed, o);
    const auto& [e, s] = *m.evidence.begin();
    EXPECT_NEAR(marginal_propagation(m.graph, m.hypothesis).at(e)[s],
                enumerate_likelihood(m.graph, m.evidence, m.hypothesis), 1e-12)
        << "seed " << seed;
  }
}

TEST(Propagation, MatchesBruteForceMarginals) {
  for (std::uint64_t seed = 1; seed <= 1000; ++seed) {
    Gen gen(seed);
    const auto m = random_dag(seed, small_dag(gen, 8));
    const auto prop = marginal_propagation(m.graph, m.hypothesis);
    for (const auto& v : m.graph.variables()) {
      if (v.kind != VarKind::X) continue;
      const auto want = oracle::marginal(m.graph, m.hypothesis, v.id);
      for (int s = 0; s < v.states; ++s) EXPECT_NEAR(prop.at(v.id)[s], want[s], 1e-9) << "seed " << seed;
    }
  }
}

TEST(Propagation, ClampFixesObservedVariables) {
  const auto m = full_joined(2, 3, 4);
  const Evidence clamp{{3, 2}};
  const auto prop = marginal_propagation(m.graph, m.hypothesis, {.clamp = &clamp});
  EXPECT_EQ(prop.at(3), (std::vector<double>{0.0, 0.0, 1.0}));
  const auto want = oracle::clamped_marginal(m.graph, m.hypothesis, clamp, 5);
  for (int s = 0; s < 3; ++s) EXPECT_NEAR(prop.at(5)[s], want[s], 1e-12);
}

TEST(Posterior, Examples) {
  const auto one = posterior({HypothesisResult{{0, 0}, 0.3}}, std::vector<double>{0.2});
  EXPECT_DOUBLE_EQ(one[0].posterior, 1.0);

  auto two = posterior({HypothesisResult{{0, 0}, 0.04}, HypothesisResult{{0, 1}, 0.04}}, std::vector<double>{0.5, 0.5});
  EXPECT_DOUBLE_EQ(two[0].joint, 0.02);
  EXPECT_DOUBLE_EQ(two[0].posterior, 0.5);
  EXPECT_DOUBLE_EQ(two[1].posterior, 0.5);

  auto skew = posterior({HypothesisResult{{0, 0}, 0.03}, HypothesisResult{{0, 1}, 0.01}}, std::vector<double>{1.0, 1.0});
  EXPECT_DOUBLE_EQ(skew[0].posterior, 0.75);
  EXPECT_DOUBLE_EQ(skew[1].posterior, 0.25);
}

TEST(Posterior, AllZeroIsImpossible) {
  EXPECT_THROW((void)posterior({HypothesisResult{{0, 0}, 0.0}, HypothesisResult{{0, 1}, 0.0}},
                               std::vector<double>{0.5, 0.5}),
               HypothesisError);
}

TEST(Posterior, SumsToOneOverAllHypotheses) {
  for (std::uint64_t seed = 1; seed <= 300; ++seed) {
    Gen gen(seed);
    const auto m = random_dag(seed, small_dag(gen, 6));
    std::vector<HypothesisResult> rs;
    for (const auto& h : hypothesis_space(m.graph, m.evidence)) {
      const Graph sub = restrict_to_hypothesis(m.graph, m.evidence, h.var);
      rs.push_back({h, enumerate_likelihood(sub, m.evidence, h)});
    }
    if (rs.empty()) continue;
    std::vector<HypothesisResult> out;
    try {
      out = posterior(rs, m.graph);
    } catch (const HypothesisError&) {
      continue;
    }
    double total = 0.0;
    for (const auto& r : out) {
      total += r.posterior;
      EXPECT_NEAR(r.joint, r.likelihood * prior_of(m.graph, r.hypothesis), 1e-12);
    }
    EXPECT_NEAR(total, 1.0, 1e-12) << "seed " << seed;
  }
}
