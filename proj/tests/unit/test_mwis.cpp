#include <gtest/gtest.h>

#include "airtrack/mwis.hpp"
#include "helpers.hpp"

namespace airtrack {
namespace {

ConflictGraph weighted(std::vector<double> w) {
  ConflictGraph g(w.size());
  g.weights = std::move(w);
  return g;
}

TEST(SolveMwis, SingleVertex) {
  const auto r = solve_mwis(weighted({1.0}));
  EXPECT_EQ(r.vertices, std::vector<int>{0});
  EXPECT_EQ(r.total, 1.0);
}

TEST(SolveMwis, TrianglePicksHeaviest) {
  auto g = weighted({1, 2, 3});
  g.add_edge(0, 1);
  g.add_edge(1, 2);
  g.add_edge(0, 2);
  EXPECT_EQ(solve_mwis(g).vertices, std::vector<int>{2});
}

TEST(SolveMwis, PathPrefersEnds) {
  auto g = weighted({2, 3, 2});
  g.add_edge(0, 1);
  g.add_edge(1, 2);
  const auto r = solve_mwis(g);
  EXPECT_EQ(r.vertices, (std::vector<int>{0, 2}));
  EXPECT_EQ(r.total, 4.0);
  EXPECT_EQ(mwis_bruteforce(g).vertices, r.vertices);
}

TEST(SolveMwis, TieBreakIsLexicographic) {
  // {0,2} and {1,3} both weigh 2 on the 4-cycle 0-1-2-3-0
  auto g = weighted({1, 1, 1, 1});
  g.add_edge(0, 1);
  g.add_edge(1, 2);
  g.add_edge(2, 3);
  g.add_edge(3, 0);
  EXPECT_EQ(solve_mwis(g).vertices, (std::vector<int>{0, 2}));
  EXPECT_EQ(mwis_bruteforce(g).vertices, (std::vector<int>{0, 2}));
}

TEST(SolveMwis, EmptyGraph) {
  const ConflictGraph g;
  EXPECT_TRUE(solve_mwis(g).vertices.empty());
  EXPECT_EQ(mwis_bruteforce(g).total, 0.0);
}

TEST(SolveMwis, MatchesBruteForceOnRandomGraphs) {
  Rng rng(2024);
  for (int t = 0; t < 300; ++t) {
    const int n = static_cast<int>(rng.uniform_int(1, 16));
    const auto g = testing::random_graph(rng, n, rng.uniform(0.05, 0.7));
    const auto exact = solve_mwis(g);
    const auto brute = mwis_bruteforce(g);
    ASSERT_EQ(exact.total, brute.total) << "n=" << n << " trial " << t;
    ASSERT_EQ(exact.vertices, brute.vertices);
    ASSERT_TRUE(is_independent(g, exact.vertices));
    ASSERT_EQ(set_weight(g, exact.vertices), exact.total);
  }
}

TEST(SolveMwis, LargeSparseGraphsBeatGreedy) {
  Rng rng(77);
  for (int t = 0; t < 10; ++t) {
    const auto g = testing::random_graph(rng, 80, 0.03);
    const auto exact = solve_mwis(g);
    const auto greedy = mwis_greedy(g);
    EXPECT_TRUE(is_independent(g, exact.vertices));
    EXPECT_TRUE(is_independent(g, greedy.vertices));
    EXPECT_GE(exact.total, greedy.total);
  }
}

TEST(SolveMwis, SizeLimits) {
  const ConflictGraph big(21);
  EXPECT_THROW(mwis_bruteforce(big), Error);
  EXPECT_THROW(solve_mwis(big, 20), Error);
  EXPECT_NO_THROW(solve_mwis(big, 21));
}

TEST(ConflictGraph, EdgesAreSymmetric) {
  ConflictGraph g(4);
  g.add_edge(2, 0);
  g.add_edge(0, 2);
  EXPECT_TRUE(g.adjacent(0, 2));
  EXPECT_TRUE(g.adjacent(2, 0));
  EXPECT_EQ(g.adjacency[0].size(), 1u);
  EXPECT_FALSE(g.adjacent(1, 3));
}

}  // namespace
}  // namespace airtrack
