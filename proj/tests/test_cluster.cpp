#include <random>

#include <gtest/gtest.h>

#include "helpers.hpp"
#include "memeclust/cluster/dbscan.hpp"
#include "memeclust/cluster/louvain.hpp"

using namespace memeclust;
using namespace memeclust::cluster;

namespace {

SparseSimilarityMatrix two_triangles() {
  return testutil::sym_matrix(6, {{0, 1, 1}, {1, 2, 1}, {0, 2, 1}, {3, 4, 1}, {4, 5, 1}, {3, 5, 1}});
}

SparseSimilarityMatrix cliques_with_bridge() {
  std::vector<std::tuple<int, int, float>> e;
  for (int base : {0, 5})
    for (int i = 0; i < 5; ++i)
      for (int j = i + 1; j < 5; ++j) e.emplace_back(base + i, base + j, 1.0f);
  e.emplace_back(4, 5, 1.0f);
  return testutil::sym_matrix(10, e);
}

// Q straight from the definition: (1/2m) sum_ij [A_ij - k_i k_j / 2m] delta(c_i, c_j).
double modularity_oracle(const SparseSimilarityMatrix& a, const Partition& p) {
  const std::size_t n = a.n();
  std::vector<double> k(n, 0.0);
  double two_m = 0.0;
  for (const auto& t : a.triplets()) {
    k[t.i] += t.value;
    two_m += t.value;
  }
  double q = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (p[i] == p[j]) q += a.at(static_cast<ImageIndex>(i), static_cast<ImageIndex>(j)) - k[i] * k[j] / two_m;
  return q / two_m;
}

SparseSimilarityMatrix random_graph(std::mt19937& rng, int n, double density) {
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<std::tuple<int, int, float>> e;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (u(rng) < density) e.emplace_back(i, j, static_cast<float>(0.05 + u(rng)));
  return testutil::sym_matrix(static_cast<std::size_t>(n), e);
}

}  // namespace

TEST(Modularity, TwoTrianglesTruePartitionIsHalf) {
  EXPECT_NEAR(modularity(two_triangles(), {0, 0, 0, 1, 1, 1}), 0.5, 1e-12);
}

TEST(Modularity, SingleCommunityIsZero) {
  EXPECT_NEAR(modularity(two_triangles(), {0, 0, 0, 0, 0, 0}), 0.0, 1e-12);
  EXPECT_NEAR(modularity(cliques_with_bridge(), Partition(10, 3)), 0.0, 1e-12);
}

TEST(Modularity, AllSingletonsNonPositive) {
  std::mt19937 rng(1);
  for (int t = 0; t < 20; ++t) {
    auto a = random_graph(rng, 12, 0.3);
    if (a.empty()) continue;
    Partition p(12);
    std::iota(p.begin(), p.end(), 0u);
    EXPECT_LE(modularity(a, p), 0.0);
  }
}

TEST(Modularity, MatchesDefinition) {
  std::mt19937 rng(2);
  for (int t = 0; t < 30; ++t) {
    auto a = random_graph(rng, 15, 0.25);
    if (a.empty()) continue;
    Partition p(15);
    for (auto& c : p) c = rng() % 4;
    EXPECT_NEAR(modularity(a, p), modularity_oracle(a, p), 1e-12);
  }
}

TEST(Louvain, TwoTriangles) {
  auto r = louvain(two_triangles(), 1);
  EXPECT_EQ(r.partition, (Partition{0, 0, 0, 1, 1, 1}));
  EXPECT_NEAR(r.modularity, 0.5, 1e-9);
}

TEST(Louvain, EdgelessGraphAllSingletons) {
  auto r = louvain(SparseSimilarityMatrix(5, "x"), 3);
  EXPECT_EQ(r.partition, (Partition{0, 1, 2, 3, 4}));
}

TEST(Louvain, CliquesWithBridgeMatchBestTwoPartition) {
  const auto a = cliques_with_bridge();
  // Brute force over all 2-partitions (node 0 fixed on side 0).
  double best = -1.0;
  Partition arg;
  for (unsigned mask = 0; mask < (1u << 9); ++mask) {
    Partition p(10, 0);
    for (int b = 0; b < 9; ++b) p[b + 1] = (mask >> b) & 1u;
    const double q = modularity_oracle(a, p);
    if (q > best + 1e-12) {
      best = q;
      arg = p;
    }
  }
  EXPECT_EQ(arg, (Partition{0, 0, 0, 0, 0, 1, 1, 1, 1, 1}));
  for (std::uint64_t seed : {0ull, 1ull, 2ull, 99ull}) {
    auto r = louvain(a, seed);
    EXPECT_EQ(r.partition, arg) << "seed " << seed;
    EXPECT_NEAR(r.modularity, best, 1e-9);
  }
}

TEST(Louvain, ModularityNonDecreasingPerLevel) {
  std::mt19937 rng(7);
  for (int t = 0; t < 100; ++t) {
    auto a = random_graph(rng, 20 + t % 40, 0.05 + 0.002 * t);
    auto r = louvain(a, static_cast<std::uint64_t>(t));
    for (std::size_t l = 1; l < r.level_modularity.size(); ++l)
      EXPECT_GE(r.level_modularity[l], r.level_modularity[l - 1] - 1e-12) << "graph " << t;
    EXPECT_NEAR(r.modularity, modularity(a, r.partition), 1e-9);
  }
}

TEST(Louvain, DeterministicGivenSeed) {
  std::mt19937 rng(9);
  auto a = random_graph(rng, 80, 0.06);
  EXPECT_EQ(louvain(a, 5).partition, louvain(a, 5).partition);
}

TEST(Louvain, PlantedCommunitiesRecovered) {
  std::mt19937 rng(12);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<std::tuple<int, int, float>> e;
  for (int i = 0; i < 60; ++i)
    for (int j = i + 1; j < 60; ++j) {
      const bool same = i / 15 == j / 15;
      if (u(rng) < (same ? 0.6 : 0.02)) e.emplace_back(i, j, same ? 1.0f : 0.2f);
    }
  auto r = louvain(testutil::sym_matrix(60, e), 4);
  for (int i = 0; i < 60; ++i) EXPECT_EQ(r.partition[i], r.partition[(i / 15) * 15]) << i;
  EXPECT_NE(r.partition[0], r.partition[15]);
}

TEST(Dbscan, EpsBelowAllDistancesGivesSingletons) {
  auto a = testutil::sym_matrix(4, {{0, 1, 0.5f}, {1, 2, 0.4f}, {2, 3, 0.9f}});
  // distances 1, 1.5, 0.111
  auto p = dbscan(a, {0.1, 2});
  EXPECT_EQ(p, (Partition{0, 1, 2, 3}));
}

TEST(Dbscan, TripleWithMinPtsTwoIsOneCluster) {
  auto a = testutil::sym_matrix(4, {{0, 1, 0.9f}, {1, 2, 0.9f}, {0, 2, 0.9f}});
  auto p = dbscan(a, {0.5, 2});
  EXPECT_EQ(p[0], p[1]);
  EXPECT_EQ(p[1], p[2]);
  EXPECT_NE(p[3], p[0]);  // isolated node stays alone
}

TEST(Dbscan, BorderPointJoinsButDoesNotExpand) {
  // core 0-1-2 chain with min_pts 3; 3 hangs off 2; 4 hangs off 3 only.
  auto a = testutil::sym_matrix(5, {{0, 1, 1}, {1, 2, 1}, {0, 2, 1}, {2, 3, 1}, {3, 4, 1}});
  auto p = dbscan(a, {}); // eps infinite, min_pts 3
  EXPECT_EQ(p[0], p[3]);
  EXPECT_EQ(p[3], p[4]);  // 3 has neighbours {2,4}: core, so 4 is reached
  auto strict = dbscan(a, {std::numeric_limits<double>::infinity(), 4});
  EXPECT_EQ(strict[0], strict[2]);
  EXPECT_EQ(strict[3], strict[0]);  // border of core 2
  EXPECT_NE(strict[4], strict[0]);  // 3 is not core, 4 not reached
}

TEST(Dbscan, SimilarityToDistance) {
  EXPECT_DOUBLE_EQ(similarity_to_distance(1.0), 0.0);
  EXPECT_DOUBLE_EQ(similarity_to_distance(0.5), 1.0);
  EXPECT_DOUBLE_EQ(similarity_to_distance(4.0), 0.0);
  EXPECT_TRUE(std::isinf(similarity_to_distance(0.0)));
}

TEST(Graph, CanonicalLabelsAndGroups) {
  EXPECT_EQ(canonical_labels({7, 7, 3, 9, 3}), (Partition{0, 0, 1, 2, 1}));
  auto g = groups({5, 1, 5, 2});
  ASSERT_EQ(g.size(), 3u);
  EXPECT_EQ(g[0], (std::vector<ImageIndex>{0, 2}));
  EXPECT_EQ(g[1], (std::vector<ImageIndex>{1}));
}
