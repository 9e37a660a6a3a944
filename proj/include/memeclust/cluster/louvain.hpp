#pragma once

#include <algorithm>
#include <cstdint>
#include <unordered_map>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "memeclust/cluster/graph.hpp"
#include "memeclust/core/error.hpp"
#include "memeclust/core/types.hpp"

namespace memeclust::cluster {

/// Q = sum_c [ in_c / 2m - (tot_c / 2m)^2 ], where in_c counts both directions of
/// every internal edge and tot_c is the summed degree of community c.
inline double modularity(const WeightedGraph& g, const Partition& p) {
  const double two_m = g.total_weight();
  if (two_m <= 0.0) return 0.0;
  std::uint32_t k = 0;
  for (auto c : p) k = std::max(k, c + 1);
  std::vector<double> in(k, 0.0), tot(k, 0.0);
  for (std::size_t u = 0; u < g.size(); ++u)
    for (const auto& [v, w] : g.adj[u]) {
      tot[p[u]] += w;
      if (p[u] == p[v]) in[p[u]] += w;
    }
  double q = 0.0;
  for (std::uint32_t c = 0; c < k; ++c) q += in[c] / two_m - (tot[c] / two_m) * (tot[c] / two_m);
  return q;
}

inline double modularity(const SparseSimilarityMatrix& a, const Partition& p) {
  if (p.size() != a.n()) throw ContractViolation("partition size differs from matrix order");
  return modularity(WeightedGraph::from_matrix(a), p);
}

struct LouvainResult {
  Partition partition;                  // canonical labels
  double modularity = 0.0;
  std::vector<double> level_modularity; // after each level; non-decreasing
};

namespace louvain_detail {

// One round of local moves. Returns true if any node changed community.
inline bool local_moves(const WeightedGraph& g, Partition& comm, std::mt19937_64& rng, double min_gain) {
  const std::size_t n = g.size();
  const double two_m = g.total_weight();
  std::vector<double> k(n), tot(n, 0.0);
  for (std::size_t u = 0; u < n; ++u) {
    k[u] = g.degree(u);
    tot[comm[u]] += k[u];
  }
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  seeded_shuffle(order, rng);

  std::vector<double> link(n, 0.0);
  std::vector<std::uint32_t> seen;
  bool moved_any = false;
  for (;;) {
    bool moved = false;
    double round_gain = 0.0;
    for (std::uint32_t u : order) {
      if (k[u] == 0.0) continue;
      const std::uint32_t home = comm[u];
      seen.clear();
      for (const auto& [v, w] : g.adj[u]) {
        if (v == u) continue;
        if (link[comm[v]] == 0.0) seen.push_back(comm[v]);
        link[comm[v]] += w;
      }
      tot[home] -= k[u];
      // Gain of joining c, up to a factor shared by all candidates: link(u, c) - tot_c * k_u / 2m.
      const double stay = link[home] - tot[home] * k[u] / two_m;
      std::uint32_t best = home;
      double best_gain = stay;
      for (auto c : seen) {
        const double gain = link[c] - tot[c] * k[u] / two_m;
        if (gain > best_gain || (gain == best_gain && c < best && best != home)) {
          best = c;
          best_gain = gain;
        }
      }
      if (best != home && best_gain - stay <= 1e-12 * two_m) best = home;
      tot[best] += k[u];
      if (best != home) {
        comm[u] = best;
        moved = true;
        moved_any = true;
        round_gain += 2.0 * (best_gain - stay) / two_m;
      }
      for (auto c : seen) link[c] = 0.0;
      link[home] = 0.0;
    }
    if (!moved || round_gain < min_gain) break;
  }
  return moved_any;
}

inline WeightedGraph contract(const WeightedGraph& g, const Partition& comm, std::uint32_t communities) {
  WeightedGraph out;
  out.adj.resize(communities);
  std::vector<std::unordered_map<std::uint32_t, double>> acc(communities);
  for (std::size_t u = 0; u < g.size(); ++u)
    for (const auto& [v, w] : g.adj[u]) acc[comm[u]][comm[v]] += w;
  for (std::uint32_t c = 0; c < communities; ++c) {
    out.adj[c].assign(acc[c].begin(), acc[c].end());
    std::sort(out.adj[c].begin(), out.adj[c].end());
  }
  return out;
}

}  // namespace louvain_detail

/// Two-phase Louvain: local moves until no improvement, then contraction of
/// communities into nodes, repeated while a level improves modularity by at least
/// `min_gain`. Node visit order is shuffled from `seed`.
inline LouvainResult louvain(const SparseSimilarityMatrix& a, std::uint64_t seed, double min_gain = 1e-7) {
  using namespace louvain_detail;
  const std::size_t n = a.n();
  for (const auto& t : a.triplets())
    if (t.value < 0.0f) throw ContractViolation("louvain needs non-negative weights");

  WeightedGraph graph = WeightedGraph::from_matrix(a);
  const WeightedGraph original = graph;
  std::mt19937_64 rng(seed);

  Partition membership(n);
  std::iota(membership.begin(), membership.end(), 0u);
  LouvainResult result;
  double current = modularity(original, membership);
  result.level_modularity.push_back(current);

  for (;;) {
    Partition comm(graph.size());
    std::iota(comm.begin(), comm.end(), 0u);
    const bool moved = local_moves(graph, comm, rng, min_gain);
    if (!moved) break;
    comm = canonical_labels(comm);
    std::uint32_t communities = 0;
    for (auto c : comm) communities = std::max(communities, c + 1);

    Partition next(n);
    for (std::size_t i = 0; i < n; ++i) next[i] = comm[membership[i]];
    const double q = modularity(original, next);
    if (q - current < min_gain) {
      // Level did not pay off; keep the previous partition when it is at least as good.
      if (q > current) {
        membership = next;
        current = q;
        result.level_modularity.push_back(q);
      }
      break;
    }
    membership = std::move(next);
    current = q;
    result.level_modularity.push_back(q);
    graph = contract(graph, comm, communities);
    if (communities == graph.size() && communities == 1) break;
  }
  result.partition = canonical_labels(membership);
  result.modularity = current;
  return result;
}

}  // namespace memeclust::cluster
