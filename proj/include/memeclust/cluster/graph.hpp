#pragma once

#include <cstdint>
#include <random>
#include <unordered_map>
#include <utility>
#include <vector>

#include "memeclust/core/types.hpp"

namespace memeclust::cluster {

/// Community id per node.
using Partition = std::vector<std::uint32_t>;

/// Weighted undirected graph in adjacency-list form. Self-loops are allowed here
/// (they appear after community contraction) and count once toward the node degree.
struct WeightedGraph {
  std::vector<std::vector<std::pair<std::uint32_t, double>>> adj;

  std::size_t size() const noexcept { return adj.size(); }

  static WeightedGraph from_matrix(const SparseSimilarityMatrix& a) {
    WeightedGraph g;
    g.adj.resize(a.n());
    for (const auto& t : a.triplets()) g.adj[t.i].emplace_back(t.j, static_cast<double>(t.value));
    return g;
  }

  double degree(std::size_t u) const {
    double d = 0.0;
    for (const auto& [v, w] : adj[u]) d += w;
    return d;
  }

  double total_weight() const {
    double s = 0.0;
    for (std::size_t u = 0; u < adj.size(); ++u) s += degree(u);
    return s;  // 2m
  }
};

/// Relabels communities 0, 1, 2, ... in order of first appearance.
inline Partition canonical_labels(const Partition& p) {
  std::unordered_map<std::uint32_t, std::uint32_t> remap;
  Partition out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    auto [it, fresh] = remap.emplace(p[i], static_cast<std::uint32_t>(remap.size()));
    out[i] = it->second;
  }
  return out;
}

/// Member lists per community, communities in label order, members ascending.
inline std::vector<std::vector<ImageIndex>> groups(const Partition& p) {
  const Partition c = canonical_labels(p);
  std::vector<std::vector<ImageIndex>> out;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (c[i] >= out.size()) out.resize(c[i] + 1);
    out[c[i]].push_back(static_cast<ImageIndex>(i));
  }
  return out;
}

/// Fisher-Yates shuffle with a fixed generator, so orders are reproducible across
/// standard library implementations.
template <typename T>
void seeded_shuffle(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace memeclust::cluster
