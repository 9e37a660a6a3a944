#pragma once

#include <cstdint>
#include <deque>
#include <limits>
#include <vector>

#include "memeclust/cluster/graph.hpp"
#include "memeclust/core/types.hpp"

namespace memeclust::cluster {

/// Distance derived from a similarity cell: 1/A - 1, floored at 0 (cells can exceed 1
/// after local accumulation or aggregation).
inline double similarity_to_distance(double a) {
  if (a <= 0.0) return std::numeric_limits<double>::infinity();
  return std::max(0.0, 1.0 / a - 1.0);
}

struct DbscanParams {
  double eps = std::numeric_limits<double>::infinity();  // infinite: every stored edge is a neighbour
  std::size_t min_pts = 3;                                 // neighbourhood size including the point
};

/// Density clustering over the graph's stored edges. Noise points end up as singletons.
inline Partition dbscan(const SparseSimilarityMatrix& a, const DbscanParams& params) {
  const std::size_t n = a.n();
  const WeightedGraph g = WeightedGraph::from_matrix(a);
  auto neighbours = [&](std::size_t u) {
    std::vector<std::uint32_t> out;
    for (const auto& [v, w] : g.adj[u])
      if (similarity_to_distance(w) <= params.eps) out.push_back(v);
    return out;
  };

  constexpr std::uint32_t kUnset = std::numeric_limits<std::uint32_t>::max();
  Partition label(n, kUnset);
  std::uint32_t next = 0;
  for (std::size_t p = 0; p < n; ++p) {
    if (label[p] != kUnset) continue;
    auto nb = neighbours(p);
    if (nb.size() + 1 < params.min_pts) continue;  // noise for now; may become a border point later
    const std::uint32_t cid = next++;
    label[p] = cid;
    std::deque<std::uint32_t> frontier(nb.begin(), nb.end());
    while (!frontier.empty()) {
      const std::uint32_t q = frontier.front();
      frontier.pop_front();
      if (label[q] != kUnset) continue;
      label[q] = cid;
      auto qn = neighbours(q);
      if (qn.size() + 1 >= params.min_pts)
        for (auto r : qn)
          if (label[r] == kUnset) frontier.push_back(r);
    }
  }
  for (auto& l : label)
    if (l == kUnset) l = next++;
  return canonical_labels(label);
}

}  // namespace memeclust::cluster
