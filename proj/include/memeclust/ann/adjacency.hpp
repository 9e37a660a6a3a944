#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "memeclust/ann/knn.hpp"
#include "memeclust/core/error.hpp"
#include "memeclust/core/types.hpp"

namespace memeclust::ann {

enum class Symmetrization { max, mean };

struct AdjacencyConfig {
  std::size_t k = 100;
  double sparsity_epsilon = 0.001;
  Symmetrization symmetrization = Symmetrization::max;

  void validate() const {
    if (k < 1) throw ContractViolation("k must be at least 1");
    if (!(sparsity_epsilon > 0.0 && sparsity_epsilon < 1.0))
      throw ContractViolation("sparsity_epsilon must lie in (0, 1)");
  }
};

/// Vectors of a feature set laid out for indexing, L2-normalized, with their owners.
struct IndexedVectors {
  std::vector<FeatureVector> vectors;
  std::vector<ImageIndex> owners;
  std::vector<std::uint32_t> slots;
};

inline IndexedVectors gather_vectors(const FeatureSet& set, const CorpusManifest& manifest) {
  set.validate();
  // Sorting entries by manifest index keeps results independent of file order.
  std::vector<std::pair<ImageIndex, const FeatureEntry*>> order;
  order.reserve(set.entries.size());
  for (const auto& e : set.entries) {
    auto idx = manifest.find(e.image_id);
    if (!idx) throw InvariantError("feature entry for image '" + e.image_id + "' not in the manifest");
    order.emplace_back(*idx, &e);
  }
  std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

  IndexedVectors out;
  for (const auto& [idx, entry] : order)
    for (std::size_t s = 0; s < entry->vectors.size(); ++s) {
      out.vectors.push_back(l2_normalize(entry->vectors[s], entry->image_id));
      out.owners.push_back(idx);
      out.slots.push_back(static_cast<std::uint32_t>(s));
    }
  return out;
}

/// Turns directed cell values into a symmetric matrix; cells below epsilon are dropped.
inline SparseSimilarityMatrix symmetrize(std::size_t n, std::string meta, const std::map<std::pair<ImageIndex, ImageIndex>, double>& directed,
                                         Symmetrization mode, double epsilon) {
  std::vector<Triplet> out;
  out.reserve(directed.size() * 2);
  for (const auto& [key, value] : directed) {
    const auto [i, j] = key;
    auto rev = directed.find({j, i});
    const double other = rev == directed.end() ? 0.0 : rev->second;
    if (rev != directed.end() && j < i) continue;  // pair already emitted from the other side
    const double v = mode == Symmetrization::max ? std::max(value, other) : 0.5 * (value + other);
    const float f = static_cast<float>(v);
    if (!(f >= epsilon) || f <= 0.0f) continue;
    out.push_back({i, j, f});
    out.push_back({j, i, f});
  }
  return SparseSimilarityMatrix(n, std::move(meta), std::move(out));
}

/// A[i, j] = s(d(g_i, g_j)) for each of the k nearest foreign images j, thresholded and symmetrized.
inline SparseSimilarityMatrix build_global_adjacency(const FeatureSet& set, const CorpusManifest& manifest,
                                                     const AdjacencyConfig& cfg) {
  cfg.validate();
  if (set.scope != FeatureScope::global) throw ContractViolation("global adjacency needs a global feature set");
  auto iv = gather_vectors(set, manifest);
  const FlatIndex index(set.dim, iv.vectors, iv.owners, iv.slots);
  std::map<std::pair<ImageIndex, ImageIndex>, double> directed;
  index.self_join(cfg.k, [&](std::size_t q, const NeighborResult& result) {
    const ImageIndex i = index.owner(q);
    for (const auto& nb : result) {
      const double s = distance_to_similarity(nb.distance);
      if (s >= cfg.sparsity_epsilon) directed[{i, nb.image}] = s;
    }
  });
  return symmetrize(manifest.size(), std::string(to_string(set.kind)), directed, cfg.symmetrization,
                    cfg.sparsity_epsilon);
}

/// A[i, j] = sum over local vectors f_ik of i, over retrieved f_jl of image j, of s(d(f_ik, f_jl)).
/// The epsilon threshold applies to the accumulated cell.
inline SparseSimilarityMatrix build_local_adjacency(const FeatureSet& set, const CorpusManifest& manifest,
                                                    const AdjacencyConfig& cfg) {
  cfg.validate();
  if (set.scope != FeatureScope::local) throw ContractViolation("local adjacency needs a local feature set");
  auto iv = gather_vectors(set, manifest);
  const FlatIndex index(set.dim, iv.vectors, iv.owners, iv.slots);

  std::map<std::pair<ImageIndex, ImageIndex>, double> directed;
  std::vector<double> row(manifest.size(), 0.0);
  std::vector<ImageIndex> touched;
  ImageIndex current = 0;
  bool open = false;
  auto flush = [&] {
    std::sort(touched.begin(), touched.end());
    for (ImageIndex j : touched) {
      if (row[j] >= cfg.sparsity_epsilon) directed[{current, j}] = row[j];
      row[j] = 0.0;
    }
    touched.clear();
  };
  index.self_join(cfg.k, [&](std::size_t q, const NeighborResult& result) {
    const ImageIndex i = index.owner(q);
    if (open && i != current) flush();
    current = i;
    open = true;
    for (const auto& nb : result) {
      if (row[nb.image] == 0.0) touched.push_back(nb.image);
      row[nb.image] += distance_to_similarity(nb.distance);
    }
  });
  if (open) flush();
  return symmetrize(manifest.size(), std::string(to_string(set.kind)), directed, cfg.symmetrization,
                    cfg.sparsity_epsilon);
}

inline SparseSimilarityMatrix build_adjacency(const FeatureSet& set, const CorpusManifest& manifest,
                                              const AdjacencyConfig& cfg) {
  return set.scope == FeatureScope::global ? build_global_adjacency(set, manifest, cfg)
                                           : build_local_adjacency(set, manifest, cfg);
}

}  // namespace memeclust::ann
