#pragma once

// Template identification by thresholded graph clustering, template matching with
// incremental ranking, and the direct-clustering baseline.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "memeclust/cluster/dbscan.hpp"
#include "memeclust/cluster/graph.hpp"
#include "memeclust/cluster/louvain.hpp"
#include "memeclust/core/error.hpp"
#include "memeclust/core/types.hpp"

namespace memeclust::templates {

enum class Algorithm { louvain, dbscan };

inline constexpr std::string_view to_string(Algorithm a) { return a == Algorithm::louvain ? "louvain" : "dbscan"; }

inline Algorithm parse_algorithm(std::string_view s) {
  if (s == "louvain") return Algorithm::louvain;
  if (s == "dbscan") return Algorithm::dbscan;
  throw FormatError("unknown clustering algorithm '" + std::string(s) + "'");
}

struct ClusterSettings {
  Algorithm algorithm = Algorithm::louvain;
  std::uint64_t seed = 0;
  cluster::DbscanParams dbscan{};
};

inline cluster::Partition run_clustering(const SparseSimilarityMatrix& a, const ClusterSettings& s) {
  if (s.algorithm == Algorithm::louvain) return cluster::louvain(a, s.seed).partition;
  return cluster::dbscan(a, s.dbscan);
}

/// Drops every triplet below `theta` (values equal to theta survive).
inline SparseSimilarityMatrix filter_matrix(const SparseSimilarityMatrix& a, double theta) {
  if (theta < 0.0) throw ContractViolation("theta must be non-negative");
  std::vector<Triplet> kept;
  kept.reserve(a.nnz());
  for (const auto& t : a.triplets())
    if (t.value >= theta) kept.push_back(t);
  return SparseSimilarityMatrix(a.n(), a.meta(), std::move(kept));
}

/// Clusters with at least two members, each ascending, in canonical label order.
inline std::vector<std::vector<ImageIndex>> non_singleton_clusters(const cluster::Partition& p) {
  std::vector<std::vector<ImageIndex>> out;
  for (auto& g : cluster::groups(p))
    if (g.size() >= 2) out.push_back(std::move(g));
  return out;
}

inline std::size_t coverage(const std::vector<std::vector<ImageIndex>>& clusters) {
  std::size_t c = 0;
  for (const auto& g : clusters) c += g.size();
  return c;
}

struct ThresholdSearch {
  double theta = 0.0;
  double percentile = 0.0;  // share of stored cells strictly below theta, in [0, 100]
  std::vector<std::vector<ImageIndex>> clusters;
  std::size_t covered = 0;
  int iterations = 0;
};

inline constexpr double kCoverageTolerance = 0.02;
inline constexpr int kMaxSearchIterations = 30;

/// Finds the filter threshold whose clustering (singletons dropped) covers about
/// `target` images: binary search over the distinct stored values, at most 30
/// evaluations, stopping within 2% of the target or keeping the closest result.
inline ThresholdSearch search_threshold(const SparseSimilarityMatrix& a, std::size_t target,
                                        const ClusterSettings& settings) {
  if (target > a.n())
    throw ContractViolation("coverage target " + std::to_string(target) + " exceeds corpus size " +
                            std::to_string(a.n()));
  std::vector<float> values;
  values.reserve(a.nnz());
  for (const auto& t : a.triplets()) values.push_back(t.value);
  std::sort(values.begin(), values.end());
  std::vector<float> distinct = values;
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

  const double tol = kCoverageTolerance * static_cast<double>(target);
  auto within = [&](std::size_t covered) {
    return std::abs(static_cast<double>(covered) - static_cast<double>(target)) <= tol;
  };
  auto evaluate = [&](double theta) {
    ThresholdSearch r;
    r.theta = theta;
    const auto below = std::lower_bound(values.begin(), values.end(), static_cast<float>(theta)) - values.begin();
    r.percentile = values.empty() ? 0.0 : 100.0 * static_cast<double>(below) / static_cast<double>(values.size());
    r.clusters = non_singleton_clusters(run_clustering(filter_matrix(a, theta), settings));
    r.covered = coverage(r.clusters);
    return r;
  };

  // The loosest filter bounds what any threshold can reach.
  ThresholdSearch best = evaluate(0.0);
  int iterations = 1;
  best.iterations = iterations;
  if (within(best.covered)) return best;
  if (best.covered < target) throw UnreachableTargetError(target, best.covered);

  auto closer = [&](const ThresholdSearch& cand, const ThresholdSearch& cur) {
    const double dc = std::abs(static_cast<double>(cand.covered) - static_cast<double>(target));
    const double du = std::abs(static_cast<double>(cur.covered) - static_cast<double>(target));
    return dc < du || (dc == du && cand.theta > cur.theta);
  };
  // Coverage falls as the index into `distinct` grows.
  std::size_t lo = 0, hi = distinct.size() - 1;
  while (lo <= hi && iterations < kMaxSearchIterations) {
    const std::size_t mid = lo + (hi - lo) / 2;
    ThresholdSearch r = evaluate(distinct[mid]);
    ++iterations;
    const bool too_many = r.covered > target;
    if (closer(r, best)) best = std::move(r);
    if (within(best.covered)) break;
    if (too_many) {
      lo = mid + 1;
    } else {
      if (mid == 0) break;
      hi = mid - 1;
    }
  }
  best.iterations = iterations;
  return best;
}

struct TemplateSet {
  std::vector<std::vector<ImageIndex>> templates;  // disjoint, each of size >= 2
  double theta = 0.0;
  Algorithm algorithm = Algorithm::louvain;
  std::string dimension;  // meta of the source matrix
  std::size_t target = 0;

  std::size_t member_count() const { return coverage(templates); }
};

/// Clusters the matrix filtered at the threshold that makes template members total
/// about `target_images`.
inline TemplateSet identify_templates(const SparseSimilarityMatrix& a, std::size_t target_images,
                                      const ClusterSettings& settings) {
  auto found = search_threshold(a, target_images, settings);
  TemplateSet t;
  t.templates = std::move(found.clusters);
  t.theta = found.theta;
  t.algorithm = settings.algorithm;
  t.dimension = a.meta();
  t.target = target_images;
  return t;
}

/// Row-sliced view over a row-major matrix.
class RowIndex {
 public:
  explicit RowIndex(const SparseSimilarityMatrix& a) : a_(&a), offsets_(a.n() + 1, 0) {
    for (const auto& t : a.triplets()) ++offsets_[t.i + 1];
    for (std::size_t r = 0; r < a.n(); ++r) offsets_[r + 1] += offsets_[r];
  }
  std::span<const Triplet> row(ImageIndex i) const {
    return {a_->triplets().data() + offsets_[i], offsets_[i + 1] - offsets_[i]};
  }

 private:
  const SparseSimilarityMatrix* a_;
  std::vector<std::size_t> offsets_;
};

/// s_j = mean over template members m of A[j, m], for every image j (absent cells are 0).
inline std::vector<double> template_similarity_vector(const RowIndex& rows, std::size_t n,
                                                      const std::vector<ImageIndex>& members) {
  if (members.empty()) throw ContractViolation("template has no members");
  std::vector<double> s(n, 0.0);
  // A is symmetric, so column m of A equals row m.
  for (ImageIndex m : members)
    for (const auto& t : rows.row(m)) s[t.j] += t.value;
  for (double& v : s) v /= static_cast<double>(members.size());
  return s;
}

inline std::vector<double> template_similarity_vector(const SparseSimilarityMatrix& a,
                                                      const std::vector<ImageIndex>& members) {
  return template_similarity_vector(RowIndex(a), a.n(), members);
}

struct Assignment {
  ImageIndex image = 0;
  std::uint32_t template_index = 0;  // argmax template; lowest index on ties
  double score = 0.0;                // max_sim
  std::size_t rank = 0;              // 1 = highest score

  bool operator==(const Assignment&) const = default;
};

/// Non-template images ordered by rank.
struct AssignmentRanking {
  std::vector<Assignment> entries;
};

inline AssignmentRanking assign_and_rank(const SparseSimilarityMatrix& a, const TemplateSet& templates) {
  const std::size_t n = a.n();
  std::vector<char> member(n, 0);
  for (const auto& t : templates.templates)
    for (ImageIndex m : t) {
      if (m >= n) throw ContractViolation("template member outside the matrix");
      if (member[m]) throw ContractViolation("templates are not disjoint");
      member[m] = 1;
    }
  const RowIndex rows(a);
  std::vector<double> best(n, 0.0);
  std::vector<std::uint32_t> arg(n, 0);
  for (std::uint32_t ti = 0; ti < templates.templates.size(); ++ti) {
    const auto s = template_similarity_vector(rows, n, templates.templates[ti]);
    for (std::size_t j = 0; j < n; ++j)
      if (s[j] > best[j]) {
        best[j] = s[j];
        arg[j] = ti;
      }
  }
  AssignmentRanking out;
  for (std::size_t j = 0; j < n; ++j)
    if (!member[j]) out.entries.push_back({static_cast<ImageIndex>(j), arg[j], best[j], 0});
  std::sort(out.entries.begin(), out.entries.end(), [](const Assignment& x, const Assignment& y) {
    return x.score != y.score ? x.score > y.score : x.image < y.image;
  });
  for (std::size_t r = 0; r < out.entries.size(); ++r) out.entries[r].rank = r + 1;
  return out;
}

struct ClusteredImage {
  ImageIndex image = 0;
  std::uint32_t cluster = 0;
  std::optional<double> score;      // template-similarity score of matched images
  std::optional<std::size_t> rank;  // position in the ranking of matched images
  bool is_template_member = false;

  bool operator==(const ClusteredImage&) const = default;
};

/// A set of clustered images; images not listed are unclustered.
struct Clustering {
  std::vector<ClusteredImage> images;  // ascending by image index

  std::size_t size() const { return images.size(); }

  std::vector<std::vector<ImageIndex>> clusters() const {
    std::vector<std::vector<ImageIndex>> out;
    for (const auto& c : images) {
      if (c.cluster >= out.size()) out.resize(c.cluster + 1);
      out[c.cluster].push_back(c.image);
    }
    std::erase_if(out, [](const auto& g) { return g.empty(); });
    return out;
  }

  bool operator==(const Clustering&) const = default;
};

inline Clustering clustering_from_groups(const std::vector<std::vector<ImageIndex>>& groups) {
  Clustering c;
  for (std::uint32_t g = 0; g < groups.size(); ++g)
    for (ImageIndex i : groups[g]) c.images.push_back({i, g, std::nullopt, std::nullopt, false});
  std::sort(c.images.begin(), c.images.end(), [](const auto& x, const auto& y) { return x.image < y.image; });
  return c;
}

struct IncrementResult {
  Clustering clustering;
  std::size_t effective_total = 0;
  bool clamped = false;  // requested total exceeded the corpus
};

/// Template members plus the top (n_total - members) ranked images, each merged into
/// its assigned template. Images with score 0 have no template evidence and become singletons.
inline IncrementResult cluster_at_increment(const TemplateSet& templates, const AssignmentRanking& ranking,
                                            std::size_t n_total) {
  const std::size_t members = templates.member_count();
  if (n_total < members)
    throw ContractViolation("increment " + std::to_string(n_total) + " is below the " + std::to_string(members) +
                            " template members");
  IncrementResult r;
  const std::size_t corpus = members + ranking.entries.size();
  r.clamped = n_total > corpus;
  r.effective_total = std::min(n_total, corpus);

  const auto k = static_cast<std::uint32_t>(templates.templates.size());
  for (std::uint32_t t = 0; t < k; ++t)
    for (ImageIndex m : templates.templates[t]) r.clustering.images.push_back({m, t, std::nullopt, std::nullopt, true});
  std::uint32_t next_singleton = k;
  for (std::size_t e = 0; e < r.effective_total - members; ++e) {
    const auto& as = ranking.entries[e];
    const std::uint32_t cid = as.score > 0.0 ? as.template_index : next_singleton++;
    r.clustering.images.push_back({as.image, cid, as.score, as.rank, false});
  }
  std::sort(r.clustering.images.begin(), r.clustering.images.end(),
            [](const auto& x, const auto& y) { return x.image < y.image; });
  return r;
}

struct StandardClustering {
  std::size_t target = 0;
  double theta = 0.0;
  double percentile = 0.0;
  Clustering clustering;
};

/// Direct clustering baseline: for each coverage target, filter at the matching
/// percentile and cluster everything that survives; no template step.
inline std::vector<StandardClustering> standard_cluster(const SparseSimilarityMatrix& a,
                                                        const std::vector<std::size_t>& targets,
                                                        const ClusterSettings& settings) {
  if (!std::is_sorted(targets.begin(), targets.end())) throw ContractViolation("targets must be ascending");
  std::vector<StandardClustering> out;
  if (a.empty()) {
    // Nothing connects: every image stands alone at every target.
    std::vector<std::vector<ImageIndex>> singles(a.n());
    for (ImageIndex i = 0; i < a.n(); ++i) singles[i] = {i};
    for (std::size_t target : targets) out.push_back({target, 0.0, 0.0, clustering_from_groups(singles)});
    return out;
  }
  for (std::size_t target : targets) {
    auto found = search_threshold(a, target, settings);
    out.push_back({target, found.theta, found.percentile, clustering_from_groups(found.clusters)});
  }
  return out;
}

}  // namespace memeclust::templates
