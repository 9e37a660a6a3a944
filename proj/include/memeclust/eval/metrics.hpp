#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "memeclust/core/error.hpp"
#include "memeclust/core/types.hpp"

namespace memeclust::eval {

using Labels = std::vector<std::optional<std::string>>;

/// Clusters with fewer labeled images than this are left out of consistency and entropy.
inline constexpr std::size_t kMinLabeledPerCluster = 3;

struct ClusterScore {
  std::size_t cluster = 0;  // position in the input cluster list
  std::size_t labeled = 0;  // weight
  double score = 0.0;
};

struct MetricReport {
  double weighted = 0.0;
  std::vector<ClusterScore> clusters;  // eligible clusters only
};

/// Label histogram of one cluster; unlabeled images are skipped.
inline std::map<std::string, std::size_t> label_counts(const std::vector<ImageIndex>& cluster, const Labels& labels) {
  std::map<std::string, std::size_t> counts;
  for (ImageIndex i : cluster) {
    if (i >= labels.size()) throw ContractViolation("cluster member outside the label table");
    if (labels[i]) ++counts[*labels[i]];
  }
  return counts;
}

/// max_k n_k / sum_j n_j for one label histogram.
inline double consistency_of(const std::map<std::string, std::size_t>& counts) {
  std::size_t total = 0, top = 0;
  for (const auto& [label, c] : counts) {
    total += c;
    top = std::max(top, c);
  }
  if (total == 0) throw UndefinedResultError("consistency of a cluster without labeled images");
  return static_cast<double>(top) / static_cast<double>(total);
}

/// Shannon entropy in bits of one label histogram, with 0 log 0 = 0.
inline double entropy_of(const std::map<std::string, std::size_t>& counts) {
  std::size_t total = 0;
  for (const auto& [label, c] : counts) total += c;
  if (total == 0) throw UndefinedResultError("entropy of a cluster without labeled images");
  double h = 0.0;
  for (const auto& [label, c] : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / static_cast<double>(total);
    h -= p * std::log2(p);
  }
  return h;
}

namespace detail {

template <typename Score>
MetricReport weighted_metric(const std::vector<std::vector<ImageIndex>>& clusters, const Labels& labels, Score score,
                             const char* name) {
  MetricReport r;
  double num = 0.0, den = 0.0;
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    const auto counts = label_counts(clusters[c], labels);
    std::size_t labeled = 0;
    for (const auto& [label, k] : counts) labeled += k;
    if (labeled < kMinLabeledPerCluster) continue;
    const double s = score(counts);
    r.clusters.push_back({c, labeled, s});
    num += static_cast<double>(labeled) * s;
    den += static_cast<double>(labeled);
  }
  if (r.clusters.empty())
    throw UndefinedResultError(std::string(name) + " undefined: no cluster has " +
                               std::to_string(kMinLabeledPerCluster) + " or more labeled images");
  r.weighted = num / den;
  return r;
}

}  // namespace detail

/// Size-weighted consistency over clusters holding at least three labeled images.
inline MetricReport consistency(const std::vector<std::vector<ImageIndex>>& clusters, const Labels& labels) {
  return detail::weighted_metric(clusters, labels, consistency_of, "consistency");
}

/// Size-weighted label entropy (bits) under the same eligibility rule as consistency.
inline MetricReport cluster_entropy(const std::vector<std::vector<ImageIndex>>& clusters, const Labels& labels) {
  return detail::weighted_metric(clusters, labels, entropy_of, "entropy");
}

/// One relatedness answer placed on the rank axis.
struct RankedOutcome {
  std::size_t rank = 0;
  bool success = false;
  double weight = 1.0;  // size of the judged cluster
};

struct CurvePoint {
  std::size_t rank = 0;
  double accuracy = 0.0;

  bool operator==(const CurvePoint&) const = default;
};

/// Weighted accuracy over outcomes with rank in (r - window, r], for every r where
/// that window holds at least one outcome.
inline std::vector<CurvePoint> moving_average_accuracy(const std::vector<RankedOutcome>& outcomes,
                                                       std::size_t window = 1500) {
  std::vector<CurvePoint> curve;
  if (outcomes.empty() || window == 0) return curve;
  std::size_t lo = outcomes.front().rank, hi = outcomes.front().rank;
  for (const auto& o : outcomes) {
    lo = std::min(lo, o.rank);
    hi = std::max(hi, o.rank);
  }
  const std::size_t end = hi + window;  // exclusive
  std::vector<double> num(end - lo + 1, 0.0), den(end - lo + 1, 0.0);
  for (const auto& o : outcomes) {
    num[o.rank - lo + 1] += o.success ? o.weight : 0.0;
    den[o.rank - lo + 1] += o.weight;
  }
  for (std::size_t k = 1; k < num.size(); ++k) {
    num[k] += num[k - 1];
    den[k] += den[k - 1];
  }
  // Prefix index p covers ranks [lo, lo + p).
  for (std::size_t r = lo; r < end; ++r) {
    const std::size_t upto = r - lo + 1;
    const std::size_t from = r + 1 >= lo + window ? r + 1 - window - lo : 0;
    const double w = den[upto] - den[from];
    if (w <= 0.0) continue;
    curve.push_back({r, (num[upto] - num[from]) / w});
  }
  return curve;
}

}  // namespace memeclust::eval
