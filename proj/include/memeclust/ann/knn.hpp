#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <Eigen/Dense>

#include "memeclust/core/error.hpp"
#include "memeclust/core/types.hpp"

namespace memeclust::ann {

/// Unit-length copy of `v`. Throws on zero or non-finite input, naming `owner`.
inline FeatureVector l2_normalize(const FeatureVector& v, std::string_view owner = {}) {
  double sq = 0.0;
  for (float x : v) {
    if (!std::isfinite(x)) throw DegenerateInputError("non-finite feature value for image '" + std::string(owner) + "'");
    sq += static_cast<double>(x) * x;
  }
  if (sq == 0.0) throw DegenerateInputError("zero feature vector for image '" + std::string(owner) + "'");
  const double norm = std::sqrt(sq);
  FeatureVector out(v.size());
  for (std::size_t k = 0; k < v.size(); ++k) out[k] = static_cast<float>(v[k] / norm);
  return out;
}

/// s(d) = 1 - tanh(d), mapping a distance to a similarity in (0, 1].
inline double distance_to_similarity(double d) {
  if (!(d >= 0.0)) throw ContractViolation("distance must be non-negative, got " + std::to_string(d));
  return 1.0 - std::tanh(d);
}

/// Euclidean distance between unit vectors, evaluated in double precision in dimension order.
inline double unit_distance(std::span<const float> a, std::span<const float> b) {
  double dot = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) dot += static_cast<double>(a[k]) * b[k];
  return std::sqrt(std::max(0.0, 2.0 - 2.0 * dot));
}

struct Neighbor {
  ImageIndex image = 0;
  std::uint32_t vector = 0;  // position of the vector within its image's list
  double distance = 0.0;

  bool operator==(const Neighbor&) const = default;
};

/// Ascending by distance; ties broken by (image, vector).
inline bool neighbor_less(const Neighbor& a, const Neighbor& b) {
  if (a.distance != b.distance) return a.distance < b.distance;
  if (a.image != b.image) return a.image < b.image;
  return a.vector < b.vector;
}

using NeighborResult = std::vector<Neighbor>;

/// Exact exhaustive cosine index over unit vectors. Immutable after construction.
class FlatIndex {
 public:
  FlatIndex() = default;

  /// `vectors[i]` belongs to image `owners[i]`; vectors of one image must be contiguous.
  FlatIndex(std::size_t dim, const std::vector<FeatureVector>& vectors, std::vector<ImageIndex> owners,
            std::vector<std::uint32_t> slots)
      : dim_(dim), data_(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(vectors.size())),
        owners_(std::move(owners)), slots_(std::move(slots)) {
    if (owners_.size() != vectors.size() || slots_.size() != vectors.size())
      throw ContractViolation("index owners, slots and vectors differ in length");
    for (std::size_t c = 0; c < vectors.size(); ++c) {
      if (vectors[c].size() != dim) throw ContractViolation("indexed vector has wrong dimension");
      for (std::size_t r = 0; r < dim; ++r) data_(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = vectors[c][r];
    }
    std::unordered_set<ImageIndex> seen;
    for (std::size_t c = 0; c < owners_.size(); ++c)
      if ((c == 0 || owners_[c] != owners_[c - 1]) && !seen.insert(owners_[c]).second)
        throw ContractViolation("vectors of one image must be contiguous in the index");
  }

  std::size_t size() const noexcept { return owners_.size(); }
  std::size_t dim() const noexcept { return dim_; }
  ImageIndex owner(std::size_t c) const { return owners_[c]; }
  std::span<const float> vector(std::size_t c) const {
    return {data_.data() + c * dim_, dim_};
  }

  /// The k nearest indexed vectors to `query`, skipping every vector owned by `exclude_image`.
  NeighborResult query(std::span<const float> query, std::size_t k,
                       std::optional<ImageIndex> exclude_image = std::nullopt) const {
    NeighborResult all;
    if (size() == 0 || k == 0) return all;
    all.reserve(size());
    for (std::size_t c = 0; c < size(); ++c) {
      if (exclude_image && owners_[c] == *exclude_image) continue;
      all.push_back({owners_[c], slots_[c], unit_distance(query, vector(c))});
    }
    const std::size_t keep = std::min(k, all.size());
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(keep), all.end(), neighbor_less);
    all.resize(keep);
    return all;
  }

  /// Queries every indexed vector against the index, excluding its own image, and
  /// hands each result to `sink(query_column, result)` in column order.
  /// Candidates are preselected by a float GEMM and re-ranked by exact double distances.
  void self_join(std::size_t k, const std::function<void(std::size_t, const NeighborResult&)>& sink) const {
    const std::size_t n = size();
    if (n == 0) return;
    const std::size_t shortlist = k + kShortlistMargin;
    constexpr Eigen::Index kQueryBlock = 256;
    constexpr Eigen::Index kDataBlock = 4096;
    using Entry = std::pair<float, std::uint32_t>;  // (similarity, column); min-heap on similarity
    auto worse = [](const Entry& a, const Entry& b) {
      return a.first != b.first ? a.first > b.first : a.second < b.second;
    };
    Eigen::MatrixXf sims;
    std::vector<std::vector<Entry>> heaps;
    for (Eigen::Index q0 = 0; q0 < static_cast<Eigen::Index>(n); q0 += kQueryBlock) {
      const Eigen::Index qb = std::min<Eigen::Index>(kQueryBlock, static_cast<Eigen::Index>(n) - q0);
      heaps.assign(static_cast<std::size_t>(qb), {});
      for (Eigen::Index d0 = 0; d0 < static_cast<Eigen::Index>(n); d0 += kDataBlock) {
        const Eigen::Index db = std::min<Eigen::Index>(kDataBlock, static_cast<Eigen::Index>(n) - d0);
        sims.noalias() = data_.middleCols(d0, db).transpose() * data_.middleCols(q0, qb);
        for (Eigen::Index q = 0; q < qb; ++q) {
          const std::size_t qcol = static_cast<std::size_t>(q0 + q);
          const ImageIndex self = owners_[qcol];
          auto& heap = heaps[static_cast<std::size_t>(q)];
          float floor = heap.size() >= shortlist ? heap.front().first : -std::numeric_limits<float>::infinity();
          const float* col = sims.data() + q * db;
          for (Eigen::Index d = 0; d < db; ++d) {
            const float s = col[d];
            if (s < floor) continue;
            const auto dcol = static_cast<std::uint32_t>(d0 + d);
            if (owners_[dcol] == self) continue;
            if (heap.size() < shortlist) {
              heap.emplace_back(s, dcol);
              std::push_heap(heap.begin(), heap.end(), worse);
            } else if (worse({s, dcol}, heap.front())) {
              std::pop_heap(heap.begin(), heap.end(), worse);
              heap.back() = {s, dcol};
              std::push_heap(heap.begin(), heap.end(), worse);
            }
            if (heap.size() >= shortlist) floor = heap.front().first;
          }
        }
      }
      NeighborResult result;
      for (Eigen::Index q = 0; q < qb; ++q) {
        const std::size_t qcol = static_cast<std::size_t>(q0 + q);
        result.clear();
        for (const auto& [s, dcol] : heaps[static_cast<std::size_t>(q)])
          result.push_back({owners_[dcol], slots_[dcol], unit_distance(vector(qcol), vector(dcol))});
        const std::size_t keep = std::min(k, result.size());
        std::partial_sort(result.begin(), result.begin() + static_cast<std::ptrdiff_t>(keep), result.end(),
                          neighbor_less);
        result.resize(keep);
        sink(qcol, result);
      }
    }
  }

 private:
  static constexpr std::size_t kShortlistMargin = 8;

  std::size_t dim_ = 0;
  Eigen::MatrixXf data_;  // one column per vector
  std::vector<ImageIndex> owners_;
  std::vector<std::uint32_t> slots_;
};

}  // namespace memeclust::ann
