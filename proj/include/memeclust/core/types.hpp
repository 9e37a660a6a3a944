#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "memeclust/core/error.hpp"

namespace memeclust {

using ImageIndex = std::uint32_t;

struct ImageRecord {
  std::string id;
  std::string path;
  std::optional<std::string> label;
  std::string source;

  bool operator==(const ImageRecord&) const = default;
};

/// Ordered image list. The position of a record is its canonical matrix index.
class CorpusManifest {
 public:
  CorpusManifest() = default;

  explicit CorpusManifest(std::vector<ImageRecord> images) : images_(std::move(images)) {
    index_.reserve(images_.size());
    for (std::size_t i = 0; i < images_.size(); ++i) {
      if (images_[i].id.empty()) throw InvariantError("image record " + std::to_string(i) + " has an empty id");
      if (images_[i].path.empty()) throw InvariantError("image '" + images_[i].id + "' has an empty path");
      auto [it, inserted] = index_.emplace(images_[i].id, static_cast<ImageIndex>(i));
      if (!inserted) throw InvariantError("duplicate image id '" + images_[i].id + "'");
    }
  }

  std::size_t size() const noexcept { return images_.size(); }
  bool empty() const noexcept { return images_.empty(); }
  const ImageRecord& operator[](std::size_t i) const { return images_[i]; }
  const std::vector<ImageRecord>& images() const noexcept { return images_; }

  std::optional<ImageIndex> find(std::string_view id) const {
    auto it = index_.find(std::string(id));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  ImageIndex index_of(std::string_view id) const {
    auto found = find(id);
    if (!found) throw InvariantError("unknown image id '" + std::string(id) + "'");
    return *found;
  }

  /// Ground-truth labels by index; unlabeled images map to nullopt.
  std::vector<std::optional<std::string>> labels() const {
    std::vector<std::optional<std::string>> out;
    out.reserve(images_.size());
    for (const auto& r : images_) out.push_back(r.label);
    return out;
  }

 private:
  std::vector<ImageRecord> images_;
  std::unordered_map<std::string, ImageIndex> index_;
};

using FeatureVector = std::vector<float>;

enum class FeatureKind { phash, colorhist, surf, visual, text, face };
enum class FeatureScope { global, local };

inline constexpr std::array<FeatureKind, 6> kAllFeatureKinds = {FeatureKind::phash, FeatureKind::colorhist,
                                                                 FeatureKind::surf,  FeatureKind::visual,
                                                                 FeatureKind::text,  FeatureKind::face};

inline constexpr std::string_view to_string(FeatureKind k) {
  switch (k) {
    case FeatureKind::phash: return "phash";
    case FeatureKind::colorhist: return "colorhist";
    case FeatureKind::surf: return "surf";
    case FeatureKind::visual: return "visual";
    case FeatureKind::text: return "text";
    case FeatureKind::face: return "face";
  }
  return "?";
}

inline constexpr std::string_view to_string(FeatureScope s) { return s == FeatureScope::global ? "global" : "local"; }

inline FeatureKind parse_feature_kind(std::string_view s) {
  for (auto k : kAllFeatureKinds)
    if (to_string(k) == s) return k;
  throw FormatError("unknown feature kind '" + std::string(s) + "'");
}

inline FeatureScope parse_feature_scope(std::string_view s) {
  if (s == "global") return FeatureScope::global;
  if (s == "local") return FeatureScope::local;
  throw FormatError("unknown feature scope '" + std::string(s) + "'");
}

/// Natural scope of each feature kind.
inline constexpr FeatureScope default_scope(FeatureKind k) {
  return (k == FeatureKind::surf || k == FeatureKind::face) ? FeatureScope::local : FeatureScope::global;
}

inline constexpr std::size_t kMaxLocalVectorsPerImage = 1000;

struct FeatureEntry {
  std::string image_id;
  std::vector<FeatureVector> vectors;

  bool operator==(const FeatureEntry&) const = default;
};

/// All vectors of one feature kind, keyed by image id in insertion order.
struct FeatureSet {
  FeatureKind kind = FeatureKind::phash;
  FeatureScope scope = FeatureScope::global;
  std::size_t dim = 0;
  std::vector<FeatureEntry> entries;

  bool operator==(const FeatureSet&) const = default;

  std::size_t vector_count() const {
    std::size_t c = 0;
    for (const auto& e : entries) c += e.vectors.size();
    return c;
  }

  void validate() const {
    if (dim == 0) throw InvariantError("feature set dimension must be positive");
    std::unordered_map<std::string, int> seen;
    for (const auto& e : entries) {
      if (!seen.emplace(e.image_id, 0).second)
        throw InvariantError("feature set has two entries for image '" + e.image_id + "'");
      if (scope == FeatureScope::global && e.vectors.size() > 1)
        throw InvariantError("global feature set has " + std::to_string(e.vectors.size()) + " vectors for '" +
                             e.image_id + "'");
      if (scope == FeatureScope::local && e.vectors.size() > kMaxLocalVectorsPerImage)
        throw InvariantError("local feature set exceeds " + std::to_string(kMaxLocalVectorsPerImage) +
                             " vectors for '" + e.image_id + "'");
      for (const auto& v : e.vectors) {
        if (v.size() != dim)
          throw InvariantError("vector of length " + std::to_string(v.size()) + " for '" + e.image_id +
                               "' in a set of dim " + std::to_string(dim));
        for (float x : v)
          if (!std::isfinite(x)) throw InvariantError("non-finite feature value for '" + e.image_id + "'");
      }
    }
  }
};

struct OcrRecord {
  std::string image_id;
  std::string text;

  bool operator==(const OcrRecord&) const = default;
};

struct TextBox {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;

  bool operator==(const TextBox&) const = default;
  long long area() const { return static_cast<long long>(width) * height; }
};

using TextMaskSet = std::map<std::string, std::vector<TextBox>>;

struct Triplet {
  ImageIndex i = 0;
  ImageIndex j = 0;
  float value = 0.0f;

  bool operator==(const Triplet&) const = default;
};

/// Sparse N x N similarity matrix held as row-major triplets.
class SparseSimilarityMatrix {
 public:
  SparseSimilarityMatrix() = default;
  SparseSimilarityMatrix(std::size_t n, std::string meta) : n_(n), meta_(std::move(meta)) {}

  /// Builds a matrix from triplets, sorting them row-major and checking every invariant.
  SparseSimilarityMatrix(std::size_t n, std::string meta, std::vector<Triplet> triplets)
      : n_(n), meta_(std::move(meta)), triplets_(std::move(triplets)) {
    canonicalize();
  }

  std::size_t n() const noexcept { return n_; }
  const std::string& meta() const noexcept { return meta_; }
  void set_meta(std::string meta) { meta_ = std::move(meta); }
  const std::vector<Triplet>& triplets() const noexcept { return triplets_; }
  std::size_t nnz() const noexcept { return triplets_.size(); }
  bool empty() const noexcept { return triplets_.empty(); }

  /// Value at (i, j); absent cells are 0.
  float at(ImageIndex i, ImageIndex j) const {
    auto it = std::lower_bound(triplets_.begin(), triplets_.end(), std::pair{i, j},
                               [](const Triplet& t, const std::pair<ImageIndex, ImageIndex>& key) {
                                 return std::pair{t.i, t.j} < key;
                               });
    return (it != triplets_.end() && it->i == i && it->j == j) ? it->value : 0.0f;
  }

  bool is_symmetric() const {
    for (const auto& t : triplets_)
      if (at(t.j, t.i) != t.value) return false;
    return true;
  }

  float max_value() const {
    float m = 0.0f;
    for (const auto& t : triplets_) m = std::max(m, t.value);
    return m;
  }

  bool operator==(const SparseSimilarityMatrix&) const = default;

 private:
  void canonicalize() {
    for (const auto& t : triplets_) {
      if (t.i >= n_ || t.j >= n_)
        throw InvariantError("triplet (" + std::to_string(t.i) + "," + std::to_string(t.j) +
                             ") outside matrix of order " + std::to_string(n_));
      if (t.i == t.j) throw InvariantError("self-edge at index " + std::to_string(t.i));
      if (!(t.value > 0.0f) || !std::isfinite(t.value))
        throw InvariantError("triplet (" + std::to_string(t.i) + "," + std::to_string(t.j) +
                             ") has non-positive or non-finite value");
    }
    std::sort(triplets_.begin(), triplets_.end(),
              [](const Triplet& a, const Triplet& b) { return std::pair{a.i, a.j} < std::pair{b.i, b.j}; });
    for (std::size_t k = 1; k < triplets_.size(); ++k)
      if (triplets_[k].i == triplets_[k - 1].i && triplets_[k].j == triplets_[k - 1].j)
        throw InvariantError("duplicate triplet (" + std::to_string(triplets_[k].i) + "," +
                             std::to_string(triplets_[k].j) + ")");
  }

  std::size_t n_ = 0;
  std::string meta_;
  std::vector<Triplet> triplets_;
};

}  // namespace memeclust
