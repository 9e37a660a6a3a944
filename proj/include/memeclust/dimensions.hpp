#pragma once

#include <algorithm>
#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "memeclust/core/error.hpp"
#include "memeclust/core/types.hpp"

namespace memeclust {

enum class Dimension { form, visual_content, textual_content, identity, combined };

inline constexpr std::array<Dimension, 5> kAllDimensions = {Dimension::form, Dimension::visual_content,
                                                            Dimension::textual_content, Dimension::identity,
                                                            Dimension::combined};

inline constexpr std::string_view to_string(Dimension d) {
  switch (d) {
    case Dimension::form: return "form";
    case Dimension::visual_content: return "visual_content";
    case Dimension::textual_content: return "textual_content";
    case Dimension::identity: return "identity";
    case Dimension::combined: return "combined";
  }
  return "?";
}

inline Dimension parse_dimension(std::string_view s) {
  for (auto d : kAllDimensions)
    if (to_string(d) == s) return d;
  throw FormatError("unknown similarity dimension '" + std::string(s) + "'");
}

struct DimensionSpec {
  Dimension name = Dimension::combined;
  std::vector<FeatureKind> constituents;
};

/// Default constituents: form = phash + colorhist + surf, one neural kind per content
/// dimension, combined = all six.
inline DimensionSpec default_dimension_spec(Dimension d) {
  switch (d) {
    case Dimension::form: return {d, {FeatureKind::phash, FeatureKind::colorhist, FeatureKind::surf}};
    case Dimension::visual_content: return {d, {FeatureKind::visual}};
    case Dimension::textual_content: return {d, {FeatureKind::text}};
    case Dimension::identity: return {d, {FeatureKind::face}};
    case Dimension::combined: return {d, {kAllFeatureKinds.begin(), kAllFeatureKinds.end()}};
  }
  return {d, {}};
}

/// Cell-wise sum of `matrices`; absent cells count as 0. Each matrix's meta must name one
/// of the DimensionSpec constituents. The sum is formed in double over values in sorted order and stored as
/// float, so the result does not depend on the order of `matrices`.
inline SparseSimilarityMatrix aggregate(const std::vector<SparseSimilarityMatrix>& matrices, const DimensionSpec& spec) {
  if (matrices.empty()) throw ContractViolation("aggregate needs at least one matrix");
  const std::size_t n = matrices.front().n();
  std::vector<std::string> allowed;
  for (auto k : spec.constituents) allowed.emplace_back(to_string(k));
  for (const auto& m : matrices) {
    if (m.n() != n)
      throw ContractViolation("matrix order mismatch: " + std::to_string(m.n()) + " vs " + std::to_string(n));
    if (std::find(allowed.begin(), allowed.end(), m.meta()) == allowed.end())
      throw ContractViolation("matrix '" + m.meta() + "' is not a constituent of dimension '" +
                              std::string(to_string(spec.name)) + "'");
  }
  std::vector<Triplet> all;
  for (const auto& m : matrices) all.insert(all.end(), m.triplets().begin(), m.triplets().end());
  std::sort(all.begin(), all.end(), [](const Triplet& a, const Triplet& b) {
    if (a.i != b.i) return a.i < b.i;
    if (a.j != b.j) return a.j < b.j;
    return a.value < b.value;
  });
  std::vector<Triplet> out;
  for (std::size_t k = 0; k < all.size();) {
    double v = 0.0;
    std::size_t e = k;
    for (; e < all.size() && all[e].i == all[k].i && all[e].j == all[k].j; ++e) v += all[e].value;
    out.push_back({all[k].i, all[k].j, static_cast<float>(v)});
    k = e;
  }
  return SparseSimilarityMatrix(n, std::string(to_string(spec.name)), std::move(out));
}

}  // namespace memeclust
