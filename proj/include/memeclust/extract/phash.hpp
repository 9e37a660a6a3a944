#pragma once

#include <algorithm>
#include <bitset>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "memeclust/core/error.hpp"
#include "memeclust/core/image.hpp"
#include "memeclust/core/types.hpp"

namespace memeclust::extract {

/// 64-bit DCT fingerprint. Bit k corresponds to coefficient k of the
/// low-frequency block in row-major order; bit 0 (DC) is always clear.
struct PerceptualHash {
  std::bitset<64> bits;

  bool operator==(const PerceptualHash&) const = default;
  std::uint64_t to_u64() const { return bits.to_ullong(); }
};

inline int hamming_distance(const PerceptualHash& a, const PerceptualHash& b) {
  return static_cast<int>((a.bits ^ b.bits).count());
}

/// Box-filter (area-averaging) resample of a gray image to `out_w` x `out_h`.
inline GrayImage resize_area(const GrayImage& src, int out_w, int out_h) {
  // Separable: each output sample integrates its source footprint with fractional edge weights.
  auto weights = [](int in, int out) {
    std::vector<std::vector<std::pair<int, double>>> w(out);
    const double scale = static_cast<double>(in) / out;
    for (int o = 0; o < out; ++o) {
      const double lo = o * scale, hi = (o + 1) * scale;
      for (int i = static_cast<int>(std::floor(lo)); i < static_cast<int>(std::ceil(hi)) && i < in; ++i) {
        const double overlap = std::min<double>(hi, i + 1) - std::max<double>(lo, i);
        if (overlap > 0) w[o].emplace_back(i, overlap / scale);
      }
    }
    return w;
  };
  const auto wx = weights(src.width, out_w);
  const auto wy = weights(src.height, out_h);

  std::vector<double> tmp(static_cast<std::size_t>(out_w) * src.height, 0.0);
  for (int y = 0; y < src.height; ++y)
    for (int ox = 0; ox < out_w; ++ox) {
      double acc = 0.0;
      for (auto [x, w] : wx[ox]) acc += w * src.at(x, y);
      tmp[static_cast<std::size_t>(y) * out_w + ox] = acc;
    }
  GrayImage out(out_w, out_h);
  for (int oy = 0; oy < out_h; ++oy)
    for (int ox = 0; ox < out_w; ++ox) {
      double acc = 0.0;
      for (auto [y, w] : wy[oy]) acc += w * tmp[static_cast<std::size_t>(y) * out_w + ox];
      out.at(ox, oy) = static_cast<float>(acc);
    }
  return out;
}

/// Orthonormal 2-D DCT-II of a square block, computed separably in double precision.
inline std::vector<double> dct2(const std::vector<double>& block, int n) {
  std::vector<double> basis(static_cast<std::size_t>(n) * n);
  for (int k = 0; k < n; ++k) {
    const double norm = k == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
    for (int x = 0; x < n; ++x) basis[k * n + x] = norm * std::cos(std::numbers::pi * (2 * x + 1) * k / (2.0 * n));
  }
  std::vector<double> rows(block.size(), 0.0), out(block.size(), 0.0);
  for (int y = 0; y < n; ++y)
    for (int k = 0; k < n; ++k) {
      double acc = 0.0;
      for (int x = 0; x < n; ++x) acc += basis[k * n + x] * block[y * n + x];
      rows[y * n + k] = acc;
    }
  for (int k = 0; k < n; ++k)
    for (int col = 0; col < n; ++col) {
      double acc = 0.0;
      for (int y = 0; y < n; ++y) acc += basis[k * n + y] * rows[y * n + col];
      out[k * n + col] = acc;
    }
  return out;
}

/// gray -> area resize to 4*hash_size square -> DCT -> low-frequency hash_size^2 block
/// -> bit = coefficient > median of the AC coefficients.
inline PerceptualHash compute_phash(const Image& image, int hash_size = 8) {
  if (hash_size * hash_size != 64) throw ContractViolation("phash needs hash_size^2 == 64");
  if (image.empty()) throw DegenerateInputError("phash of an empty image");
  const int side = 4 * hash_size;
  const GrayImage small = resize_area(to_gray(image), side, side);
  std::vector<double> block(static_cast<std::size_t>(side) * side);
  for (int y = 0; y < side; ++y)
    for (int x = 0; x < side; ++x) block[y * side + x] = small.at(x, y);
  const auto coeffs = dct2(block, side);

  std::vector<double> low;
  low.reserve(64);
  for (int y = 0; y < hash_size; ++y)
    for (int x = 0; x < hash_size; ++x) low.push_back(coeffs[y * side + x]);
  std::vector<double> ac(low.begin() + 1, low.end());
  std::nth_element(ac.begin(), ac.begin() + ac.size() / 2, ac.end());
  const double median = ac[ac.size() / 2];
  // Round-off guard: a constant image has AC terms of order 1e-16, which must not count as "above".
  const double guard = 1e-9 * (1.0 + std::abs(low[0]));

  PerceptualHash h;
  for (std::size_t k = 1; k < low.size(); ++k) h.bits[k] = low[k] > median + guard;
  return h;
}

/// Maps bits to +-1 and L2-normalizes, so cos(a, b) = (64 - 2 * hamming(a, b)) / 64.
inline FeatureVector phash_to_vector(const PerceptualHash& h) {
  FeatureVector v(64);
  for (std::size_t k = 0; k < 64; ++k) v[k] = h.bits[k] ? 0.125f : -0.125f;
  return v;
}

}  // namespace memeclust::extract
