#pragma once

#include <algorithm>
#include <array>
#include <cmath>

#include "memeclust/core/error.hpp"
#include "memeclust/core/image.hpp"
#include "memeclust/core/types.hpp"

namespace memeclust::extract {

struct HsvBins {
  int hue = 8;
  int saturation = 4;
  int value = 4;

  int total() const { return hue * saturation * value; }
};

struct Hsv {
  double h;  // degrees in [0, 360)
  double s;  // [0, 1]
  double v;  // [0, 1]
};

inline Hsv rgb_to_hsv(std::uint8_t r8, std::uint8_t g8, std::uint8_t b8) {
  const double r = r8 / 255.0, g = g8 / 255.0, b = b8 / 255.0;
  const double mx = std::max({r, g, b}), mn = std::min({r, g, b});
  const double delta = mx - mn;
  double h = 0.0;
  if (delta > 0) {
    if (mx == r) h = 60.0 * std::fmod((g - b) / delta, 6.0);
    else if (mx == g) h = 60.0 * ((b - r) / delta + 2.0);
    else h = 60.0 * ((r - g) / delta + 4.0);
    if (h < 0) h += 360.0;
  }
  return {h, mx > 0 ? delta / mx : 0.0, mx};
}

inline int hsv_bin(const Hsv& c, const HsvBins& bins) {
  auto q = [](double x, double range, int n) { return std::clamp(static_cast<int>(x / range * n), 0, n - 1); };
  const int hb = q(c.h, 360.0, bins.hue);
  const int sb = q(c.s, 1.0, bins.saturation);
  const int vb = q(c.v, 1.0, bins.value);
  return (hb * bins.saturation + sb) * bins.value + vb;
}

/// Joint HSV histogram normalized to unit mass (before the indexing L2 step).
inline FeatureVector hsv_histogram_mass(const Image& image, HsvBins bins = {}) {
  if (image.empty()) throw DegenerateInputError("histogram of an empty image");
  std::vector<double> counts(bins.total(), 0.0);
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x) {
      const auto* p = image.px(x, y);
      counts[hsv_bin(rgb_to_hsv(p[0], p[1], p[2]), bins)] += 1.0;
    }
  const double total = static_cast<double>(image.width) * image.height;
  FeatureVector out(counts.size());
  for (std::size_t k = 0; k < counts.size(); ++k) out[k] = static_cast<float>(counts[k] / total);
  return out;
}

/// HSV histogram ready for indexing: L1-normalized, then L2-normalized.
inline FeatureVector compute_hsv_histogram(const Image& image, HsvBins bins = {}) {
  FeatureVector v = hsv_histogram_mass(image, bins);
  double sq = 0.0;
  for (float x : v) sq += static_cast<double>(x) * x;
  const double norm = std::sqrt(sq);
  for (float& x : v) x = static_cast<float>(x / norm);
  return v;
}

}  // namespace memeclust::extract
