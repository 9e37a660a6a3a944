#pragma once

// Speeded-Up Robust Features: Hessian box-filter detector with Haar-wavelet
// orientation and 64-dimensional descriptors.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "memeclust/core/image.hpp"
#include "memeclust/core/types.hpp"

namespace memeclust::extract {

struct KeypointDescriptor {
  float x = 0.0f;
  float y = 0.0f;
  float scale = 0.0f;
  float orientation = 0.0f;  // radians
  float response = 0.0f;     // Hessian determinant
  int laplacian = 0;         // sign of the trace
  std::array<float, 64> descriptor{};
};

struct SurfParams {
  int octaves = 4;
  int initial_step = 1;
  float hessian_threshold = 0.0004f;  // on [0,1] intensities, area-normalized responses
  std::size_t max_keypoints = 1000;
};

/// Summed-area table with zero-padded, clamped box queries.
class IntegralImage {
 public:
  explicit IntegralImage(const GrayImage& g) : w_(g.width), h_(g.height), sum_((w_ + 1) * (h_ + 1), 0.0) {
    for (int y = 0; y < h_; ++y) {
      double row = 0.0;
      for (int x = 0; x < w_; ++x) {
        row += g.at(x, y);
        sum_[(y + 1) * (w_ + 1) + x + 1] = sum_[y * (w_ + 1) + x + 1] + row;
      }
    }
  }

  int width() const { return w_; }
  int height() const { return h_; }

  /// Sum over rows [row, row+rows) x cols [col, col+cols), clipped to the image.
  double box(int row, int col, int rows, int cols) const {
    const int r0 = std::clamp(row, 0, h_), c0 = std::clamp(col, 0, w_);
    const int r1 = std::clamp(row + rows, 0, h_), c1 = std::clamp(col + cols, 0, w_);
    if (r1 <= r0 || c1 <= c0) return 0.0;
    const int stride = w_ + 1;
    return sum_[r1 * stride + c1] - sum_[r0 * stride + c1] - sum_[r1 * stride + c0] + sum_[r0 * stride + c0];
  }

  /// Right half minus left half, centered on (row, col).
  double haar_x(int row, int col, int size) const {
    const int half = size / 2;
    return box(row - half, col, size, half) - box(row - half, col - half, size, half);
  }

  /// Bottom half minus top half, centered on (row, col).
  double haar_y(int row, int col, int size) const {
    const int half = size / 2;
    return box(row, col - half, half, size) - box(row - half, col - half, half, size);
  }

 private:
  int w_, h_;
  std::vector<double> sum_;
};

namespace surf_detail {

struct ResponseLayer {
  int width, height, step, filter;
  std::vector<float> response;
  std::vector<std::uint8_t> laplacian;

  float at(int row, int col) const { return response[static_cast<std::size_t>(row) * width + col]; }
  /// Response at (row, col) given in the coordinates of `src`, a coarser or equal layer.
  float at(int row, int col, const ResponseLayer& src) const {
    const int scale = width / src.width;
    return response[static_cast<std::size_t>(scale * row) * width + scale * col];
  }
  std::uint8_t lap(int row, int col, const ResponseLayer& src) const {
    const int scale = width / src.width;
    return laplacian[static_cast<std::size_t>(scale * row) * width + scale * col];
  }
};

inline void build_layer(const IntegralImage& ii, ResponseLayer& layer) {
  const int b = (layer.filter - 1) / 2;
  const int l = layer.filter / 3;
  const int w = layer.filter;
  const double inv_area = 1.0 / (static_cast<double>(w) * w);
  layer.response.assign(static_cast<std::size_t>(layer.width) * layer.height, 0.0f);
  layer.laplacian.assign(layer.response.size(), 0);
  for (int ar = 0; ar < layer.height; ++ar)
    for (int ac = 0; ac < layer.width; ++ac) {
      const int r = ar * layer.step, c = ac * layer.step;
      double dxx = ii.box(r - l + 1, c - b, 2 * l - 1, w) - 3.0 * ii.box(r - l + 1, c - l / 2, 2 * l - 1, l);
      double dyy = ii.box(r - b, c - l + 1, w, 2 * l - 1) - 3.0 * ii.box(r - l / 2, c - l + 1, l, 2 * l - 1);
      double dxy = ii.box(r - l, c + 1, l, l) + ii.box(r + 1, c - l, l, l) - ii.box(r - l, c - l, l, l) -
                   ii.box(r + 1, c + 1, l, l);
      dxx *= inv_area;
      dyy *= inv_area;
      dxy *= inv_area;
      const std::size_t k = static_cast<std::size_t>(ar) * layer.width + ac;
      layer.response[k] = static_cast<float>(dxx * dyy - 0.81 * dxy * dxy);
      layer.laplacian[k] = (dxx + dyy) >= 0 ? 1 : 0;
    }
}

struct Candidate {
  float x, y, scale, response;
  int laplacian;
};

// Solves the 3x3 system for the sub-sample offset of an extremum; false if it leaves the cell.
inline bool interpolate(const ResponseLayer& t, const ResponseLayer& m, const ResponseLayer& b, int r, int c,
                        Candidate& out) {
  const double dx = (m.at(r, c + 1, t) - m.at(r, c - 1, t)) / 2.0;
  const double dy = (m.at(r + 1, c, t) - m.at(r - 1, c, t)) / 2.0;
  const double ds = (t.at(r, c) - b.at(r, c, t)) / 2.0;
  const double v = m.at(r, c, t);
  const double dxx = m.at(r, c + 1, t) + m.at(r, c - 1, t) - 2 * v;
  const double dyy = m.at(r + 1, c, t) + m.at(r - 1, c, t) - 2 * v;
  const double dss = t.at(r, c) + b.at(r, c, t) - 2 * v;
  const double dxy = (m.at(r + 1, c + 1, t) - m.at(r + 1, c - 1, t) - m.at(r - 1, c + 1, t) + m.at(r - 1, c - 1, t)) / 4.0;
  const double dxs = (t.at(r, c + 1) - t.at(r, c - 1) - b.at(r, c + 1, t) + b.at(r, c - 1, t)) / 4.0;
  const double dys = (t.at(r + 1, c) - t.at(r - 1, c) - b.at(r + 1, c, t) + b.at(r - 1, c, t)) / 4.0;

  // Cramer's rule on H * offset = -grad.
  const double det = dxx * (dyy * dss - dys * dys) - dxy * (dxy * dss - dys * dxs) + dxs * (dxy * dys - dyy * dxs);
  if (std::abs(det) < 1e-30) return false;
  const double gx = -dx, gy = -dy, gs = -ds;
  const double ox = (gx * (dyy * dss - dys * dys) - dxy * (gy * dss - dys * gs) + dxs * (gy * dys - dyy * gs)) / det;
  const double oy = (dxx * (gy * dss - dys * gs) - gx * (dxy * dss - dys * dxs) + dxs * (dxy * gs - gy * dxs)) / det;
  const double os = (dxx * (dyy * gs - gy * dys) - dxy * (dxy * gs - gy * dxs) + gx * (dxy * dys - dyy * dxs)) / det;
  if (std::abs(ox) >= 0.5 || std::abs(oy) >= 0.5 || std::abs(os) >= 0.5) return false;

  const int filter_step = m.filter - b.filter;
  out.x = static_cast<float>((c + ox) * t.step);
  out.y = static_cast<float>((r + oy) * t.step);
  out.scale = static_cast<float>(0.1333 * (m.filter + os * filter_step));
  out.response = static_cast<float>(v);
  out.laplacian = m.lap(r, c, t);
  return true;
}

inline double gaussian(double x, double y, double sigma) {
  return std::exp(-(x * x + y * y) / (2.0 * sigma * sigma)) / (2.0 * std::numbers::pi * sigma * sigma);
}

inline float dominant_orientation(const IntegralImage& ii, const Candidate& kp) {
  const int s = std::max(1, static_cast<int>(std::lround(kp.scale)));
  const int r = static_cast<int>(std::lround(kp.y)), c = static_cast<int>(std::lround(kp.x));
  std::vector<double> rx, ry, ang;
  for (int i = -6; i <= 6; ++i)
    for (int j = -6; j <= 6; ++j) {
      if (i * i + j * j >= 36) continue;
      const double g = gaussian(i, j, 2.0);
      const double x = g * ii.haar_x(r + j * s, c + i * s, 4 * s);
      const double y = g * ii.haar_y(r + j * s, c + i * s, 4 * s);
      rx.push_back(x);
      ry.push_back(y);
      double a = std::atan2(y, x);
      if (a < 0) a += 2 * std::numbers::pi;
      ang.push_back(a);
    }
  constexpr double kWindow = std::numbers::pi / 3.0;
  double best = 0.0, orientation = 0.0;
  for (double a1 = 0.0; a1 < 2 * std::numbers::pi; a1 += 0.15) {
    const double a2 = a1 + kWindow;
    double sx = 0.0, sy = 0.0;
    for (std::size_t k = 0; k < ang.size(); ++k) {
      const double a = ang[k];
      const bool inside = a2 <= 2 * std::numbers::pi ? (a >= a1 && a < a2)
                                                      : (a >= a1 || a < a2 - 2 * std::numbers::pi);
      if (inside) {
        sx += rx[k];
        sy += ry[k];
      }
    }
    const double mag = sx * sx + sy * sy;
    if (mag > best) {
      best = mag;
      orientation = std::atan2(sy, sx);
    }
  }
  if (orientation < 0) orientation += 2 * std::numbers::pi;
  return static_cast<float>(orientation);
}

inline std::array<float, 64> describe(const IntegralImage& ii, float px, float py, float scale, float orientation) {
  std::array<float, 64> desc{};
  const double co = std::cos(orientation), si = std::sin(orientation);
  const int haar = std::max(2, 2 * static_cast<int>(std::lround(scale)));
  std::size_t k = 0;
  for (int bi = 0; bi < 4; ++bi)
    for (int bj = 0; bj < 4; ++bj) {
      double sdx = 0, sadx = 0, sdy = 0, sady = 0;
      for (int si_ = 0; si_ < 5; ++si_)
        for (int sj = 0; sj < 5; ++sj) {
          // Sample grid in the keypoint frame, in units of scale: centers at -9.5 .. 9.5.
          const double u = (bj * 5 + sj) - 9.5;
          const double v = (bi * 5 + si_) - 9.5;
          const double sx = px + scale * (u * co - v * si);
          const double sy = py + scale * (u * si + v * co);
          const int r = static_cast<int>(std::lround(sy)), c = static_cast<int>(std::lround(sx));
          const double g = std::exp(-(u * u + v * v) / (2.0 * 3.3 * 3.3));
          const double hx = ii.haar_x(r, c, haar), hy = ii.haar_y(r, c, haar);
          const double dx = g * (hx * co + hy * si);
          const double dy = g * (-hx * si + hy * co);
          sdx += dx;
          sadx += std::abs(dx);
          sdy += dy;
          sady += std::abs(dy);
        }
      desc[k++] = static_cast<float>(sdx);
      desc[k++] = static_cast<float>(sadx);
      desc[k++] = static_cast<float>(sdy);
      desc[k++] = static_cast<float>(sady);
    }
  double norm = 0.0;
  for (float d : desc) norm += static_cast<double>(d) * d;
  norm = std::sqrt(norm);
  if (norm > 0)
    for (float& d : desc) d = static_cast<float>(d / norm);
  return desc;
}

}  // namespace surf_detail

/// Detects keypoints on an already text-masked image and keeps the
/// `max_keypoints` strongest by Hessian response.
inline std::vector<KeypointDescriptor> compute_surf(const Image& image, const SurfParams& params = {}) {
  using namespace surf_detail;
  std::vector<KeypointDescriptor> out;
  if (image.width < 9 || image.height < 9 || params.max_keypoints == 0) return out;
  const IntegralImage ii(to_gray(image));

  // Filter sizes per octave: 9,15,21,27 | 15,27,39,51 | 27,51,75,99 | ...
  std::vector<ResponseLayer> layers;
  auto layer_index = [&](int filter, int step) -> int {
    for (std::size_t k = 0; k < layers.size(); ++k)
      if (layers[k].filter == filter) return static_cast<int>(k);
    ResponseLayer l{std::max(1, image.width / step), std::max(1, image.height / step), step, filter, {}, {}};
    build_layer(ii, l);
    layers.push_back(std::move(l));
    return static_cast<int>(layers.size() - 1);
  };
  std::vector<std::array<int, 4>> octave_layers;
  for (int o = 0; o < params.octaves; ++o) {
    const int step = params.initial_step << o;
    std::array<int, 4> idx{};
    for (int i = 0; i < 4; ++i) {
      const int filter = 3 * ((1 << (o + 1)) * (i + 1) + 1);
      // Shared filter sizes are evaluated at the finer step of their first octave.
      int existing = -1;
      for (std::size_t k = 0; k < layers.size(); ++k)
        if (layers[k].filter == filter) existing = static_cast<int>(k);
      idx[i] = existing >= 0 ? existing : layer_index(filter, step);
    }
    octave_layers.push_back(idx);
  }

  std::vector<Candidate> cands;
  for (const auto& idx : octave_layers)
    for (int triple = 0; triple < 2; ++triple) {
      const ResponseLayer& b = layers[idx[triple]];
      const ResponseLayer& m = layers[idx[triple + 1]];
      const ResponseLayer& t = layers[idx[triple + 2]];
      const int border = (t.filter + 1) / (2 * t.step);
      for (int r = border + 1; r < t.height - border - 1; ++r)
        for (int c = border + 1; c < t.width - border - 1; ++c) {
          const float v = m.at(r, c, t);
          if (v < params.hessian_threshold) continue;
          bool is_max = true;
          for (int dr = -1; dr <= 1 && is_max; ++dr)
            for (int dc = -1; dc <= 1 && is_max; ++dc) {
              if (t.at(r + dr, c + dc) >= v || b.at(r + dr, c + dc, t) >= v) is_max = false;
              if ((dr || dc) && m.at(r + dr, c + dc, t) >= v) is_max = false;
            }
          if (!is_max) continue;
          Candidate cand{};
          if (interpolate(t, m, b, r, c, cand) && cand.x >= 0 && cand.y >= 0 && cand.x <= image.width - 1 &&
              cand.y <= image.height - 1)
            cands.push_back(cand);
        }
    }

  std::stable_sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
    if (a.response != b.response) return a.response > b.response;
    if (a.y != b.y) return a.y < b.y;
    return a.x < b.x;
  });
  if (cands.size() > params.max_keypoints) cands.resize(params.max_keypoints);

  out.reserve(cands.size());
  for (const auto& c : cands) {
    KeypointDescriptor kp;
    kp.x = c.x;
    kp.y = c.y;
    kp.scale = c.scale;
    kp.response = c.response;
    kp.laplacian = c.laplacian;
    kp.orientation = dominant_orientation(ii, c);
    kp.descriptor = describe(ii, c.x, c.y, c.scale, kp.orientation);
    double norm = 0.0;
    for (float d : kp.descriptor) norm += static_cast<double>(d) * d;
    if (norm == 0.0) continue;  // flat neighbourhood, no direction to describe
    out.push_back(kp);
  }
  return out;
}

inline FeatureVector descriptor_vector(const KeypointDescriptor& kp) {
  return FeatureVector(kp.descriptor.begin(), kp.descriptor.end());
}

}  // namespace memeclust::extract
