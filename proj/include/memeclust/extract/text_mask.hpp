#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <vector>

#include "memeclust/core/image.hpp"
#include "memeclust/core/types.hpp"

namespace memeclust::extract {

/// Clips `box` to the image; returns a zero-area box when nothing remains.
inline TextBox clamp_box(const TextBox& box, int width, int height) {
  const int x0 = std::clamp(box.x, 0, width), y0 = std::clamp(box.y, 0, height);
  const int x1 = std::clamp(box.x + box.width, 0, width), y1 = std::clamp(box.y + box.height, 0, height);
  return {x0, y0, std::max(0, x1 - x0), std::max(0, y1 - y0)};
}

/// Paints every box black. Pixels outside all boxes are untouched.
inline Image apply_text_masks(const Image& image, const std::vector<TextBox>& boxes) {
  Image out = image;
  for (const auto& raw : boxes) {
    const TextBox b = clamp_box(raw, image.width, image.height);
    for (int y = b.y; y < b.y + b.height; ++y)
      for (int x = b.x; x < b.x + b.width; ++x) out.set(x, y, 0, 0, 0);
  }
  return out;
}

struct TextDetectorParams {
  float edge_strength = 0.3f;     // minimum |horizontal gradient| on [0,1] gray
  float extreme_low = 0.25f;      // a "dark" pixel is below this
  float extreme_high = 0.75f;     // a "bright" pixel is above this
  float row_density = 0.08f;      // fraction of text-like pixels that makes a row a text row
  int row_transitions = 10;       // or this many, whichever is smaller (short captions on wide images)
  int min_band_height = 5;
  int row_gap = 2;                // rows merged across gaps this small
  int column_gap = 12;            // columns merged across gaps this small
  int min_transitions_per_span = 6;
  int padding = 2;
  int weak_row_transitions = 2;   // bands grow through rows with at least this many
  float vertical_padding = 0.5f;  // of band height, when larger than `padding`
};

/// Heuristic caption finder used when no mask file covers an image.
/// Text rendered as light-on-dark or dark-on-light strokes produces rows with
/// many strong horizontal transitions between extreme intensities; such rows
/// are grouped into bands and each band is split into horizontal spans.
inline std::vector<TextBox> detect_text_boxes_fallback(const Image& image, const TextDetectorParams& p = {}) {
  std::vector<TextBox> boxes;
  if (image.width < 3 || image.height < 3) return boxes;
  const GrayImage g = to_gray(image);
  const int w = g.width, h = g.height;

  auto extreme = [&](float v) { return v < p.extreme_low || v > p.extreme_high; };
  std::vector<std::uint8_t> mark(static_cast<std::size_t>(w) * h, 0);
  std::vector<int> row_count(h, 0);
  // A transition joins a dark and a bright pixel either directly or across one
  // anti-aliased pixel of intermediate grey.
  for (int y = 0; y < h; ++y)
    for (int x = 0; x + 1 < w; ++x) {
      const float a = g.at(x, y), b = g.at(x + 1, y);
      if (!extreme(a)) continue;
      bool hit = extreme(b) && std::abs(a - b) >= p.edge_strength;
      if (!hit && !extreme(b) && x + 2 < w) {
        const float c = g.at(x + 2, y);
        hit = extreme(c) && std::abs(a - c) >= p.edge_strength;
      }
      if (hit) {
        mark[static_cast<std::size_t>(y) * w + x] = 1;
        ++row_count[y];
      }
    }

  std::vector<std::pair<int, int>> bands;  // [y0, y1)
  int start = -1, last = -1;
  for (int y = 0; y < h; ++y) {
    const bool text_row = row_count[y] >= std::min<float>(p.row_density * w, static_cast<float>(p.row_transitions));
    if (text_row) {
      if (start < 0) start = y;
      else if (y - last > p.row_gap + 1) {
        bands.emplace_back(start, last + 1);
        start = y;
      }
      last = y;
    }
  }
  if (start >= 0) bands.emplace_back(start, last + 1);

  for (auto [y0, y1] : bands) {
    if (y1 - y0 < p.min_band_height) continue;
    while (y0 > 0 && row_count[y0 - 1] >= p.weak_row_transitions) --y0;
    while (y1 < h && row_count[y1] >= p.weak_row_transitions) ++y1;
    const int vpad = std::max(p.padding, static_cast<int>(std::lround(p.vertical_padding * (y1 - y0))));
    std::vector<int> col(w, 0);
    for (int y = y0; y < y1; ++y)
      for (int x = 0; x < w; ++x) col[x] += mark[static_cast<std::size_t>(y) * w + x];
    int sx = -1, lx = -1, transitions = 0;
    auto flush = [&] {
      if (sx >= 0 && transitions >= p.min_transitions_per_span) {
        TextBox b{sx - p.padding, y0 - vpad, lx + 2 - sx + 2 * p.padding, y1 - y0 + 2 * vpad};
        b = clamp_box(b, w, h);
        if (b.width > 0 && b.height > 0) boxes.push_back(b);
      }
      sx = -1;
      transitions = 0;
    };
    for (int x = 0; x < w; ++x) {
      if (!col[x]) continue;
      if (sx >= 0 && x - lx > p.column_gap) flush();
      if (sx < 0) sx = x;
      lx = x;
      transitions += col[x];
    }
    flush();
  }
  return boxes;
}

}  // namespace memeclust::extract
