#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "memeclust/core/image.hpp"
#include "memeclust/core/io.hpp"
#include "memeclust/core/types.hpp"
#include "memeclust/extract/color_histogram.hpp"
#include "memeclust/extract/phash.hpp"
#include "memeclust/extract/surf.hpp"
#include "memeclust/extract/text_mask.hpp"

namespace memeclust::extract {

struct NativeConfig {
  int hash_size = 8;
  HsvBins bins{};
  SurfParams surf{};
  TextDetectorParams text_detector{};
};

struct NativeFeatures {
  FeatureSet phash{FeatureKind::phash, FeatureScope::global, 64, {}};
  FeatureSet colorhist{FeatureKind::colorhist, FeatureScope::global, 128, {}};
  FeatureSet surf{FeatureKind::surf, FeatureScope::local, 64, {}};
  std::size_t fallback_masked = 0;  // images masked by the heuristic detector
};

/// Text boxes for one image: the mask file wins; the heuristic detector runs only
/// when the mask set has no entry for the image.
inline std::vector<TextBox> text_boxes_for(const std::string& image_id, const Image& image,
                                           const std::optional<TextMaskSet>& masks, const TextDetectorParams& p,
                                           bool* used_fallback = nullptr) {
  if (masks) {
    auto it = masks->find(image_id);
    if (it != masks->end()) return it->second;
  }
  if (used_fallback) *used_fallback = true;
  return detect_text_boxes_fallback(image, p);
}

inline void extract_image(const std::string& image_id, const Image& image, const std::optional<TextMaskSet>& masks,
                          const NativeConfig& cfg, NativeFeatures& out) {
  out.phash.dim = 64;
  out.colorhist.dim = static_cast<std::size_t>(cfg.bins.total());
  out.phash.entries.push_back({image_id, {phash_to_vector(compute_phash(image, cfg.hash_size))}});
  out.colorhist.entries.push_back({image_id, {compute_hsv_histogram(image, cfg.bins)}});
  bool fallback = false;
  const Image masked = apply_text_masks(image, text_boxes_for(image_id, image, masks, cfg.text_detector, &fallback));
  if (fallback) ++out.fallback_masked;
  FeatureEntry local{image_id, {}};
  for (const auto& kp : compute_surf(masked, cfg.surf)) local.vectors.push_back(descriptor_vector(kp));
  out.surf.entries.push_back(std::move(local));
}

/// Runs all three native extractors over a manifest. `progress` (optional) is called per image.
inline NativeFeatures extract_native(const CorpusManifest& manifest, const std::filesystem::path& manifest_path,
                                     const std::optional<TextMaskSet>& masks, const NativeConfig& cfg = {},
                                     const std::function<void(std::size_t)>& progress = {}) {
  NativeFeatures out;
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    const auto& rec = manifest[i];
    const Image img = load_image(io::resolve_image_path(manifest_path, rec), rec.id);
    extract_image(rec.id, img, masks, cfg, out);
    if (progress) progress(i + 1);
  }
  return out;
}

}  // namespace memeclust::extract
