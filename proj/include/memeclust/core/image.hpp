#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "memeclust/core/error.hpp"

namespace memeclust {

/// 8-bit interleaved RGB raster.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;  // row-major, 3 bytes per pixel

  Image() = default;
  Image(int w, int h, std::uint8_t r = 0, std::uint8_t g = 0, std::uint8_t b = 0) : width(w), height(h) {
    rgb.resize(static_cast<std::size_t>(w) * h * 3);
    for (std::size_t p = 0; p < rgb.size(); p += 3) {
      rgb[p] = r;
      rgb[p + 1] = g;
      rgb[p + 2] = b;
    }
  }

  bool empty() const noexcept { return width <= 0 || height <= 0; }
  std::uint8_t* px(int x, int y) { return &rgb[(static_cast<std::size_t>(y) * width + x) * 3]; }
  const std::uint8_t* px(int x, int y) const { return &rgb[(static_cast<std::size_t>(y) * width + x) * 3]; }

  void set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    auto* p = px(x, y);
    p[0] = r;
    p[1] = g;
    p[2] = b;
  }

  bool operator==(const Image&) const = default;
};

/// Single-channel float raster, values nominally in [0, 1].
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<float> data;

  GrayImage() = default;
  GrayImage(int w, int h, float fill = 0.0f) : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}
  float& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  float at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
};

/// ITU-R BT.601 luma, scaled to [0, 1].
inline GrayImage to_gray(const Image& img) {
  GrayImage g(img.width, img.height);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      const auto* p = img.px(x, y);
      g.at(x, y) = (0.299f * p[0] + 0.587f * p[1] + 0.114f * p[2]) / 255.0f;
    }
  return g;
}

inline cv::Mat to_mat(const Image& img) {
  cv::Mat bgr(img.height, img.width, CV_8UC3);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      const auto* p = img.px(x, y);
      bgr.at<cv::Vec3b>(y, x) = cv::Vec3b(p[2], p[1], p[0]);
    }
  return bgr;
}

inline Image from_mat(const cv::Mat& mat) {
  cv::Mat bgr;
  if (mat.channels() == 1) cv::cvtColor(mat, bgr, cv::COLOR_GRAY2BGR);
  else if (mat.channels() == 4) cv::cvtColor(mat, bgr, cv::COLOR_BGRA2BGR);
  else bgr = mat;
  Image img(bgr.cols, bgr.rows);
  for (int y = 0; y < bgr.rows; ++y)
    for (int x = 0; x < bgr.cols; ++x) {
      auto v = bgr.at<cv::Vec3b>(y, x);
      img.set(x, y, v[2], v[1], v[0]);
    }
  return img;
}

/// Decodes PNG/JPEG/... from disk. `image_id` only labels the error.
inline Image load_image(const std::filesystem::path& path, const std::string& image_id = {}) {
  cv::Mat m = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (m.empty()) throw ExtractionError(image_id.empty() ? path.string() : image_id, "undecodable image " + path.string());
  return from_mat(m);
}

/// Writes a lossless PNG with fixed compression settings so output bytes are stable.
inline void save_png(const Image& img, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::vector<int> params = {cv::IMWRITE_PNG_COMPRESSION, 6};
  if (!cv::imwrite(path.string(), to_mat(img), params)) throw IoError("cannot write image '" + path.string() + "'");
}

}  // namespace memeclust
