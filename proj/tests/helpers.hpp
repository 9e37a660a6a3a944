#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "memeclust/core/image.hpp"
#include "memeclust/core/types.hpp"

namespace testutil {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    std::string name = "memeclust_" + tag;
    if (info) name += std::string("_") + info->test_suite_name() + "_" + info->name();
    path_ = std::filesystem::temp_directory_path() / name;
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& p) const { return path_ / p; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline void spit(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

inline memeclust::CorpusManifest manifest_of(std::size_t n, const std::vector<std::string>& labels = {}) {
  std::vector<memeclust::ImageRecord> r;
  for (std::size_t i = 0; i < n; ++i) {
    memeclust::ImageRecord rec{"img" + std::to_string(i), "images/img" + std::to_string(i) + ".png", std::nullopt, "test"};
    if (i < labels.size() && !labels[i].empty()) rec.label = labels[i];
    r.push_back(rec);
  }
  return memeclust::CorpusManifest(std::move(r));
}

/// Symmetric matrix from an undirected edge list.
inline memeclust::SparseSimilarityMatrix sym_matrix(std::size_t n,
                                                    const std::vector<std::tuple<int, int, float>>& edges,
                                                    const std::string& meta = "combined") {
  std::vector<memeclust::Triplet> t;
  for (auto [i, j, w] : edges) {
    t.push_back({static_cast<memeclust::ImageIndex>(i), static_cast<memeclust::ImageIndex>(j), w});
    t.push_back({static_cast<memeclust::ImageIndex>(j), static_cast<memeclust::ImageIndex>(i), w});
  }
  return memeclust::SparseSimilarityMatrix(n, meta, std::move(t));
}

/// Smooth random colour field with a few blobs: photo-like, no text.
inline memeclust::Image noise_photo(int w, int h, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  memeclust::Image img(w, h);
  struct Blob { double x, y, r, c[3]; };
  std::vector<Blob> blobs;
  for (int b = 0; b < 14; ++b)
    blobs.push_back({u(rng) * w, u(rng) * h, (0.05 + 0.2 * u(rng)) * w, {u(rng), u(rng), u(rng)}});
  const double gx = u(rng), gy = u(rng);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double c[3] = {0.3 + 0.3 * gx * x / w, 0.3 + 0.3 * gy * y / h, 0.4};
      for (const auto& b : blobs) {
        const double d2 = ((x - b.x) * (x - b.x) + (y - b.y) * (y - b.y)) / (b.r * b.r);
        const double a = std::exp(-d2);
        for (int k = 0; k < 3; ++k) c[k] = (1 - a) * c[k] + a * b.c[k];
      }
      img.set(x, y, static_cast<std::uint8_t>(std::clamp(c[0] * 255.0, 0.0, 255.0)),
              static_cast<std::uint8_t>(std::clamp(c[1] * 255.0, 0.0, 255.0)),
              static_cast<std::uint8_t>(std::clamp(c[2] * 255.0, 0.0, 255.0)));
    }
  return img;
}

}  // namespace testutil
