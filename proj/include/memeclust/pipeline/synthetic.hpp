#pragma once

// Procedural meme-like corpus with known template labels, caption text and caption
// geometry. Every byte of output is a function of the SyntheticSpec and its seed.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgproc.hpp>

#include "memeclust/core/error.hpp"
#include "memeclust/core/image.hpp"
#include "memeclust/core/io.hpp"
#include "memeclust/core/types.hpp"

namespace memeclust::pipeline {

struct PerturbationMix {
  double caption = 0.35;  // new caption only
  double crop = 0.20;
  double recolor = 0.15;
  double paste = 0.20;    // template shrunk onto an unrelated scene
  double face = 0.10;     // another template's face glyph stamped onto the template

  double sum() const { return caption + crop + recolor + paste + face; }
};

struct SyntheticSpec {
  std::size_t n_templates = 40;
  std::size_t variants_per_template = 50;
  PerturbationMix mix{};
  std::uint64_t seed = 7;
  std::size_t family_size = 4;  // templates sharing a background and layout
  int image_size = 160;
  double caption_probability = 0.85;  // for perturbations other than caption-only

  void validate() const {
    if (n_templates < 1 || variants_per_template < 1 || family_size < 1) throw ContractViolation("synthetic counts must be at least 1");
    if (std::abs(mix.sum() - 1.0) > 1e-9) throw ContractViolation("perturbation mix fractions must sum to 1");
    if (image_size < 64) throw ContractViolation("synthetic images must be at least 64 pixels wide");
  }
};

enum class Perturbation { caption, crop, recolor, paste, face };

struct SyntheticImage {
  ImageRecord record;
  Perturbation perturbation = Perturbation::caption;
  std::string caption;
  std::vector<TextBox> caption_boxes;
};

struct SyntheticCorpus {
  CorpusManifest manifest;
  std::vector<OcrRecord> ocr;
  TextMaskSet masks;
  std::vector<SyntheticImage> images;
};

namespace synth_detail {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : g_(seed) {}
  std::uint64_t next() { return g_(); }
  double uniform() { return static_cast<double>(g_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  int integer(int lo, int hi) { return lo + static_cast<int>(g_() % static_cast<std::uint64_t>(hi - lo + 1)); }
  cv::Scalar color() { return cv::Scalar(integer(0, 255), integer(0, 255), integer(0, 255)); }

 private:
  std::mt19937_64 g_;
};

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c = 0) {
  std::uint64_t x = a * 0x9E3779B97F4A7C15ull ^ (b + 0x632BE59BD9B4E019ull) * 0xBF58476D1CE4E5B9ull ^
                    (c + 0x94D049BB133111EBull) * 0xD6E8FEB86659FD93ull;
  x ^= x >> 31;
  return x;
}

inline constexpr std::array<const char*, 48> kWords = {
    "when",  "you",   "the",   "me",    "that",  "feel",  "how",    "nobody", "my",    "face",  "every",  "time",
    "just",  "wait",  "they",  "said",  "no",    "one",   "ever",   "again",  "real",  "life", "boss",   "monday",
    "cat",   "dog",   "pizza", "code",  "sleep", "work",  "friday", "mood",   "still", "not",  "sure",   "if",
    "this",  "is",    "fine",  "why",   "what",  "wow",   "much",   "such",   "big",   "brain", "small", "plan"};

inline constexpr std::array<const char*, 40> kCatch = {
    "change my mind", "one does not",  "y u no",        "i too like",    "much wow",     "stonks",
    "this is fine",   "not sure if",   "shut up and",   "brace yourself", "what if i",   "is this a",
    "but why",        "ok boomer",     "i am once",     "surprised",     "big brain",    "so hot",
    "hide the pain",  "distracted",    "drake no",      "galaxy brain",  "press f",      "sad keanu",
    "bad luck",       "success kid",   "first world",   "ancient",       "grumpy",       "overly",
    "roll safe",      "expanding",     "two buttons",   "left exit",     "always has",   "trade offer",
    "gru plan",       "panik kalm",    "woman yelling", "buff doge"};

struct FaceStyle {
  cv::Scalar skin, hair, eye, mouth;
  double aspect;
  int hair_kind;
};

struct TemplateRecipe {
  cv::Mat base;  // BGR, image_size square, no caption
  FaceStyle face;
  cv::Point face_center;
  int face_radius;
  std::vector<std::string> phrases;
};

inline void draw_face(cv::Mat& img, cv::Point c, int r, const FaceStyle& f) {
  const cv::Size axes(r, static_cast<int>(r * f.aspect));
  if (f.hair_kind == 0) cv::ellipse(img, c - cv::Point(0, r / 3), axes + cv::Size(r / 5, r / 5), 0, 180, 360, f.hair, -1, cv::LINE_AA);
  cv::ellipse(img, c, axes, 0, 0, 360, f.skin, -1, cv::LINE_AA);
  if (f.hair_kind == 1) cv::rectangle(img, c + cv::Point(-r, -axes.height), c + cv::Point(r, -axes.height + r / 2), f.hair, -1);
  if (f.hair_kind == 2) cv::circle(img, c + cv::Point(0, -axes.height), r / 2, f.hair, -1, cv::LINE_AA);
  const int eye = std::max(2, r / 5);
  cv::circle(img, c + cv::Point(-r / 2 + 1, -r / 4), eye, f.eye, -1, cv::LINE_AA);
  cv::circle(img, c + cv::Point(r / 2 - 1, -r / 4), eye, f.eye, -1, cv::LINE_AA);
  cv::circle(img, c + cv::Point(-r / 2 + 1, -r / 4), std::max(1, eye / 2), cv::Scalar(255, 255, 255), -1);
  cv::ellipse(img, c + cv::Point(0, r / 3), cv::Size(r / 2, std::max(2, r / 5)), 0, 0, 180, f.mouth, std::max(1, r / 8),
              cv::LINE_AA);
}

inline void draw_shapes(cv::Mat& img, Rng& rng, int count) {
  const int size = img.cols;
  for (int s = 0; s < count; ++s) {
    const cv::Scalar col = rng.color();
    const cv::Point p(rng.integer(0, size - 1), rng.integer(0, size - 1));
    const int extent = rng.integer(size / 14, size / 5);
    switch (rng.integer(0, 3)) {
      case 0: cv::circle(img, p, extent, col, -1, cv::LINE_AA); break;
      case 1:
        cv::ellipse(img, p, cv::Size(extent, rng.integer(extent / 3 + 1, extent)), rng.uniform(0, 180), 0, 360, col, -1,
                    cv::LINE_AA);
        break;
      case 2: {
        std::vector<cv::Point> poly;
        const int corners = rng.integer(3, 6);
        for (int c = 0; c < corners; ++c) {
          const double a = 2 * M_PI * (c + rng.uniform(0.0, 0.6)) / corners;
          const double r = extent * rng.uniform(0.5, 1.0);
          poly.emplace_back(p.x + static_cast<int>(r * std::cos(a)), p.y + static_cast<int>(r * std::sin(a)));
        }
        cv::fillConvexPoly(img, poly, col, cv::LINE_AA);
        break;
      }
      default: cv::rectangle(img, p, p + cv::Point(extent, rng.integer(size / 14, size / 5)), col, -1);
    }
  }
}

/// Smooth random relief (two octaves of bicubic value noise) added to every channel.
inline void add_texture(cv::Mat& img, Rng& rng, double amplitude) {
  cv::Mat relief(img.size(), CV_32F, cv::Scalar(0));
  for (int cells : {5, 11}) {
    cv::Mat coarse(cells, cells, CV_32F);
    for (int y = 0; y < cells; ++y)
      for (int x = 0; x < cells; ++x) coarse.at<float>(y, x) = static_cast<float>(rng.uniform(-1.0, 1.0));
    cv::Mat fine;
    cv::resize(coarse, fine, img.size(), 0, 0, cv::INTER_CUBIC);
    relief += fine * (cells == 5 ? 1.0 : 0.6);
  }
  for (int y = 0; y < img.rows; ++y)
    for (int x = 0; x < img.cols; ++x) {
      auto& p = img.at<cv::Vec3b>(y, x);
      const double d = amplitude * relief.at<float>(y, x);
      for (int c = 0; c < 3; ++c) p[c] = cv::saturate_cast<uchar>(p[c] + d);
    }
}

/// Two-colour gradient, value-noise relief and a handful of shapes.
inline cv::Mat random_scene(Rng& rng, int size) {
  cv::Mat img(size, size, CV_8UC3);
  const cv::Scalar c0 = rng.color(), c1 = rng.color();
  const double angle = rng.uniform(0, 2 * M_PI);
  const double dx = std::cos(angle), dy = std::sin(angle);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const double u = std::clamp(((x - size / 2.0) * dx + (y - size / 2.0) * dy) / size + 0.5, 0.0, 1.0);
      img.at<cv::Vec3b>(y, x) = cv::Vec3b(static_cast<uchar>(c0[0] + u * (c1[0] - c0[0])),
                                          static_cast<uchar>(c0[1] + u * (c1[1] - c0[1])),
                                          static_cast<uchar>(c0[2] + u * (c1[2] - c0[2])));
    }
  add_texture(img, rng, 40.0);
  draw_shapes(img, rng, rng.integer(4, 6));
  return img;
}

/// Templates come in families of `family_size`: members share the background and
/// part of the layout, and differ in their own shapes, face and catchphrase.
inline TemplateRecipe make_template(std::uint64_t seed, std::size_t t, std::size_t family_size, int size) {
  Rng family(mix_seed(seed, t / family_size, 2));
  TemplateRecipe rec;
  rec.base = random_scene(family, size);

  // Face geometry is a family trait; colours and one extra shape belong to the member.
  const double aspect = family.uniform(1.0, 1.35);
  const int hair = family.integer(0, 2);
  rec.face_radius = family.integer(size / 9, size / 6);
  rec.face_center = cv::Point(family.integer(size / 4, 3 * size / 4), family.integer(size / 3, 3 * size / 4));
  Rng rng(mix_seed(seed, t, 1));
  draw_shapes(rec.base, rng, 1);
  rec.face = {rng.color(), rng.color(), rng.color(), rng.color(), aspect, hair};
  draw_face(rec.base, rec.face_center, rec.face_radius, rec.face);

  const std::string catchphrase = kCatch[t % kCatch.size()];
  for (int p = 0; p < 4; ++p) {
    std::string phrase = catchphrase;
    const int extra = rng.integer(1, 2);
    for (int w = 0; w < extra; ++w) phrase += std::string(" ") + kWords[rng.integer(0, kWords.size() - 1)];
    rec.phrases.push_back(phrase);
  }
  return rec;
}

/// Draws white caption text on a black band at the top or bottom; returns the text box.
inline TextBox draw_caption(cv::Mat& img, const std::string& text, bool top) {
  const int font = cv::FONT_HERSHEY_SIMPLEX;
  const int margin = 4;
  double scale = 0.5;
  int baseline = 0;
  cv::Size sz = cv::getTextSize(text, font, scale, 1, &baseline);
  while (sz.width > img.cols - 2 * margin && scale > 0.2) {
    scale -= 0.025;
    sz = cv::getTextSize(text, font, scale, 1, &baseline);
  }
  const int band = sz.height + baseline + 8;
  const int y0 = top ? 0 : img.rows - band;
  cv::rectangle(img, cv::Point(0, y0), cv::Point(img.cols - 1, y0 + band - 1), cv::Scalar(0, 0, 0), -1);
  const int x = std::max(margin, (img.cols - sz.width) / 2);
  const int y = y0 + 4 + sz.height;
  cv::putText(img, text, cv::Point(x, y), font, scale, cv::Scalar(255, 255, 255), 1, cv::LINE_AA);
  return TextBox{x - 1, y - sz.height - 1, sz.width + 2, sz.height + baseline + 2};
}

inline cv::Mat shift_hue(const cv::Mat& bgr, int delta, double sat_scale) {
  cv::Mat hsv;
  cv::cvtColor(bgr, hsv, cv::COLOR_BGR2HSV);
  for (int y = 0; y < hsv.rows; ++y)
    for (int x = 0; x < hsv.cols; ++x) {
      auto& p = hsv.at<cv::Vec3b>(y, x);
      p[0] = static_cast<uchar>(((p[0] + delta) % 180 + 180) % 180);
      p[1] = cv::saturate_cast<uchar>(p[1] * sat_scale);
    }
  cv::Mat out;
  cv::cvtColor(hsv, out, cv::COLOR_HSV2BGR);
  return out;
}

inline void jitter(cv::Mat& img, Rng& rng) {
  const double tx = rng.integer(-3, 3), ty = rng.integer(-3, 3);
  cv::Mat m = (cv::Mat_<double>(2, 3) << 1, 0, tx, 0, 1, ty);
  cv::Mat shifted;
  cv::warpAffine(img, shifted, m, img.size(), cv::INTER_NEAREST, cv::BORDER_REPLICATE);
  const int bright = rng.integer(-10, 10);
  for (int y = 0; y < shifted.rows; ++y)
    for (int x = 0; x < shifted.cols; ++x) {
      auto& p = shifted.at<cv::Vec3b>(y, x);
      for (int c = 0; c < 3; ++c) p[c] = cv::saturate_cast<uchar>(p[c] + bright + rng.integer(-4, 4));
    }
  img = shifted;
}

}  // namespace synth_detail

inline constexpr std::string_view to_string(Perturbation p) {
  switch (p) {
    case Perturbation::caption: return "caption";
    case Perturbation::crop: return "crop";
    case Perturbation::recolor: return "recolor";
    case Perturbation::paste: return "paste";
    case Perturbation::face: return "face";
  }
  return "?";
}

/// Renders the corpus into memory. `emit(image_record, bgr)` receives every image.
template <typename Emit>
SyntheticCorpus generate_synthetic(const SyntheticSpec& spec, Emit&& emit) {
  using namespace synth_detail;
  spec.validate();
  const int size = spec.image_size;
  std::vector<TemplateRecipe> recipes;
  for (std::size_t t = 0; t < spec.n_templates; ++t) recipes.push_back(make_template(spec.seed, t, spec.family_size, size));

  SyntheticCorpus corpus;
  std::vector<ImageRecord> records;
  for (std::size_t t = 0; t < spec.n_templates; ++t)
    for (std::size_t v = 0; v < spec.variants_per_template; ++v) {
      Rng rng(mix_seed(spec.seed, t, 1000 + v));
      const auto& rec = recipes[t];
      const double pick = rng.uniform();
      const auto& m = spec.mix;
      Perturbation kind = Perturbation::face;
      if (pick < m.caption) kind = Perturbation::caption;
      else if (pick < m.caption + m.crop) kind = Perturbation::crop;
      else if (pick < m.caption + m.crop + m.recolor) kind = Perturbation::recolor;
      else if (pick < m.caption + m.crop + m.recolor + m.paste) kind = Perturbation::paste;

      auto other_template = [&] {
        if (spec.n_templates == 1) return t;
        std::size_t o = t;
        while (o == t) o = static_cast<std::size_t>(rng.next() % spec.n_templates);
        return o;
      };

      cv::Mat img;
      switch (kind) {
        case Perturbation::caption: img = rec.base.clone(); break;
        case Perturbation::crop: {
          const int w = static_cast<int>(size * rng.uniform(0.72, 0.9));
          const cv::Rect roi(rng.integer(0, size - w), rng.integer(0, size - w), w, w);
          cv::resize(rec.base(roi), img, cv::Size(size, size), 0, 0, cv::INTER_AREA);
          break;
        }
        case Perturbation::recolor:
          img = shift_hue(rec.base, rng.integer(12, 30) * (rng.integer(0, 1) ? 1 : -1), rng.uniform(0.8, 1.2));
          break;
        case Perturbation::paste: {
          img = random_scene(rng, size);
          const int w = static_cast<int>(size * rng.uniform(0.55, 0.75));
          cv::Mat small;
          cv::resize(rec.base, small, cv::Size(w, w), 0, 0, cv::INTER_AREA);
          small.copyTo(img(cv::Rect(rng.integer(0, size - w), rng.integer(0, size - w), w, w)));
          break;
        }
        case Perturbation::face: {
          const auto& stranger = recipes[other_template()];
          img = rec.base.clone();
          const int r = static_cast<int>(stranger.face_radius * rng.uniform(1.0, 1.4));
          draw_face(img, cv::Point(rng.integer(r, size - r), rng.integer(r + r / 2, size - r)), r, stranger.face);
          break;
        }
      }
      jitter(img, rng);

      SyntheticImage out;
      char id[32];
      std::snprintf(id, sizeof id, "t%03zu_v%03zu", t, v);
      out.record.id = id;
      out.record.path = std::string("images/") + id + ".png";
      out.record.label = std::string("template_") + std::to_string(t);
      out.record.source = "synthetic";
      out.perturbation = kind;
      const bool captioned = kind == Perturbation::caption || rng.uniform() < spec.caption_probability;
      if (captioned) {
        out.caption = rec.phrases[rng.integer(0, static_cast<int>(rec.phrases.size()) - 1)];
        out.caption_boxes.push_back(draw_caption(img, out.caption, rng.integer(0, 1) == 0));
      }
      corpus.ocr.push_back({out.record.id, out.caption});
      if (!out.caption_boxes.empty()) corpus.masks[out.record.id] = out.caption_boxes;
      emit(out.record, img);
      records.push_back(out.record);
      corpus.images.push_back(std::move(out));
    }
  corpus.manifest = CorpusManifest(std::move(records));
  return corpus;
}

/// Writes images, manifest.jsonl, ocr.jsonl and masks.jsonl under `out_dir`.
inline SyntheticCorpus write_synthetic(const SyntheticSpec& spec, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir / "images");
  auto corpus = generate_synthetic(spec, [&](const ImageRecord& r, const cv::Mat& bgr) {
    save_png(from_mat(bgr), out_dir / r.path);
  });
  io::write_manifest(corpus.manifest, out_dir / "manifest.jsonl");
  io::write_ocr(corpus.ocr, out_dir / "ocr.jsonl");
  io::write_masks(corpus.masks, out_dir / "masks.jsonl");
  return corpus;
}

/// Base rendering of one template without caption or perturbation.
inline Image synthetic_template_image(const SyntheticSpec& spec, std::size_t t) {
  return from_mat(synth_detail::make_template(spec.seed, t, spec.family_size, spec.image_size).base);
}

}  // namespace memeclust::pipeline
