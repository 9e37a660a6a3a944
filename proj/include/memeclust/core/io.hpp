#pragma once

// Readers and writers for the interchange formats shared by every stage:
//   manifest  - JSON Lines of {id, path, label, source}
//   features  - JSON header line, then `image_id<TAB>v1 v2 ... vdim` per vector
//   matrix    - JSON header line, then `i<TAB>j<TAB>value` in row-major order
//   ocr       - JSON Lines of {image_id, text}
//   masks     - JSON Lines of {image_id, boxes: [[x, y, w, h], ...]}

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "memeclust/core/error.hpp"
#include "memeclust/core/types.hpp"

namespace memeclust::io {

namespace detail {

inline std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return in;
}

inline std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  return out;
}

inline nlohmann::json parse_json_line(const std::string& line, std::size_t lineno) {
  try {
    return nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("invalid JSON: ") + e.what(), lineno);
  }
}

inline bool blank(std::string_view s) { return s.find_first_not_of(" \t\r") == std::string_view::npos; }

inline void strip_cr(std::string& s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
}

}  // namespace detail

/// Shortest text that reads back as the identical 32-bit float (at most 9 significant digits).
inline std::string format_float(float v) {
  char buf[32];
  int len = std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(v));
  // Prefer fewer digits when they already round-trip; keeps files small and stable.
  for (int prec = 6; prec < 9; ++prec) {
    char shorter[32];
    int l = std::snprintf(shorter, sizeof shorter, "%.*g", prec, static_cast<double>(v));
    float back = 0.0f;
    std::from_chars(shorter, shorter + l, back);
    if (back == v) return std::string(shorter, l);
  }
  return std::string(buf, len);
}

inline float parse_float(std::string_view s, std::size_t lineno) {
  float v = 0.0f;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw FormatError("invalid number '" + std::string(s) + "'", lineno);
  return v;
}

template <typename Int>
inline Int parse_int(std::string_view s, std::size_t lineno) {
  Int v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw FormatError("invalid integer '" + std::string(s) + "'", lineno);
  return v;
}

// ---------------------------------------------------------------- manifest

inline CorpusManifest parse_manifest(std::istream& in) {
  std::vector<ImageRecord> records;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    detail::strip_cr(line);
    if (detail::blank(line)) continue;
    auto j = detail::parse_json_line(line, lineno);
    if (!j.is_object() || !j.contains("id") || !j.contains("path"))
      throw FormatError("manifest record needs 'id' and 'path'", lineno);
    ImageRecord r;
    try {
      r.id = j.at("id").get<std::string>();
      r.path = j.at("path").get<std::string>();
      if (j.contains("label") && !j.at("label").is_null()) r.label = j.at("label").get<std::string>();
      r.source = j.value("source", std::string{});
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("bad manifest field: ") + e.what(), lineno);
    }
    if (!seen.insert(r.id).second) throw InvariantError("duplicate image id '" + r.id + "' (line " + std::to_string(lineno) + ")");
    records.push_back(std::move(r));
  }
  return CorpusManifest(std::move(records));
}

inline CorpusManifest load_manifest(const std::filesystem::path& path) {
  auto in = detail::open_in(path);
  return parse_manifest(in);
}

inline void write_manifest(const CorpusManifest& manifest, const std::filesystem::path& path) {
  auto out = detail::open_out(path);
  for (const auto& r : manifest.images()) {
    nlohmann::ordered_json j;
    j["id"] = r.id;
    j["path"] = r.path;
    j["label"] = r.label ? nlohmann::ordered_json(*r.label) : nlohmann::ordered_json(nullptr);
    j["source"] = r.source;
    out << j.dump() << '\n';
  }
}

/// Image path of a record, resolved against the manifest's directory when relative.
inline std::filesystem::path resolve_image_path(const std::filesystem::path& manifest_path, const ImageRecord& r) {
  std::filesystem::path p(r.path);
  if (p.is_absolute()) return p;
  return manifest_path.parent_path() / p;
}

// ---------------------------------------------------------------- features

inline void write_features(const FeatureSet& set, std::ostream& out) {
  set.validate();
  nlohmann::ordered_json header;
  header["kind"] = std::string(to_string(set.kind));
  header["scope"] = std::string(to_string(set.scope));
  header["dim"] = set.dim;
  header["n_images"] = set.entries.size();
  out << header.dump() << '\n';
  for (const auto& e : set.entries) {
    if (e.image_id.find_first_of("\t\n") != std::string::npos)
      throw InvariantError("image id '" + e.image_id + "' contains a tab or newline");
    if (e.vectors.empty()) {
      out << e.image_id << '\n';
      continue;
    }
    for (const auto& v : e.vectors) {
      out << e.image_id << '\t';
      for (std::size_t d = 0; d < v.size(); ++d) {
        if (d) out << ' ';
        out << format_float(v[d]);
      }
      out << '\n';
    }
  }
}

inline void write_feature_file(const FeatureSet& set, const std::filesystem::path& path) {
  std::ostringstream buf;
  write_features(set, buf);
  auto out = detail::open_out(path);
  out << buf.str();
}

inline FeatureSet parse_features(std::istream& in) {
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(in, line)) throw FormatError("feature file is empty", 1);
  detail::strip_cr(line);
  auto header = detail::parse_json_line(line, lineno);
  FeatureSet set;
  std::size_t n_images = 0;
  try {
    set.kind = parse_feature_kind(header.at("kind").get<std::string>());
    set.scope = parse_feature_scope(header.at("scope").get<std::string>());
    set.dim = header.at("dim").get<std::size_t>();
    n_images = header.at("n_images").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad feature header: ") + e.what(), lineno);
  }
  if (set.dim == 0) throw FormatError("feature dim must be positive", lineno);

  std::unordered_map<std::string, std::size_t> slot;
  while (std::getline(in, line)) {
    ++lineno;
    detail::strip_cr(line);
    if (line.empty()) continue;
    auto tab = line.find('\t');
    std::string id = line.substr(0, tab);
    auto [it, fresh] = slot.emplace(id, set.entries.size());
    if (fresh) set.entries.push_back({id, {}});
    else if (it->second != set.entries.size() - 1)
      throw FormatError("vectors of image '" + id + "' are not contiguous", lineno);
    if (tab == std::string::npos) continue;  // image present with zero vectors

    FeatureVector v;
    v.reserve(set.dim);
    std::string_view rest(line);
    rest.remove_prefix(tab + 1);
    while (!rest.empty()) {
      auto sp = rest.find(' ');
      auto tok = rest.substr(0, sp);
      if (!tok.empty()) v.push_back(parse_float(tok, lineno));
      if (sp == std::string_view::npos) break;
      rest.remove_prefix(sp + 1);
    }
    if (v.size() != set.dim)
      throw FormatError("row has " + std::to_string(v.size()) + " values but header declares dim " +
                            std::to_string(set.dim),
                        lineno);
    set.entries.back().vectors.push_back(std::move(v));
    if (set.scope == FeatureScope::global && set.entries.back().vectors.size() > 1)
      throw FormatError("global feature set has several vectors for '" + id + "'", lineno);
  }
  if (set.entries.size() != n_images)
    throw FormatError("header declares " + std::to_string(n_images) + " images but file has " +
                      std::to_string(set.entries.size()));
  set.validate();
  return set;
}

inline FeatureSet read_feature_file(const std::filesystem::path& path) {
  auto in = detail::open_in(path);
  return parse_features(in);
}

// ---------------------------------------------------------------- matrices

inline void write_matrix(const SparseSimilarityMatrix& a, std::ostream& out) {
  nlohmann::ordered_json header;
  header["n"] = a.n();
  header["meta"] = a.meta();
  out << header.dump() << '\n';
  char buf[64];
  for (const auto& t : a.triplets()) {
    int len = std::snprintf(buf, sizeof buf, "%u\t%u\t%.9g\n", t.i, t.j, static_cast<double>(t.value));
    out.write(buf, len);
  }
}

/// Writes `a` after re-validating it; triplets are already row-major.
inline void write_matrix(const SparseSimilarityMatrix& a, const std::filesystem::path& path) {
  SparseSimilarityMatrix checked(a.n(), a.meta(), a.triplets());
  std::ostringstream buf;
  write_matrix(checked, buf);
  auto out = detail::open_out(path);
  out << buf.str();
}

inline SparseSimilarityMatrix parse_matrix(std::istream& in) {
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(in, line)) throw FormatError("matrix file is empty", 1);
  detail::strip_cr(line);
  auto header = detail::parse_json_line(line, lineno);
  std::size_t n = 0;
  std::string meta;
  try {
    n = header.at("n").get<std::size_t>();
    meta = header.value("meta", std::string{});
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad matrix header: ") + e.what(), lineno);
  }
  std::vector<Triplet> triplets;
  while (std::getline(in, line)) {
    ++lineno;
    detail::strip_cr(line);
    if (line.empty()) continue;
    auto t1 = line.find('\t');
    auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) throw FormatError("matrix row needs three tab-separated fields", lineno);
    std::string_view sv(line);
    Triplet t;
    t.i = parse_int<ImageIndex>(sv.substr(0, t1), lineno);
    t.j = parse_int<ImageIndex>(sv.substr(t1 + 1, t2 - t1 - 1), lineno);
    t.value = parse_float(sv.substr(t2 + 1), lineno);
    triplets.push_back(t);
  }
  return SparseSimilarityMatrix(n, std::move(meta), std::move(triplets));
}

inline SparseSimilarityMatrix read_matrix(const std::filesystem::path& path) {
  auto in = detail::open_in(path);
  return parse_matrix(in);
}

// ---------------------------------------------------------------- OCR and masks

inline std::vector<OcrRecord> load_ocr(const std::filesystem::path& path) {
  auto in = detail::open_in(path);
  std::vector<OcrRecord> out;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    detail::strip_cr(line);
    if (detail::blank(line)) continue;
    auto j = detail::parse_json_line(line, lineno);
    OcrRecord r;
    try {
      r.image_id = j.at("image_id").get<std::string>();
      r.text = j.value("text", std::string{});
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("bad OCR record: ") + e.what(), lineno);
    }
    if (!seen.insert(r.image_id).second)
      throw InvariantError("second OCR record for '" + r.image_id + "' (line " + std::to_string(lineno) + ")");
    out.push_back(std::move(r));
  }
  return out;
}

inline void write_ocr(const std::vector<OcrRecord>& records, const std::filesystem::path& path) {
  auto out = detail::open_out(path);
  for (const auto& r : records) {
    nlohmann::ordered_json j;
    j["image_id"] = r.image_id;
    j["text"] = r.text;
    out << j.dump() << '\n';
  }
}

inline TextMaskSet load_masks(const std::filesystem::path& path) {
  auto in = detail::open_in(path);
  TextMaskSet out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    detail::strip_cr(line);
    if (detail::blank(line)) continue;
    auto j = detail::parse_json_line(line, lineno);
    try {
      auto& boxes = out[j.at("image_id").get<std::string>()];
      for (const auto& b : j.at("boxes")) {
        TextBox box{b.at(0).get<int>(), b.at(1).get<int>(), b.at(2).get<int>(), b.at(3).get<int>()};
        if (box.width <= 0 || box.height <= 0) throw FormatError("text box needs positive width and height", lineno);
        boxes.push_back(box);
      }
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("bad mask record: ") + e.what(), lineno);
    }
  }
  return out;
}

inline void write_masks(const TextMaskSet& masks, const std::filesystem::path& path) {
  auto out = detail::open_out(path);
  for (const auto& [id, boxes] : masks) {
    nlohmann::ordered_json j;
    j["image_id"] = id;
    j["boxes"] = nlohmann::ordered_json::array();
    for (const auto& b : boxes) j["boxes"].push_back({b.x, b.y, b.width, b.height});
    out << j.dump() << '\n';
  }
}

}  // namespace memeclust::io
