#pragma once

// Pipeline configuration: one JSON document. Every leaf key can be overridden from the
// command line as --<dotted.key>=<value>.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "memeclust/ann/adjacency.hpp"
#include "memeclust/core/error.hpp"
#include "memeclust/core/types.hpp"
#include "memeclust/dimensions.hpp"
#include "memeclust/extract/native.hpp"
#include "memeclust/templates/engine.hpp"

namespace memeclust::pipeline {

using Json = nlohmann::ordered_json;

/// Defaults. Counts in `targets` are stated for a reference corpus of 20,000 images and
/// scaled to the actual corpus when `targets.scale_to_corpus` is set.
inline Json default_config_json() {
  return Json::parse(R"({
  "paths": {
    "manifest": "corpus/manifest.jsonl",
    "masks": "corpus/masks.jsonl",
    "features": "work/features",
    "matrices": "work/matrices",
    "output": "work/output"
  },
  "extraction": {
    "hash_size": 8,
    "hsv_bins": [8, 4, 4],
    "surf": {"octaves": 4, "initial_step": 1, "hessian_threshold": 0.0004, "max_keypoints": 1000}
  },
  "adjacency": {"k": 100, "sparsity_epsilon": 0.001, "symmetrization": "max"},
  "dimensions": {
    "form": ["phash", "colorhist", "surf"],
    "visual_content": ["visual"],
    "textual_content": ["text"],
    "identity": ["face"],
    "combined": ["phash", "colorhist", "surf", "visual", "text", "face"]
  },
  "clustering": {"algorithm": "louvain", "seed": 1, "dbscan": {"eps": null, "min_pts": 3}},
  "targets": {
    "matrix": "combined",
    "template": 5000,
    "increments": [5000, 8500, 11000],
    "reference_corpus": 20000,
    "scale_to_corpus": true
  },
  "evaluation": {
    "window": 1500,
    "max_probe_rank": 5000,
    "imposter_tasks": 200,
    "relatedness_tasks": 200,
    "task_seed": 1
  },
  "server": {"host": "127.0.0.1", "port": 8080}
})");
}

/// Recursive merge: objects merge key by key, everything else replaces.
inline void merge_json(Json& base, const Json& patch) {
  if (!patch.is_object() || !base.is_object()) {
    base = patch;
    return;
  }
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    if (base.contains(it.key()) && base[it.key()].is_object() && it.value().is_object())
      merge_json(base[it.key()], it.value());
    else
      base[it.key()] = it.value();
  }
}

/// Dotted paths of all leaves (arrays count as leaves).
inline std::vector<std::string> leaf_keys(const Json& j, const std::string& prefix = "") {
  std::vector<std::string> out;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (it.value().is_object()) {
      auto sub = leaf_keys(it.value(), key);
      out.insert(out.end(), sub.begin(), sub.end());
    } else {
      out.push_back(key);
    }
  }
  return out;
}

/// Sets a dotted key from command-line text. Text that parses as JSON is taken as JSON,
/// anything else as a string.
inline void set_dotted(Json& j, const std::string& dotted, const std::string& text) {
  Json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = dotted.find('.', start);
    const std::string part = dotted.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (dot == std::string::npos) {
      Json value;
      try {
        value = Json::parse(text);
      } catch (const Json::parse_error&) {
        value = text;
      }
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

struct PipelineConfig {
  struct Paths {
    std::filesystem::path manifest, masks, features, matrices, output;
  } paths;
  extract::NativeConfig extraction{};
  ann::AdjacencyConfig adjacency{};
  std::map<Dimension, DimensionSpec> dimensions;
  templates::ClusterSettings clustering{};
  std::string matrix = "combined";
  std::size_t template_target = 5000;
  std::vector<std::size_t> increments{5000, 8500, 11000};
  std::size_t reference_corpus = 20000;
  bool scale_to_corpus = true;
  std::size_t window = 1500;
  std::size_t max_probe_rank = 5000;
  std::size_t imposter_tasks = 200;
  std::size_t relatedness_tasks = 200;
  std::uint64_t task_seed = 1;
  std::string host = "127.0.0.1";
  int port = 8080;

  /// Count scaled from the reference corpus to `corpus` images, rounded to nearest.
  std::size_t scaled(std::size_t count, std::size_t corpus) const {
    if (!scale_to_corpus) return count;
    return static_cast<std::size_t>(
        std::llround(static_cast<double>(count) * static_cast<double>(corpus) / static_cast<double>(reference_corpus)));
  }
  std::size_t template_target_for(std::size_t corpus) const { return scaled(template_target, corpus); }
  std::vector<std::size_t> increments_for(std::size_t corpus) const {
    std::vector<std::size_t> out;
    for (auto n : increments) out.push_back(scaled(n, corpus));
    return out;
  }
  std::size_t window_for(std::size_t corpus) const { return std::max<std::size_t>(1, scaled(window, corpus)); }
  std::size_t max_probe_rank_for(std::size_t corpus) const { return scaled(max_probe_rank, corpus); }

  void validate() const {
    adjacency.validate();
    if (!std::is_sorted(increments.begin(), increments.end())) throw ContractViolation("increments must be ascending");
    if (increments.empty()) throw ContractViolation("at least one increment is required");
    if (reference_corpus == 0) throw ContractViolation("reference_corpus must be positive");
    if (window == 0) throw ContractViolation("window must be positive");
    if (extraction.surf.max_keypoints > kMaxLocalVectorsPerImage)
      throw ContractViolation("max_keypoints above " + std::to_string(kMaxLocalVectorsPerImage));
    if (port < 0 || port > 65535) throw ContractViolation("server port out of range");
  }
};

inline PipelineConfig config_from_json(const Json& j) {
  PipelineConfig c;
  try {
    const auto& p = j.at("paths");
    c.paths = {p.at("manifest").get<std::string>(), p.at("masks").get<std::string>(),
               p.at("features").get<std::string>(), p.at("matrices").get<std::string>(),
               p.at("output").get<std::string>()};

    const auto& e = j.at("extraction");
    c.extraction.hash_size = e.at("hash_size").get<int>();
    const auto bins = e.at("hsv_bins").get<std::vector<int>>();
    if (bins.size() != 3) throw FormatError("extraction.hsv_bins needs three counts");
    c.extraction.bins = {bins[0], bins[1], bins[2]};
    const auto& s = e.at("surf");
    c.extraction.surf.octaves = s.at("octaves").get<int>();
    c.extraction.surf.initial_step = s.at("initial_step").get<int>();
    c.extraction.surf.hessian_threshold = s.at("hessian_threshold").get<float>();
    c.extraction.surf.max_keypoints = s.at("max_keypoints").get<std::size_t>();

    const auto& a = j.at("adjacency");
    c.adjacency.k = a.at("k").get<std::size_t>();
    c.adjacency.sparsity_epsilon = a.at("sparsity_epsilon").get<double>();
    const auto sym = a.at("symmetrization").get<std::string>();
    if (sym == "max") c.adjacency.symmetrization = ann::Symmetrization::max;
    else if (sym == "mean") c.adjacency.symmetrization = ann::Symmetrization::mean;
    else throw FormatError("adjacency.symmetrization must be 'max' or 'mean'");

    for (auto it = j.at("dimensions").begin(); it != j.at("dimensions").end(); ++it) {
      DimensionSpec spec{parse_dimension(it.key()), {}};
      for (const auto& k : it.value()) spec.constituents.push_back(parse_feature_kind(k.get<std::string>()));
      c.dimensions[spec.name] = spec;
    }
    for (auto d : kAllDimensions)
      if (!c.dimensions.count(d)) c.dimensions[d] = default_dimension_spec(d);

    const auto& cl = j.at("clustering");
    c.clustering.algorithm = templates::parse_algorithm(cl.at("algorithm").get<std::string>());
    c.clustering.seed = cl.at("seed").get<std::uint64_t>();
    const auto& db = cl.at("dbscan");
    c.clustering.dbscan.eps =
        db.at("eps").is_null() ? std::numeric_limits<double>::infinity() : db.at("eps").get<double>();
    c.clustering.dbscan.min_pts = db.at("min_pts").get<std::size_t>();

    const auto& t = j.at("targets");
    c.matrix = t.at("matrix").get<std::string>();
    c.template_target = t.at("template").get<std::size_t>();
    c.increments = t.at("increments").get<std::vector<std::size_t>>();
    c.reference_corpus = t.at("reference_corpus").get<std::size_t>();
    c.scale_to_corpus = t.at("scale_to_corpus").get<bool>();

    const auto& ev = j.at("evaluation");
    c.window = ev.at("window").get<std::size_t>();
    c.max_probe_rank = ev.at("max_probe_rank").get<std::size_t>();
    c.imposter_tasks = ev.at("imposter_tasks").get<std::size_t>();
    c.relatedness_tasks = ev.at("relatedness_tasks").get<std::size_t>();
    c.task_seed = ev.at("task_seed").get<std::uint64_t>();

    c.host = j.at("server").at("host").get<std::string>();
    c.port = j.at("server").at("port").get<int>();
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError(std::string("bad config: ") + ex.what());
  }
  c.validate();
  return c;
}

/// Defaults overlaid with the file at `path`.
inline Json load_config_json(const std::filesystem::path& path) {
  Json j = default_config_json();
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  try {
    merge_json(j, Json::parse(in));
  } catch (const Json::parse_error& e) {
    throw FormatError("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return j;
}

}  // namespace memeclust::pipeline
