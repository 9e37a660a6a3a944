#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "memeclust/core/io.hpp"
#include "memeclust/core/types.hpp"
#include "memeclust/templates/engine.hpp"

namespace memeclust::templates {

/// Templates as one JSON document; members are written as image ids.
inline void write_templates(const TemplateSet& t, const CorpusManifest& manifest, const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  j["theta"] = t.theta;
  j["algorithm"] = std::string(to_string(t.algorithm));
  j["dimension"] = t.dimension;
  j["target"] = t.target;
  j["member_count"] = t.member_count();
  j["templates"] = nlohmann::ordered_json::array();
  for (const auto& members : t.templates) {
    auto arr = nlohmann::ordered_json::array();
    for (ImageIndex m : members) arr.push_back(manifest[m].id);
    j["templates"].push_back(std::move(arr));
  }
  auto out = io::detail::open_out(path);
  out << j.dump(1) << '\n';
}

inline TemplateSet read_templates(const std::filesystem::path& path, const CorpusManifest& manifest) {
  auto in = io::detail::open_in(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("invalid templates file: ") + e.what());
  }
  TemplateSet t;
  try {
    t.theta = j.at("theta").get<double>();
    t.algorithm = parse_algorithm(j.at("algorithm").get<std::string>());
    t.dimension = j.value("dimension", std::string{});
    t.target = j.value("target", std::size_t{0});
    for (const auto& arr : j.at("templates")) {
      std::vector<ImageIndex> members;
      for (const auto& id : arr) members.push_back(manifest.index_of(id.get<std::string>()));
      t.templates.push_back(std::move(members));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad templates file: ") + e.what());
  }
  return t;
}

/// Ranking as JSON Lines {image_id, template, score, rank}, in rank order.
inline void write_ranking(const AssignmentRanking& r, const CorpusManifest& manifest, const std::filesystem::path& path) {
  auto out = io::detail::open_out(path);
  for (const auto& a : r.entries) {
    nlohmann::ordered_json j;
    j["image_id"] = manifest[a.image].id;
    j["template"] = a.template_index;
    j["score"] = a.score;
    j["rank"] = a.rank;
    out << j.dump() << '\n';
  }
}

inline AssignmentRanking read_ranking(const std::filesystem::path& path, const CorpusManifest& manifest) {
  auto in = io::detail::open_in(path);
  AssignmentRanking r;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (io::detail::blank(line)) continue;
    auto j = io::detail::parse_json_line(line, lineno);
    try {
      r.entries.push_back({manifest.index_of(j.at("image_id").get<std::string>()), j.at("template").get<std::uint32_t>(),
                           j.at("score").get<double>(), j.at("rank").get<std::size_t>()});
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("bad ranking record: ") + e.what(), lineno);
    }
  }
  return r;
}

/// Clustering as JSON Lines {image_id, cluster_id, score, rank, is_template_member}.
inline void write_clustering(const Clustering& c, const CorpusManifest& manifest, const std::filesystem::path& path) {
  auto out = io::detail::open_out(path);
  for (const auto& e : c.images) {
    nlohmann::ordered_json j;
    j["image_id"] = manifest[e.image].id;
    j["cluster_id"] = e.cluster;
    j["score"] = e.score ? nlohmann::ordered_json(*e.score) : nlohmann::ordered_json(nullptr);
    j["rank"] = e.rank ? nlohmann::ordered_json(*e.rank) : nlohmann::ordered_json(nullptr);
    j["is_template_member"] = e.is_template_member;
    out << j.dump() << '\n';
  }
}

inline Clustering read_clustering(const std::filesystem::path& path, const CorpusManifest& manifest) {
  auto in = io::detail::open_in(path);
  Clustering c;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (io::detail::blank(line)) continue;
    auto j = io::detail::parse_json_line(line, lineno);
    try {
      ClusteredImage e;
      e.image = manifest.index_of(j.at("image_id").get<std::string>());
      e.cluster = j.at("cluster_id").get<std::uint32_t>();
      if (j.contains("score") && !j["score"].is_null()) e.score = j["score"].get<double>();
      if (j.contains("rank") && !j["rank"].is_null()) e.rank = j["rank"].get<std::size_t>();
      e.is_template_member = j.value("is_template_member", false);
      c.images.push_back(e);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("bad clustering record: ") + e.what(), lineno);
    }
  }
  std::sort(c.images.begin(), c.images.end(), [](const auto& x, const auto& y) { return x.image < y.image; });
  return c;
}

}  // namespace memeclust::templates
