#pragma once

// Human-judgment tasks: sampling, persistence, validation and scoring.

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "memeclust/cluster/graph.hpp"
#include "memeclust/core/error.hpp"
#include "memeclust/core/io.hpp"
#include "memeclust/core/types.hpp"
#include "memeclust/eval/metrics.hpp"
#include "memeclust/templates/engine.hpp"

namespace memeclust::eval {

enum class TaskKind { imposter_host, relatedness };

inline constexpr std::string_view to_string(TaskKind k) {
  return k == TaskKind::imposter_host ? "imposter_host" : "relatedness";
}

inline TaskKind parse_task_kind(std::string_view s) {
  if (s == "imposter_host") return TaskKind::imposter_host;
  if (s == "relatedness") return TaskKind::relatedness;
  throw FormatError("unknown task kind '" + std::string(s) + "'");
}

/// Relatedness dimensions a judge may tick.
inline constexpr std::array<std::string_view, 4> kJudgedDimensions = {"form", "visual_content", "textual_content",
                                                                      "identity"};

inline constexpr std::size_t kImagesPerTask = 5;

struct TaskDefinition {
  std::string task_id;
  TaskKind kind = TaskKind::imposter_host;
  std::uint32_t cluster_id = 0;          // host cluster, or the probe's cluster
  std::vector<std::string> presented;    // 5 image ids in display order
  std::string truth;                     // imposter id, or the probe id for relatedness
  bool prompt_dimensions = false;
  std::optional<std::size_t> probe_rank; // relatedness only
  std::size_t cluster_size = 0;          // weight used when scoring

  bool operator==(const TaskDefinition&) const = default;
};

struct JudgmentRecord {
  std::string task_id;
  TaskKind kind = TaskKind::imposter_host;
  std::uint32_t cluster_id = 0;
  std::vector<std::string> presented;
  std::string answer;                    // chosen imposter id, or "yes" / "no"
  std::vector<std::string> dimensions;   // only for prompted "yes" answers
  std::string annotator;
  std::string timestamp;

  bool operator==(const JudgmentRecord&) const = default;
};

namespace task_detail {

inline std::size_t draw(std::mt19937_64& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }

// k distinct elements of `pool`, chosen by a partial Fisher-Yates pass.
inline std::vector<ImageIndex> pick_distinct(std::vector<ImageIndex> pool, std::size_t k, std::mt19937_64& rng) {
  for (std::size_t i = 0; i < k; ++i) std::swap(pool[i], pool[i + draw(rng, pool.size() - i)]);
  pool.resize(k);
  return pool;
}

inline std::string task_id(std::string_view prefix, std::size_t n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s-%06zu", std::string(prefix).c_str(), n);
  return buf;
}

}  // namespace task_detail

/// Four members of a host cluster plus one image from another cluster, in shuffled order.
/// Hosts are drawn uniformly among clusters with at least four members.
inline std::vector<TaskDefinition> sample_imposter_host_tasks(const templates::Clustering& clustering,
                                                              const CorpusManifest& manifest, std::size_t n_tasks,
                                                              std::uint64_t seed) {
  using namespace task_detail;
  std::map<std::uint32_t, std::vector<ImageIndex>> by_cluster;
  for (const auto& c : clustering.images) by_cluster[c.cluster].push_back(c.image);
  std::vector<std::uint32_t> ids, hosts;
  for (const auto& [cid, members] : by_cluster) {
    ids.push_back(cid);
    if (members.size() >= 4) hosts.push_back(cid);
  }
  if (ids.size() < 2) throw ContractViolation("imposter-host tasks need at least two clusters");
  if (hosts.empty()) throw ContractViolation("imposter-host tasks need a cluster with at least four members");

  std::mt19937_64 rng(seed);
  std::vector<TaskDefinition> out;
  out.reserve(n_tasks);
  for (std::size_t t = 0; t < n_tasks; ++t) {
    const std::uint32_t host = hosts[draw(rng, hosts.size())];
    const auto& members = by_cluster.at(host);
    auto shown = pick_distinct(members, 4, rng);
    std::uint32_t other = host;
    while (other == host) other = ids[draw(rng, ids.size())];
    const auto& pool = by_cluster.at(other);
    const ImageIndex imposter = pool[draw(rng, pool.size())];
    shown.push_back(imposter);
    cluster::seeded_shuffle(shown, rng);

    TaskDefinition task;
    task.task_id = task_id("ih", t + 1);
    task.kind = TaskKind::imposter_host;
    task.cluster_id = host;
    for (ImageIndex i : shown) task.presented.push_back(manifest[i].id);
    task.truth = manifest[imposter].id;
    task.cluster_size = members.size();
    out.push_back(std::move(task));
  }
  return out;
}

struct RelatednessSampling {
  std::vector<TaskDefinition> tasks;
  std::size_t resampled = 0;  // probes redrawn because their template had fewer than four members
};

/// A matched image drawn uniformly by rank in [1, max_rank], shown with four template
/// members of its assigned cluster. Half of the tasks ask for the related dimensions.
inline RelatednessSampling sample_relatedness_tasks(const templates::Clustering& clustering,
                                                    const templates::AssignmentRanking& ranking,
                                                    const CorpusManifest& manifest, std::size_t n_tasks,
                                                    std::uint64_t seed, std::size_t max_rank = 0) {
  using namespace task_detail;
  std::map<std::uint32_t, std::vector<ImageIndex>> core;
  std::map<std::uint32_t, std::size_t> sizes;
  for (const auto& c : clustering.images) {
    ++sizes[c.cluster];
    if (c.is_template_member) core[c.cluster].push_back(c.image);
  }
  std::size_t limit = ranking.entries.size();
  if (max_rank) limit = std::min(limit, max_rank);
  std::vector<const templates::Assignment*> eligible;
  for (std::size_t r = 0; r < limit; ++r) {
    const auto& a = ranking.entries[r];
    auto it = core.find(a.template_index);
    if (a.score > 0.0 && it != core.end() && it->second.size() >= 4) eligible.push_back(&a);
  }
  if (limit == 0) throw ContractViolation("relatedness tasks need a non-empty ranking");
  if (eligible.empty()) throw ContractViolation("no ranked image belongs to a template with four or more members");

  std::mt19937_64 rng(seed);
  RelatednessSampling out;
  for (std::size_t t = 0; t < n_tasks; ++t) {
    const templates::Assignment* probe = nullptr;
    while (!probe) {
      const auto& a = ranking.entries[draw(rng, limit)];
      auto it = core.find(a.template_index);
      if (a.score > 0.0 && it != core.end() && it->second.size() >= 4) probe = &a;
      else ++out.resampled;
    }
    auto shown = pick_distinct(core.at(probe->template_index), 4, rng);
    shown.push_back(probe->image);
    cluster::seeded_shuffle(shown, rng);

    TaskDefinition task;
    task.task_id = task_id("rel", t + 1);
    task.kind = TaskKind::relatedness;
    task.cluster_id = probe->template_index;
    for (ImageIndex i : shown) task.presented.push_back(manifest[i].id);
    task.truth = manifest[probe->image].id;
    task.prompt_dimensions = (rng() >> 63) != 0;
    task.probe_rank = probe->rank;
    auto sz = sizes.find(probe->template_index);
    task.cluster_size = sz != sizes.end() ? sz->second : core.at(probe->template_index).size();
    out.tasks.push_back(std::move(task));
  }
  return out;
}

/// Reason a judgment is unacceptable for `task`, or nullopt when it is valid.
inline std::optional<std::string> judgment_problem(const TaskDefinition& task, const JudgmentRecord& j) {
  if (j.task_id != task.task_id) return "judgment refers to task '" + j.task_id + "'";
  if (j.kind != task.kind) return "judgment kind does not match task kind";
  if (!j.presented.empty()) {
    std::multiset<std::string> a(j.presented.begin(), j.presented.end()), b(task.presented.begin(), task.presented.end());
    if (a != b) return "presented images differ from the task's images";
  }
  if (task.kind == TaskKind::imposter_host) {
    if (std::find(task.presented.begin(), task.presented.end(), j.answer) == task.presented.end())
      return "imposter answer '" + j.answer + "' is not one of the task's images";
    if (!j.dimensions.empty()) return "imposter-host judgments carry no dimension labels";
  } else {
    if (j.answer != "yes" && j.answer != "no") return "relatedness answer must be 'yes' or 'no'";
    if (!j.dimensions.empty() && !(task.prompt_dimensions && j.answer == "yes"))
      return "dimension labels are only accepted for prompted 'yes' answers";
    for (const auto& d : j.dimensions)
      if (std::find(kJudgedDimensions.begin(), kJudgedDimensions.end(), d) == kJudgedDimensions.end())
        return "unknown dimension label '" + d + "'";
  }
  return std::nullopt;
}

struct JudgmentScores {
  std::optional<double> imposter_accuracy;     // weighted by host cluster size
  std::optional<double> relatedness_accuracy;  // weighted by probe cluster size
  std::map<std::string, double> dimension_frequency;  // among prompted "yes" answers
  std::size_t imposter_count = 0;
  std::size_t relatedness_count = 0;
  std::size_t prompted_yes = 0;
  std::vector<std::string> rejected;  // one message per dropped judgment
};

inline JudgmentScores score_judgments(const std::vector<TaskDefinition>& tasks,
                                      const std::vector<JudgmentRecord>& judgments) {
  std::map<std::string, const TaskDefinition*> by_id;
  for (const auto& t : tasks) by_id[t.task_id] = &t;
  JudgmentScores s;
  double ih_num = 0, ih_den = 0, rel_num = 0, rel_den = 0;
  std::map<std::string, std::size_t> dim_counts;
  for (const auto& j : judgments) {
    auto it = by_id.find(j.task_id);
    if (it == by_id.end()) {
      s.rejected.push_back("unknown task '" + j.task_id + "'");
      continue;
    }
    const TaskDefinition& task = *it->second;
    if (auto problem = judgment_problem(task, j)) {
      s.rejected.push_back(j.task_id + ": " + *problem);
      continue;
    }
    const double w = static_cast<double>(task.cluster_size);
    if (task.kind == TaskKind::imposter_host) {
      ++s.imposter_count;
      ih_den += w;
      if (j.answer == task.truth) ih_num += w;
    } else {
      ++s.relatedness_count;
      rel_den += w;
      if (j.answer == "yes") {
        rel_num += w;
        if (task.prompt_dimensions) {
          ++s.prompted_yes;
          for (const auto& d : std::set<std::string>(j.dimensions.begin(), j.dimensions.end())) ++dim_counts[d];
        }
      }
    }
  }
  if (ih_den > 0) s.imposter_accuracy = ih_num / ih_den;
  if (rel_den > 0) s.relatedness_accuracy = rel_num / rel_den;
  for (auto d : kJudgedDimensions) {
    const std::string key(d);
    s.dimension_frequency[key] =
        s.prompted_yes ? static_cast<double>(dim_counts[key]) / static_cast<double>(s.prompted_yes) : 0.0;
  }
  return s;
}

/// Relatedness outcomes placed at their probe ranks, for the moving-average curve.
inline std::vector<RankedOutcome> relatedness_outcomes(const std::vector<TaskDefinition>& tasks,
                                                       const std::vector<JudgmentRecord>& judgments) {
  std::map<std::string, const TaskDefinition*> by_id;
  for (const auto& t : tasks) by_id[t.task_id] = &t;
  std::vector<RankedOutcome> out;
  for (const auto& j : judgments) {
    auto it = by_id.find(j.task_id);
    if (it == by_id.end() || it->second->kind != TaskKind::relatedness || !it->second->probe_rank) continue;
    if (judgment_problem(*it->second, j)) continue;
    out.push_back({*it->second->probe_rank, j.answer == "yes", static_cast<double>(it->second->cluster_size)});
  }
  return out;
}

// ---------------------------------------------------------------- JSON

/// Task as JSON. The public form omits the hidden truth for serving to judges.
inline nlohmann::ordered_json to_json(const TaskDefinition& t, bool include_truth = true) {
  nlohmann::ordered_json j;
  j["task_id"] = t.task_id;
  j["kind"] = std::string(to_string(t.kind));
  j["cluster_id"] = t.cluster_id;
  j["presented"] = t.presented;
  j["prompt_dimensions"] = t.prompt_dimensions;
  if (include_truth) {
    j["truth"] = t.truth;
    j["probe_rank"] = t.probe_rank ? nlohmann::ordered_json(*t.probe_rank) : nlohmann::ordered_json(nullptr);
    j["cluster_size"] = t.cluster_size;
  }
  return j;
}

inline TaskDefinition task_from_json(const nlohmann::json& j) {
  TaskDefinition t;
  t.task_id = j.at("task_id").get<std::string>();
  t.kind = parse_task_kind(j.at("kind").get<std::string>());
  t.cluster_id = j.at("cluster_id").get<std::uint32_t>();
  t.presented = j.at("presented").get<std::vector<std::string>>();
  t.truth = j.at("truth").get<std::string>();
  t.prompt_dimensions = j.value("prompt_dimensions", false);
  if (j.contains("probe_rank") && !j.at("probe_rank").is_null()) t.probe_rank = j.at("probe_rank").get<std::size_t>();
  t.cluster_size = j.at("cluster_size").get<std::size_t>();
  return t;
}

inline nlohmann::ordered_json to_json(const JudgmentRecord& r) {
  nlohmann::ordered_json j;
  j["task_id"] = r.task_id;
  j["kind"] = std::string(to_string(r.kind));
  j["cluster_id"] = r.cluster_id;
  j["presented"] = r.presented;
  j["answer"] = r.answer;
  j["dimensions"] = r.dimensions;
  j["annotator"] = r.annotator;
  j["timestamp"] = r.timestamp;
  return j;
}

inline JudgmentRecord judgment_from_json(const nlohmann::json& j) {
  JudgmentRecord r;
  r.task_id = j.at("task_id").get<std::string>();
  r.kind = parse_task_kind(j.at("kind").get<std::string>());
  r.cluster_id = j.value("cluster_id", 0u);
  r.presented = j.value("presented", std::vector<std::string>{});
  r.answer = j.at("answer").get<std::string>();
  r.dimensions = j.value("dimensions", std::vector<std::string>{});
  r.annotator = j.value("annotator", std::string{});
  r.timestamp = j.value("timestamp", std::string{});
  return r;
}

inline void write_tasks(const std::vector<TaskDefinition>& tasks, const std::filesystem::path& path) {
  auto out = io::detail::open_out(path);
  for (const auto& t : tasks) out << to_json(t).dump() << '\n';
}

template <typename T, typename Parse>
std::vector<T> read_json_lines(const std::filesystem::path& path, Parse parse) {
  auto in = io::detail::open_in(path);
  std::vector<T> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    io::detail::strip_cr(line);
    if (io::detail::blank(line)) continue;
    try {
      out.push_back(parse(io::detail::parse_json_line(line, lineno)));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("bad record: ") + e.what(), lineno);
    }
  }
  return out;
}

inline std::vector<TaskDefinition> read_tasks(const std::filesystem::path& path) {
  return read_json_lines<TaskDefinition>(path, [](const nlohmann::json& j) { return task_from_json(j); });
}

inline std::vector<JudgmentRecord> read_judgments(const std::filesystem::path& path) {
  return read_json_lines<JudgmentRecord>(path, [](const nlohmann::json& j) { return judgment_from_json(j); });
}

}  // namespace memeclust::eval
