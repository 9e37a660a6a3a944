#pragma once

// Pipeline stages. Each stage reads its inputs from files, writes its outputs to files,
// and is a pure function of those inputs and the configuration.

#include <cstdio>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "memeclust/ann/adjacency.hpp"
#include "memeclust/core/error.hpp"
#include "memeclust/core/io.hpp"
#include "memeclust/core/types.hpp"
#include "memeclust/dimensions.hpp"
#include "memeclust/eval/metrics.hpp"
#include "memeclust/eval/tasks.hpp"
#include "memeclust/extract/native.hpp"
#include "memeclust/pipeline/config.hpp"
#include "memeclust/templates/engine.hpp"
#include "memeclust/templates/io.hpp"

namespace memeclust::pipeline {

namespace fs = std::filesystem;

using Log = std::function<void(const std::string&)>;

inline Log stderr_log() {
  return [](const std::string& m) { std::fprintf(stderr, "%s\n", m.c_str()); };
}

// ------------------------------------------------------------------ layout

inline fs::path feature_path(const PipelineConfig& c, FeatureKind k) {
  return c.paths.features / (std::string(to_string(k)) + ".features");
}
inline fs::path matrix_path(const PipelineConfig& c, const std::string& name) {
  return c.paths.matrices / (name + ".matrix");
}
inline fs::path run_dir(const PipelineConfig& c, const std::string& matrix) {
  return c.paths.output / (matrix + "-" + std::string(templates::to_string(c.clustering.algorithm)));
}
inline fs::path templates_path(const PipelineConfig& c, const std::string& m) { return run_dir(c, m) / "templates.json"; }
inline fs::path ranking_path(const PipelineConfig& c, const std::string& m) { return run_dir(c, m) / "ranking.jsonl"; }
inline fs::path clustering_path(const PipelineConfig& c, const std::string& m, std::size_t n) {
  return run_dir(c, m) / ("clustering_" + std::to_string(n) + ".jsonl");
}
inline fs::path standard_path(const PipelineConfig& c, const std::string& m, std::size_t n) {
  return run_dir(c, m) / ("standard_" + std::to_string(n) + ".jsonl");
}
inline fs::path tasks_path(const PipelineConfig& c, const std::string& m) { return run_dir(c, m) / "tasks.jsonl"; }
inline fs::path judgments_path(const PipelineConfig& c, const std::string& m) { return run_dir(c, m) / "judgments.jsonl"; }
inline fs::path report_path(const PipelineConfig& c, const std::string& m) { return run_dir(c, m) / "report.json"; }

inline void require(const fs::path& p, const std::string& producer) {
  if (!fs::exists(p)) throw MissingArtifactError(p.string(), producer);
}

inline CorpusManifest load_corpus(const PipelineConfig& c) {
  if (!fs::exists(c.paths.manifest)) throw MissingArtifactError(c.paths.manifest.string(), "gen-synthetic");
  return io::load_manifest(c.paths.manifest);
}

inline bool is_dimension_name(const std::string& name) {
  for (auto d : kAllDimensions)
    if (to_string(d) == name) return true;
  return false;
}

inline SparseSimilarityMatrix load_matrix(const PipelineConfig& c, const std::string& name) {
  const auto p = matrix_path(c, name);
  require(p, is_dimension_name(name) ? "aggregate" : "build-adjacency");
  return io::read_matrix(p);
}

// ------------------------------------------------------------------ stages

/// PHASH, colour histograms and masked SURF for every manifest image.
inline extract::NativeFeatures extract_native_stage(const PipelineConfig& c, const Log& log = stderr_log()) {
  const auto manifest = load_corpus(c);
  std::optional<TextMaskSet> masks;
  if (!c.paths.masks.empty() && fs::exists(c.paths.masks)) masks = io::load_masks(c.paths.masks);
  else log("no mask file; captions located by the fallback detector");
  auto f = extract::extract_native(manifest, c.paths.manifest, masks, c.extraction);
  io::write_feature_file(f.phash, feature_path(c, FeatureKind::phash));
  io::write_feature_file(f.colorhist, feature_path(c, FeatureKind::colorhist));
  io::write_feature_file(f.surf, feature_path(c, FeatureKind::surf));
  log("extracted " + std::to_string(manifest.size()) + " images, " + std::to_string(f.surf.vector_count()) +
      " SURF descriptors");
  return f;
}

/// One matrix per feature file present (native or adapter-written). Returns the kinds built.
inline std::vector<FeatureKind> build_adjacency_stage(const PipelineConfig& c, const Log& log = stderr_log()) {
  const auto manifest = load_corpus(c);
  std::vector<FeatureKind> built;
  for (auto kind : kAllFeatureKinds) {
    const auto p = feature_path(c, kind);
    if (!fs::exists(p)) continue;
    const auto set = io::read_feature_file(p);
    if (set.kind != kind) throw FormatError("feature file '" + p.string() + "' holds kind " + std::string(to_string(set.kind)));
    const auto a = ann::build_adjacency(set, manifest, c.adjacency);
    io::write_matrix(a, matrix_path(c, std::string(to_string(kind))));
    log(std::string(to_string(kind)) + ": " + std::to_string(a.nnz()) + " stored cells");
    built.push_back(kind);
  }
  if (built.empty()) throw MissingArtifactError(feature_path(c, FeatureKind::phash).string(), "extract-native");
  return built;
}

/// Dimension matrices from whichever constituent matrices exist. Dimensions with no
/// constituent present are skipped.
inline std::vector<Dimension> aggregate_stage(const PipelineConfig& c, const Log& log = stderr_log()) {
  bool any_kind = false;
  for (auto k : kAllFeatureKinds) any_kind = any_kind || fs::exists(matrix_path(c, std::string(to_string(k))));
  if (!any_kind) throw MissingArtifactError(matrix_path(c, "phash").string(), "build-adjacency");
  std::vector<Dimension> built;
  for (const auto& [dim, spec] : c.dimensions) {
    std::vector<SparseSimilarityMatrix> parts;
    DimensionSpec present{dim, {}};
    for (auto k : spec.constituents) {
      const auto p = matrix_path(c, std::string(to_string(k)));
      if (!fs::exists(p)) continue;
      parts.push_back(io::read_matrix(p));
      present.constituents.push_back(k);
    }
    if (parts.empty()) {
      log(std::string(to_string(dim)) + ": no constituent matrix, skipped");
      continue;
    }
    if (present.constituents.size() < spec.constituents.size())
      log(std::string(to_string(dim)) + ": " + std::to_string(present.constituents.size()) + " of " +
          std::to_string(spec.constituents.size()) + " constituents present");
    io::write_matrix(aggregate(parts, spec), matrix_path(c, std::string(to_string(dim))));
    built.push_back(dim);
  }
  return built;
}

inline templates::TemplateSet identify_templates_stage(const PipelineConfig& c, const std::string& matrix,
                                                       const Log& log = stderr_log()) {
  const auto manifest = load_corpus(c);
  const auto a = load_matrix(c, matrix);
  const std::size_t target = c.template_target_for(a.n());
  auto t = templates::identify_templates(a, target, c.clustering);
  templates::write_templates(t, manifest, templates_path(c, matrix));
  log(matrix + ": " + std::to_string(t.templates.size()) + " templates, " + std::to_string(t.member_count()) +
      " members (target " + std::to_string(target) + ", theta " + std::to_string(t.theta) + ")");
  return t;
}

/// Increment actually used: never below the template member count.
inline std::size_t effective_increment(std::size_t requested, std::size_t members) {
  return std::max(requested, members);
}

/// Assignment ranking plus one clustering per configured increment.
inline std::vector<templates::IncrementResult> match_stage(const PipelineConfig& c, const std::string& matrix,
                                                           const Log& log = stderr_log()) {
  const auto manifest = load_corpus(c);
  require(templates_path(c, matrix), "identify-templates");
  const auto a = load_matrix(c, matrix);
  const auto t = templates::read_templates(templates_path(c, matrix), manifest);
  const auto ranking = templates::assign_and_rank(a, t);
  templates::write_ranking(ranking, manifest, ranking_path(c, matrix));
  std::vector<templates::IncrementResult> out;
  for (auto n : c.increments_for(a.n())) {
    const auto eff = effective_increment(n, t.member_count());
    if (eff != n) log("increment " + std::to_string(n) + " raised to the " + std::to_string(eff) + " template members");
    auto r = templates::cluster_at_increment(t, ranking, eff);
    if (r.clamped) log("increment " + std::to_string(n) + " clamped to the corpus size");
    templates::write_clustering(r.clustering, manifest, clustering_path(c, matrix, n));
    out.push_back(std::move(r));
  }
  return out;
}

inline std::vector<templates::StandardClustering> standard_baseline_stage(const PipelineConfig& c,
                                                                         const std::string& matrix,
                                                                         const Log& log = stderr_log()) {
  const auto manifest = load_corpus(c);
  const auto a = load_matrix(c, matrix);
  const auto incs = c.increments_for(a.n());
  auto out = templates::standard_cluster(a, incs, c.clustering);
  for (const auto& s : out) {
    templates::write_clustering(s.clustering, manifest, standard_path(c, matrix, s.target));
    log("standard " + std::to_string(s.target) + ": " + std::to_string(s.clustering.size()) + " images at percentile " +
        std::to_string(s.percentile));
  }
  return out;
}

// ------------------------------------------------------------------ tasks

/// Imposter-host tasks for every increment (ids prefixed with the increment) and
/// relatedness tasks drawn from the largest one.
inline std::vector<eval::TaskDefinition> make_tasks(const PipelineConfig& c, const std::string& matrix,
                                                    const CorpusManifest& manifest, const Log& log = stderr_log()) {
  require(ranking_path(c, matrix), "match");
  const auto incs = c.increments_for(manifest.size());
  std::vector<eval::TaskDefinition> tasks;
  for (std::size_t i = 0; i < incs.size(); ++i) {
    const auto cp = clustering_path(c, matrix, incs[i]);
    require(cp, "match");
    const auto clustering = templates::read_clustering(cp, manifest);
    auto batch = eval::sample_imposter_host_tasks(clustering, manifest, c.imposter_tasks, c.task_seed + i);
    for (auto& t : batch) t.task_id = "n" + std::to_string(incs[i]) + "-" + t.task_id;
    tasks.insert(tasks.end(), batch.begin(), batch.end());
  }
  const auto last = templates::read_clustering(clustering_path(c, matrix, incs.back()), manifest);
  const auto ranking = templates::read_ranking(ranking_path(c, matrix), manifest);
  auto rel = eval::sample_relatedness_tasks(last, ranking, manifest, c.relatedness_tasks, c.task_seed + incs.size(),
                                            c.max_probe_rank_for(manifest.size()));
  if (rel.resampled) log(std::to_string(rel.resampled) + " relatedness probes resampled (cluster too small)");
  for (auto& t : rel.tasks) t.task_id = "n" + std::to_string(incs.back()) + "-" + t.task_id;
  tasks.insert(tasks.end(), rel.tasks.begin(), rel.tasks.end());
  return tasks;
}

/// Increment encoded in a task id ("n<count>-..."), if any.
inline std::optional<std::size_t> task_increment(const std::string& task_id) {
  if (task_id.size() < 3 || task_id[0] != 'n') return std::nullopt;
  const auto dash = task_id.find('-');
  if (dash == std::string::npos || dash == 1) return std::nullopt;
  std::size_t n = 0;
  for (std::size_t i = 1; i < dash; ++i) {
    if (task_id[i] < '0' || task_id[i] > '9') return std::nullopt;
    n = n * 10 + static_cast<std::size_t>(task_id[i] - '0');
  }
  return n;
}

// ------------------------------------------------------------------ evaluation

struct MethodScore {
  std::size_t clustered = 0;
  std::optional<double> consistency, entropy;
  std::size_t eligible_clusters = 0;
};

inline MethodScore score_clustering(const templates::Clustering& c, const eval::Labels& labels) {
  MethodScore s;
  s.clustered = c.size();
  const auto groups = c.clusters();
  try {
    const auto con = eval::consistency(groups, labels);
    s.consistency = con.weighted;
    s.eligible_clusters = con.clusters.size();
    s.entropy = eval::cluster_entropy(groups, labels).weighted;
  } catch (const UndefinedResultError&) {
  }
  return s;
}

inline Json method_json(const MethodScore& s) {
  Json j;
  j["clustered"] = s.clustered;
  j["consistency"] = s.consistency ? Json(*s.consistency) : Json(nullptr);
  j["entropy"] = s.entropy ? Json(*s.entropy) : Json(nullptr);
  j["eligible_clusters"] = s.eligible_clusters;
  return j;
}

/// Consistency and entropy for template-based (and, when present, standard) clusterings at
/// each increment; task list; judgment scores when a judgment log exists. Writes
/// report.json, consistency.csv, tasks.jsonl and, with judgments, accuracy_curve.csv.
inline Json evaluate_stage(const PipelineConfig& c, const std::string& matrix, const Log& log = stderr_log()) {
  const auto manifest = load_corpus(c);
  const auto label_vec = manifest.labels();
  const eval::Labels labels(label_vec.begin(), label_vec.end());
  const auto incs = c.increments_for(manifest.size());

  Json report;
  report["matrix"] = matrix;
  report["algorithm"] = std::string(templates::to_string(c.clustering.algorithm));
  report["corpus"] = manifest.size();
  report["increments"] = Json::array();
  std::string csv = "method,increment,clustered,consistency,entropy,eligible_clusters\n";
  auto csv_row = [&](const char* method, std::size_t n, const MethodScore& s) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%s,%zu,%zu,%s,%s,%zu\n", method, n, s.clustered,
                  s.consistency ? std::to_string(*s.consistency).c_str() : "",
                  s.entropy ? std::to_string(*s.entropy).c_str() : "", s.eligible_clusters);
    csv += buf;
  };
  for (auto n : incs) {
    const auto cp = clustering_path(c, matrix, n);
    require(cp, "match");
    Json row;
    row["increment"] = n;
    const auto ts = score_clustering(templates::read_clustering(cp, manifest), labels);
    row["template_based"] = method_json(ts);
    csv_row("template_based", n, ts);
    const auto sp = standard_path(c, matrix, n);
    if (fs::exists(sp)) {
      const auto ss = score_clustering(templates::read_clustering(sp, manifest), labels);
      row["standard"] = method_json(ss);
      csv_row("standard", n, ss);
    }
    report["increments"].push_back(row);
  }

  const auto tasks = make_tasks(c, matrix, manifest, log);
  eval::write_tasks(tasks, tasks_path(c, matrix));
  report["tasks"] = tasks.size();

  const auto jp = judgments_path(c, matrix);
  if (fs::exists(jp)) {
    const auto judgments = eval::read_judgments(jp);
    const auto scores = eval::score_judgments(tasks, judgments);
    Json js;
    js["judgments"] = judgments.size();
    js["imposter_accuracy"] = scores.imposter_accuracy ? Json(*scores.imposter_accuracy) : Json(nullptr);
    js["relatedness_accuracy"] = scores.relatedness_accuracy ? Json(*scores.relatedness_accuracy) : Json(nullptr);
    js["dimension_frequency"] = scores.dimension_frequency;
    js["rejected"] = scores.rejected;
    // Imposter accuracy per increment.
    Json per = Json::object();
    for (auto n : incs) {
      std::vector<eval::TaskDefinition> sub;
      for (const auto& t : tasks)
        if (t.kind == eval::TaskKind::imposter_host && task_increment(t.task_id) == n) sub.push_back(t);
      const auto s = eval::score_judgments(sub, judgments);
      per[std::to_string(n)] = s.imposter_accuracy ? Json(*s.imposter_accuracy) : Json(nullptr);
    }
    js["imposter_accuracy_by_increment"] = per;
    report["judgments"] = js;
    for (const auto& r : scores.rejected) log("rejected judgment: " + r);

    const auto curve = eval::moving_average_accuracy(eval::relatedness_outcomes(tasks, judgments),
                                                     c.window_for(manifest.size()));
    auto out = io::detail::open_out(run_dir(c, matrix) / "accuracy_curve.csv");
    out << "rank,accuracy\n";
    for (const auto& p : curve) out << p.rank << ',' << p.accuracy << '\n';
  }

  auto out = io::detail::open_out(report_path(c, matrix));
  out << report.dump(1) << '\n';
  io::detail::open_out(run_dir(c, matrix) / "consistency.csv") << csv;
  return report;
}

/// extract-native through evaluate for the configured matrix.
inline Json run_all(const PipelineConfig& c, const Log& log = stderr_log()) {
  extract_native_stage(c, log);
  build_adjacency_stage(c, log);
  aggregate_stage(c, log);
  identify_templates_stage(c, c.matrix, log);
  match_stage(c, c.matrix, log);
  standard_baseline_stage(c, c.matrix, log);
  return evaluate_stage(c, c.matrix, log);
}

}  // namespace memeclust::pipeline
