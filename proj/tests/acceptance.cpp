// Acceptance run: one PASS/FAIL line per criterion. Exit status is non-zero when any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>
#include <set>

#include <CLI11.hpp>

#include "memeclust/ann/adjacency.hpp"
#include "memeclust/ann/knn.hpp"
#include "memeclust/cluster/louvain.hpp"
#include "memeclust/eval/metrics.hpp"
#include "memeclust/eval/tasks.hpp"
#include "memeclust/pipeline/pipeline.hpp"
#include "memeclust/pipeline/synthetic.hpp"

using namespace memeclust;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void verdict(const std::string& name, bool pass, const std::string& detail) {
  std::printf("%s  %-28s %s\n", pass ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char* f, auto... xs) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, xs...);
  return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

SparseSimilarityMatrix sym(std::size_t n, const std::vector<std::tuple<int, int, float>>& edges) {
  std::vector<Triplet> t;
  for (auto [i, j, w] : edges) {
    t.push_back({static_cast<ImageIndex>(i), static_cast<ImageIndex>(j), w});
    t.push_back({static_cast<ImageIndex>(j), static_cast<ImageIndex>(i), w});
  }
  return SparseSimilarityMatrix(n, "combined", std::move(t));
}

// ---------------------------------------------------------------- similarity

void check_similarity() {
  bool ok = ann::distance_to_similarity(0.0) == 1.0;
  double prev = 2.0;
  for (int i = 0; i < 1000; ++i) {
    const double s = ann::distance_to_similarity(2.0 * i / 999.0);
    ok = ok && s < prev;
    prev = s;
  }
  const double at_ln3 = ann::distance_to_similarity(std::log(3.0));
  ok = ok && std::abs(at_ln3 - 0.2) <= 1e-9;
  verdict("similarity-transform", ok, fmt("s(0)=%.17g s(ln3)=%.12f, 1000-point grid strictly decreasing",
                                          ann::distance_to_similarity(0.0), at_ln3));
}

// ---------------------------------------------------------------- adjacency

std::map<std::pair<ImageIndex, ImageIndex>, double> brute_cells(const FeatureSet& set, const CorpusManifest& m) {
  std::map<std::pair<ImageIndex, ImageIndex>, double> cells;
  for (const auto& ei : set.entries)
    for (const auto& ej : set.entries) {
      if (ei.image_id == ej.image_id || ei.vectors.empty() || ej.vectors.empty()) continue;
      double acc = 0.0;
      for (const auto& a : ei.vectors)
        for (const auto& b : ej.vectors) {
          double na = 0, nb = 0, dot = 0;
          for (std::size_t k = 0; k < a.size(); ++k) {
            na += double(a[k]) * a[k];
            nb += double(b[k]) * b[k];
            dot += double(a[k]) * b[k];
          }
          const double cos = dot / std::sqrt(na * nb);
          acc += 1.0 - std::tanh(std::sqrt(std::max(0.0, 2.0 - 2.0 * cos)));
        }
      cells[{m.index_of(ei.image_id), m.index_of(ej.image_id)}] = acc;
    }
  return cells;
}

bool same_as_brute(const SparseSimilarityMatrix& a, const std::map<std::pair<ImageIndex, ImageIndex>, double>& cells,
                   double eps, double& worst) {
  std::size_t expected = 0;
  bool ok = true;
  for (const auto& [key, v] : cells) {
    const float got = a.at(key.first, key.second);
    if (v >= eps) {
      ++expected;
      const double err = std::abs(double(got) - v) / std::max(1.0, v);
      worst = std::max(worst, err);
      ok = ok && err <= 1e-6;
    } else {
      ok = ok && got == 0.0f;
    }
  }
  return ok && a.nnz() == expected;
}

void check_adjacency() {
  std::mt19937 rng(2024);
  std::normal_distribution<float> g;
  ann::AdjacencyConfig cfg;
  cfg.k = 1000;
  bool ok = true;
  double worst = 0.0;
  const auto t0 = Clock::now();
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<ImageRecord> recs;
    for (int i = 0; i < 20; ++i) recs.push_back({"g" + std::to_string(i), "x.png", std::nullopt, ""});
    CorpusManifest m(recs);
    FeatureSet global{FeatureKind::colorhist, FeatureScope::global, 12, {}};
    for (int i = 0; i < 20; ++i) {
      FeatureVector v(12);
      for (auto& x : v) x = std::abs(g(rng));
      global.entries.push_back({recs[i].id, {v}});
    }
    ok = ok && same_as_brute(ann::build_adjacency(global, m, cfg), brute_cells(global, m), cfg.sparsity_epsilon, worst);

    const int images = 4 + trial % 3;
    std::vector<ImageRecord> lrecs(recs.begin(), recs.begin() + images);
    CorpusManifest lm(lrecs);
    FeatureSet local{FeatureKind::surf, FeatureScope::local, 16, {}};
    for (int i = 0; i < images; ++i) {
      FeatureEntry e{lrecs[i].id, {}};
      const int kps = static_cast<int>(rng() % 4);
      for (int p = 0; p < kps; ++p) {
        FeatureVector v(16);
        for (auto& x : v) x = g(rng);
        e.vectors.push_back(v);
      }
      local.entries.push_back(e);
    }
    ok = ok && same_as_brute(ann::build_adjacency(local, lm, cfg), brute_cells(local, lm), cfg.sparsity_epsilon, worst);
  }
  const double secs = seconds_since(t0);
  verdict("adjacency-oracle", ok && secs < 1.0,
          fmt("10 trials x (20 global, <=3 kp x 4-6 local); max rel err %.2e (tol 1e-6); %.3f s", worst, secs));
}

// ---------------------------------------------------------------- louvain

double modularity_oracle(const SparseSimilarityMatrix& a, const cluster::Partition& p) {
  std::vector<double> k(a.n(), 0.0);
  double two_m = 0.0;
  for (const auto& t : a.triplets()) {
    k[t.i] += t.value;
    two_m += t.value;
  }
  double q = 0.0;
  for (std::size_t i = 0; i < a.n(); ++i)
    for (std::size_t j = 0; j < a.n(); ++j)
      if (p[i] == p[j]) q += a.at(static_cast<ImageIndex>(i), static_cast<ImageIndex>(j)) - k[i] * k[j] / two_m;
  return q / two_m;
}

void check_louvain() {
  std::mt19937 rng(77);
  std::uniform_real_distribution<double> u(0, 1);
  bool monotone = true;
  for (int t = 0; t < 100; ++t) {
    const int n = 30 + static_cast<int>(rng() % 70);
    std::vector<std::tuple<int, int, float>> e;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if (u(rng) < 4.0 / n) e.emplace_back(i, j, static_cast<float>(0.05 + u(rng)));
    const auto r = cluster::louvain(sym(static_cast<std::size_t>(n), e), static_cast<std::uint64_t>(t));
    for (std::size_t l = 1; l < r.level_modularity.size(); ++l)
      monotone = monotone && r.level_modularity[l] >= r.level_modularity[l - 1];
  }

  const auto tri = cluster::louvain(sym(6, {{0, 1, 1}, {1, 2, 1}, {0, 2, 1}, {3, 4, 1}, {4, 5, 1}, {3, 5, 1}}), 1);
  const std::set<std::uint32_t> tri_comms(tri.partition.begin(), tri.partition.end());
  const bool tri_ok = tri_comms.size() == 2 && tri.partition[0] == tri.partition[2] &&
                      tri.partition[3] == tri.partition[5] && std::abs(tri.modularity - 0.5) <= 1e-9;

  std::vector<std::tuple<int, int, float>> e;
  for (int base : {0, 5})
    for (int i = 0; i < 5; ++i)
      for (int j = i + 1; j < 5; ++j) e.emplace_back(base + i, base + j, 1.0f);
  e.emplace_back(4, 5, 1.0f);
  const auto cliques = sym(10, e);
  double best = -1;
  cluster::Partition arg;
  for (unsigned mask = 0; mask < 512; ++mask) {
    cluster::Partition p(10, 0);
    for (int b = 0; b < 9; ++b) p[b + 1] = (mask >> b) & 1u;
    const double q = modularity_oracle(cliques, p);
    if (q > best + 1e-12) {
      best = q;
      arg = p;
    }
  }
  const auto cr = cluster::louvain(cliques, 1);
  const bool clique_ok = cr.partition == arg;
  verdict("louvain", monotone && tri_ok && clique_ok,
          fmt("100 graphs monotone=%s; triangles Q=%.12f; cliques+bridge matches 2-partition argmax (Q=%.6f)=%s",
              monotone ? "yes" : "no", tri.modularity, best, clique_ok ? "yes" : "no"));
}

// ---------------------------------------------------------------- metrics

void check_metrics() {
  using L = std::optional<std::string>;
  const double c1 = eval::consistency({{0, 1, 2, 3}}, {L("A"), L("A"), L("A"), L("B")}).weighted;
  const double c2 =
      eval::consistency({{0, 1, 2, 3}, {4, 5, 6, 7}}, {L("A"), L("A"), L("A"), L("A"), L("A"), L("A"), L("B"), L("B")})
          .weighted;
  const double h1 = eval::cluster_entropy({{0, 1, 2, 3}}, {L("A"), L("A"), L("B"), L("B")}).weighted;
  const double h2 = eval::cluster_entropy({{0, 1, 2, 3}}, {L("A"), L("B"), L("C"), L("D")}).weighted;
  verdict("metric-exactness", c1 == 0.75 && c2 == 0.75 && h1 == 1.0 && h2 == 2.0,
          fmt("consistency %.17g / weighted %.17g; entropy %.17g / %.17g bits", c1, c2, h1, h2));
}

// ---------------------------------------------------------------- synthetic run

struct Run {
  pipeline::PipelineConfig config;
  pipeline::Json report;
  double seconds = 0.0;
};

pipeline::Json run_config_json(const fs::path& root) {
  auto j = pipeline::default_config_json();
  j["paths"]["manifest"] = (root / "corpus/manifest.jsonl").string();
  j["paths"]["masks"] = (root / "corpus/masks.jsonl").string();
  j["paths"]["features"] = (root / "features").string();
  j["paths"]["matrices"] = (root / "matrices").string();
  j["paths"]["output"] = (root / "output").string();
  // 160 px synthetic images: a lower detector threshold and a 64-keypoint budget.
  j["extraction"]["surf"]["hessian_threshold"] = 0.0001;
  j["extraction"]["surf"]["max_keypoints"] = 64;
  return j;
}

Run full_run(const fs::path& root) {
  fs::remove_all(root);
  Run r;
  const auto t0 = Clock::now();
  pipeline::write_synthetic(pipeline::SyntheticSpec{}, root / "corpus");
  r.config = pipeline::config_from_json(run_config_json(root));
  r.report = pipeline::run_all(r.config, [](const std::string&) {});
  r.seconds = seconds_since(t0);
  return r;
}

std::optional<double> template_consistency(const pipeline::Json& report, std::size_t n, const char* method) {
  for (const auto& row : report["increments"])
    if (row["increment"].get<std::size_t>() == n && row.contains(method) && !row[method]["consistency"].is_null())
      return row[method]["consistency"].get<double>();
  return std::nullopt;
}

std::string opt(std::optional<double> v) { return v ? fmt("%.4f", *v) : std::string("n/a"); }

void check_trend(const Run& run, const CorpusManifest& manifest) {
  const auto& c = run.config;
  const auto incs = c.increments_for(manifest.size());
  const std::size_t lo = incs.front(), mid = incs[1], hi = incs.back();
  const auto t_lo = template_consistency(run.report, lo, "template_based");
  const auto t_mid = template_consistency(run.report, mid, "template_based");
  const auto t_hi = template_consistency(run.report, hi, "template_based");
  const auto s_lo = template_consistency(run.report, lo, "standard");
  const auto s_mid = template_consistency(run.report, mid, "standard");
  const auto s_hi = template_consistency(run.report, hi, "standard");
  const bool all = t_lo && t_mid && t_hi && s_lo && s_mid && s_hi;

  const bool a = all && *t_mid >= *s_mid && *t_hi >= *s_hi;
  const bool b = all && std::abs(*t_lo - *t_hi) <= 0.15 && (*s_lo - *s_hi) > 0.15;

  const auto lv = manifest.labels();
  const eval::Labels labels(lv.begin(), lv.end());
  bool cc = t_hi.has_value();
  std::string singles;
  for (auto kind : {FeatureKind::phash, FeatureKind::colorhist, FeatureKind::surf}) {
    const std::string name(to_string(kind));
    pipeline::identify_templates_stage(c, name, [](const std::string&) {});
    pipeline::match_stage(c, name, [](const std::string&) {});
    const auto s =
        pipeline::score_clustering(templates::read_clustering(pipeline::clustering_path(c, name, hi), manifest), labels);
    cc = cc && s.consistency && *t_hi >= *s.consistency - 0.02;
    singles += " " + name + "=" + opt(s.consistency);
  }
  const bool fast = run.seconds < 600.0;

  std::printf("      template-based %zu/%zu/%zu: %s %s %s\n", lo, mid, hi, opt(t_lo).c_str(), opt(t_mid).c_str(),
              opt(t_hi).c_str());
  std::printf("      standard       %zu/%zu/%zu: %s %s %s\n", lo, mid, hi, opt(s_lo).c_str(), opt(s_mid).c_str(),
              opt(s_hi).c_str());
  verdict("trend", a && b && cc && fast,
          fmt("(a)=%s (b)=%s [template drop %s, standard drop %s] (c)=%s [combined %s;%s] runtime %.0f s=%s",
              a ? "ok" : "no", b ? "ok" : "no", all ? fmt("%.4f", *t_lo - *t_hi).c_str() : "n/a",
              all ? fmt("%.4f", *s_lo - *s_hi).c_str() : "n/a", cc ? "ok" : "no", opt(t_hi).c_str(), singles.c_str(),
              run.seconds, fast ? "ok" : "no"));
}

void check_duality(const Run& run, const CorpusManifest& manifest) {
  const auto& c = run.config;
  const auto lv = manifest.labels();
  const eval::Labels labels(lv.begin(), lv.end());
  std::size_t clusters = 0, violations = 0;
  std::vector<fs::path> files;
  for (auto n : c.increments_for(manifest.size())) {
    files.push_back(pipeline::clustering_path(c, c.matrix, n));
    files.push_back(pipeline::standard_path(c, c.matrix, n));
  }
  for (const auto& f : files) {
    const auto groups = templates::read_clustering(f, manifest).clusters();
    const auto con = eval::consistency(groups, labels);
    const auto ent = eval::cluster_entropy(groups, labels);
    for (std::size_t i = 0; i < con.clusters.size(); ++i) {
      ++clusters;
      if ((con.clusters[i].score == 1.0) != (ent.clusters[i].score == 0.0)) ++violations;
    }
  }
  const auto hi = c.increments_for(manifest.size()).back();
  std::string ent_hi;
  for (const auto& row : run.report["increments"])
    if (row["increment"].get<std::size_t>() == hi)
      ent_hi = fmt("entropy at %zu: template-based %.4f, standard %.4f", hi,
                   row["template_based"]["entropy"].get<double>(), row["standard"]["entropy"].get<double>());
  verdict("entropy-duality", clusters > 0 && violations == 0,
          fmt("%zu clusters, %zu violations; %s", clusters, violations, ent_hi.c_str()));
}

void check_dbscan(const Run& run, const CorpusManifest& manifest) {
  auto c = run.config;
  c.clustering.algorithm = templates::Algorithm::dbscan;
  auto quiet = [](const std::string&) {};
  pipeline::identify_templates_stage(c, c.matrix, quiet);
  pipeline::match_stage(c, c.matrix, quiet);
  pipeline::standard_baseline_stage(c, c.matrix, quiet);
  const auto lv = manifest.labels();
  const eval::Labels labels(lv.begin(), lv.end());
  const auto incs = c.increments_for(manifest.size());
  bool ok = true;
  std::string detail;
  for (std::size_t n : {incs[1], incs.back()}) {
    const auto t = pipeline::score_clustering(
        templates::read_clustering(pipeline::clustering_path(c, c.matrix, n), manifest), labels);
    const auto s =
        pipeline::score_clustering(templates::read_clustering(pipeline::standard_path(c, c.matrix, n), manifest), labels);
    ok = ok && t.consistency && s.consistency && *t.consistency >= *s.consistency;
    detail += fmt("%zu: template %s vs standard %s; ", n, opt(t.consistency).c_str(), opt(s.consistency).c_str());
  }
  verdict("dbscan-trend-a", ok, detail);
}

void check_determinism(const Run& a, const Run& b, const CorpusManifest& manifest) {
  std::vector<std::pair<fs::path, fs::path>> pairs = {{a.config.paths.manifest, b.config.paths.manifest}};
  for (const auto& entry : fs::directory_iterator(a.config.paths.matrices))
    pairs.emplace_back(entry.path(), b.config.paths.matrices / entry.path().filename());
  const auto m = a.config.matrix;
  for (auto n : a.config.increments_for(manifest.size())) {
    pairs.emplace_back(pipeline::clustering_path(a.config, m, n), pipeline::clustering_path(b.config, m, n));
    pairs.emplace_back(pipeline::standard_path(a.config, m, n), pipeline::standard_path(b.config, m, n));
  }
  pairs.emplace_back(pipeline::templates_path(a.config, m), pipeline::templates_path(b.config, m));
  pairs.emplace_back(pipeline::ranking_path(a.config, m), pipeline::ranking_path(b.config, m));
  pairs.emplace_back(pipeline::tasks_path(a.config, m), pipeline::tasks_path(b.config, m));
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) return std::string("\x01missing");
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  };
  std::size_t differ = 0;
  std::string first;
  for (const auto& [x, y] : pairs)
    if (slurp(x) != slurp(y)) {
      if (!differ) first = x.filename().string();
      ++differ;
    }
  verdict("determinism", differ == 0,
          fmt("%zu files compared byte for byte, %zu differ%s%s", pairs.size(), differ, differ ? "; first " : "",
              first.c_str()));
}

void check_samplers(const Run& run, const CorpusManifest& manifest) {
  const auto& c = run.config;
  const auto hi = c.increments_for(manifest.size()).back();
  const auto clustering = templates::read_clustering(pipeline::clustering_path(c, c.matrix, hi), manifest);
  const auto ranking = templates::read_ranking(pipeline::ranking_path(c, c.matrix), manifest);
  std::map<std::string, std::uint32_t> cluster_of;
  for (const auto& ci : clustering.images) cluster_of[manifest[ci.image].id] = ci.cluster;

  const auto ih = eval::sample_imposter_host_tasks(clustering, manifest, 1000, 11);
  std::size_t bad = 0;
  for (const auto& t : ih) {
    std::set<std::string> ids(t.presented.begin(), t.presented.end());
    std::size_t host = 0;
    for (const auto& id : t.presented) host += cluster_of.at(id) == t.cluster_id;
    const bool ok = t.presented.size() == 5 && ids.size() == 5 && host == 4 && ids.count(t.truth) &&
                    cluster_of.at(t.truth) != t.cluster_id;
    bad += !ok;
  }
  const auto rel = eval::sample_relatedness_tasks(clustering, ranking, manifest, 10000, 12, c.max_probe_rank_for(manifest.size()));
  std::size_t prompted = 0;
  for (const auto& t : rel.tasks) prompted += t.prompt_dimensions;
  const double frac = static_cast<double>(prompted) / static_cast<double>(rel.tasks.size());
  verdict("samplers", ih.size() == 1000 && bad == 0 && rel.tasks.size() == 10000 && frac >= 0.47 && frac <= 0.53,
          fmt("imposter-host 1000 tasks, %zu malformed; relatedness prompt fraction %.4f over %zu", bad, frac,
              rel.tasks.size()));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app("acceptance checks");
  std::string work = "acceptance_work";
  app.add_option("--work", work, "scratch directory for the synthetic runs");
  CLI11_PARSE(app, argc, argv);

  check_similarity();
  check_adjacency();
  check_louvain();
  check_metrics();

  try {
    const fs::path root(work);
    const Run a = full_run(root / "run_a");
    const auto manifest = io::load_manifest(a.config.paths.manifest);
    check_trend(a, manifest);
    check_duality(a, manifest);
    check_dbscan(a, manifest);
    const Run b = full_run(root / "run_b");
    check_determinism(a, b, manifest);
    check_samplers(a, manifest);
  } catch (const std::exception& e) {
    verdict("synthetic-run", false, std::string("aborted: ") + e.what());
  }
  std::printf("%d failing\n", failures);
  return failures ? 1 : 0;
}
