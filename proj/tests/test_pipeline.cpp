#include <algorithm>

#include <gtest/gtest.h>

#include "helpers.hpp"
#include "memeclust/extract/phash.hpp"
#include "memeclust/pipeline/pipeline.hpp"
#include "memeclust/pipeline/synthetic.hpp"

using namespace memeclust;
using namespace memeclust::pipeline;
namespace fs = std::filesystem;

namespace {

Json small_config_json(const fs::path& root) {
  Json j = default_config_json();
  j["paths"]["manifest"] = (root / "corpus/manifest.jsonl").string();
  j["paths"]["masks"] = (root / "corpus/masks.jsonl").string();
  j["paths"]["features"] = (root / "work/features").string();
  j["paths"]["matrices"] = (root / "work/matrices").string();
  j["paths"]["output"] = (root / "work/output").string();
  j["extraction"]["surf"]["max_keypoints"] = 64;
  j["extraction"]["surf"]["hessian_threshold"] = 0.0001;
  j["targets"]["template"] = 30;
  j["targets"]["increments"] = {30, 45, 60};
  j["targets"]["scale_to_corpus"] = false;
  j["evaluation"]["imposter_tasks"] = 20;
  j["evaluation"]["relatedness_tasks"] = 20;
  return j;
}

SyntheticSpec small_spec() {
  SyntheticSpec s;
  s.n_templates = 6;
  s.variants_per_template = 12;
  s.image_size = 96;
  return s;
}

Log quiet() {
  return [](const std::string&) {};
}

PipelineConfig prepared(const fs::path& root) {
  write_synthetic(small_spec(), root / "corpus");
  return config_from_json(small_config_json(root));
}

}  // namespace

TEST(Config, DefaultsParse) {
  auto c = config_from_json(default_config_json());
  EXPECT_EQ(c.adjacency.k, 100u);
  EXPECT_EQ(c.adjacency.sparsity_epsilon, 0.001);
  EXPECT_EQ(c.extraction.surf.max_keypoints, 1000u);
  EXPECT_EQ(c.increments, (std::vector<std::size_t>{5000, 8500, 11000}));
  EXPECT_EQ(c.window, 1500u);
  EXPECT_EQ(c.clustering.algorithm, templates::Algorithm::louvain);
  EXPECT_TRUE(std::isinf(c.clustering.dbscan.eps));
}

TEST(Config, ScalesToCorpus) {
  auto c = config_from_json(default_config_json());
  EXPECT_EQ(c.increments_for(2000), (std::vector<std::size_t>{500, 850, 1100}));
  EXPECT_EQ(c.template_target_for(2000), 500u);
  EXPECT_EQ(c.window_for(2000), 150u);
  c.scale_to_corpus = false;
  EXPECT_EQ(c.template_target_for(2000), 5000u);
}

TEST(Config, DottedOverride) {
  Json j = default_config_json();
  set_dotted(j, "adjacency.k", "7");
  set_dotted(j, "clustering.algorithm", "dbscan");
  set_dotted(j, "targets.increments", "[1, 2, 3]");
  auto c = config_from_json(j);
  EXPECT_EQ(c.adjacency.k, 7u);
  EXPECT_EQ(c.clustering.algorithm, templates::Algorithm::dbscan);
  EXPECT_EQ(c.increments, (std::vector<std::size_t>{1, 2, 3}));
  auto keys = leaf_keys(default_config_json());
  EXPECT_NE(std::find(keys.begin(), keys.end(), "extraction.surf.max_keypoints"), keys.end());
}

TEST(Config, InvalidRejected) {
  Json j = default_config_json();
  j["targets"]["increments"] = {3, 2};
  EXPECT_THROW(config_from_json(j), ContractViolation);
  j = default_config_json();
  j["adjacency"]["symmetrization"] = "min";
  EXPECT_THROW(config_from_json(j), FormatError);
  j = default_config_json();
  j["adjacency"].erase("k");
  EXPECT_THROW(config_from_json(j), FormatError);
}

TEST(Config, FileMergesOverDefaults) {
  testutil::TempDir dir("cfgfile");
  testutil::spit(dir / "c.json", R"({"adjacency": {"k": 12}, "server": {"port": 9000}})");
  auto c = config_from_json(load_config_json(dir / "c.json"));
  EXPECT_EQ(c.adjacency.k, 12u);
  EXPECT_EQ(c.port, 9000);
  EXPECT_EQ(c.adjacency.sparsity_epsilon, 0.001);
}

TEST(Stages, MatchBeforeIdentifyNamesProducer) {
  testutil::TempDir dir("order");
  auto c = config_from_json(small_config_json(dir.path()));
  io::write_manifest(testutil::manifest_of(4, {}), c.paths.manifest);
  io::write_matrix(testutil::sym_matrix(4, {{0, 1, 1.f}}), matrix_path(c, "combined"));
  try {
    match_stage(c, "combined", quiet());
    FAIL() << "match ran without templates";
  } catch (const MissingArtifactError& e) {
    EXPECT_EQ(e.producer(), "identify-templates");
  }
}

TEST(Stages, MissingUpstreamArtifacts) {
  testutil::TempDir dir("missing");
  auto c = config_from_json(small_config_json(dir.path()));
  try {
    extract_native_stage(c, quiet());
    FAIL();
  } catch (const MissingArtifactError& e) {
    EXPECT_EQ(e.producer(), "gen-synthetic");
  }
  io::write_manifest(testutil::manifest_of(4, {}), c.paths.manifest);
  try {
    identify_templates_stage(c, "combined", quiet());
    FAIL();
  } catch (const MissingArtifactError& e) {
    EXPECT_EQ(e.producer(), "aggregate");
  }
  try {
    evaluate_stage(c, "combined", quiet());
    FAIL();
  } catch (const MissingArtifactError& e) {
    EXPECT_EQ(e.producer(), "match");
  }
}

TEST(Stages, EndToEndReportMatchesModules) {
  testutil::TempDir dir("e2e");
  auto c = prepared(dir.path());
  auto report = run_all(c, quiet());

  const auto manifest = load_corpus(c);
  const auto lv = manifest.labels();
  const eval::Labels labels(lv.begin(), lv.end());
  ASSERT_EQ(report["increments"].size(), 3u);
  for (const auto& row : report["increments"]) {
    const auto n = row["increment"].get<std::size_t>();
    const auto tc = templates::read_clustering(clustering_path(c, "combined", n), manifest);
    EXPECT_EQ(tc.size(), n);
    EXPECT_EQ(row["template_based"]["consistency"].get<double>(), eval::consistency(tc.clusters(), labels).weighted);
    EXPECT_EQ(row["template_based"]["entropy"].get<double>(), eval::cluster_entropy(tc.clusters(), labels).weighted);
    const auto sc = templates::read_clustering(standard_path(c, "combined", n), manifest);
    EXPECT_EQ(row["standard"]["consistency"].get<double>(), eval::consistency(sc.clusters(), labels).weighted);
  }
  const auto tasks = eval::read_tasks(tasks_path(c, "combined"));
  EXPECT_EQ(tasks.size(), 3u * 20u + 20u);
  EXPECT_EQ(report["tasks"].get<std::size_t>(), tasks.size());
  EXPECT_TRUE(fs::exists(run_dir(c, "combined") / "consistency.csv"));
  // combined draws on the three native kinds present
  for (auto k : {FeatureKind::phash, FeatureKind::colorhist, FeatureKind::surf})
    EXPECT_TRUE(fs::exists(matrix_path(c, std::string(to_string(k)))));
  EXPECT_FALSE(fs::exists(matrix_path(c, "visual")));
}

TEST(Stages, JudgmentLogFeedsReport) {
  testutil::TempDir dir("judged");
  auto c = prepared(dir.path());
  run_all(c, quiet());
  auto tasks = eval::read_tasks(tasks_path(c, "combined"));
  std::string log;
  std::size_t right = 0, total = 0;
  for (const auto& t : tasks) {
    eval::JudgmentRecord j;
    j.task_id = t.task_id;
    j.kind = t.kind;
    if (t.kind == eval::TaskKind::imposter_host) {
      j.answer = total % 3 ? t.truth : t.presented[t.presented[0] == t.truth ? 1 : 0];
      right += total % 3 ? t.cluster_size : 0;
      ++total;
    } else {
      j.answer = "yes";
    }
    log += eval::to_json(j).dump() + "\n";
  }
  testutil::spit(judgments_path(c, "combined"), log);
  auto report = evaluate_stage(c, "combined", quiet());
  const auto direct = eval::score_judgments(tasks, eval::read_judgments(judgments_path(c, "combined")));
  EXPECT_EQ(report["judgments"]["imposter_accuracy"].get<double>(), *direct.imposter_accuracy);
  EXPECT_EQ(report["judgments"]["relatedness_accuracy"].get<double>(), 1.0);
  EXPECT_TRUE(fs::exists(run_dir(c, "combined") / "accuracy_curve.csv"));
}

TEST(Stages, RerunIsByteIdentical) {
  testutil::TempDir a("rerun_a"), b("rerun_b");
  auto ca = prepared(a.path());
  auto cb = prepared(b.path());
  run_all(ca, quiet());
  run_all(cb, quiet());
  std::vector<std::pair<fs::path, fs::path>> pairs = {
      {matrix_path(ca, "combined"), matrix_path(cb, "combined")},
      {matrix_path(ca, "surf"), matrix_path(cb, "surf")},
      {templates_path(ca, "combined"), templates_path(cb, "combined")},
      {tasks_path(ca, "combined"), tasks_path(cb, "combined")},
  };
  for (auto n : ca.increments)
    pairs.emplace_back(clustering_path(ca, "combined", n), clustering_path(cb, "combined", n));
  for (const auto& [x, y] : pairs) EXPECT_EQ(testutil::slurp(x), testutil::slurp(y)) << x;
}

TEST(Stages, EffectiveIncrementNeverBelowMembers) {
  EXPECT_EQ(effective_increment(500, 510), 510u);
  EXPECT_EQ(effective_increment(850, 510), 850u);
}

TEST(Stages, TaskIncrementFromId) {
  EXPECT_EQ(task_increment("n850-ih-000003"), std::optional<std::size_t>(850));
  EXPECT_FALSE(task_increment("ih-000003").has_value());
}

TEST(Synthetic, FullSizeCorpusShape) {
  SyntheticSpec spec;
  std::size_t emitted = 0;
  auto corpus = generate_synthetic(spec, [&](const ImageRecord&, const cv::Mat& m) {
    ++emitted;
    EXPECT_EQ(m.rows, spec.image_size);
  });
  EXPECT_EQ(corpus.manifest.size(), 2000u);
  EXPECT_EQ(emitted, 2000u);
  std::set<std::string> labels;
  for (const auto& r : corpus.manifest.images()) labels.insert(*r.label);
  EXPECT_EQ(labels.size(), 40u);
}

TEST(Synthetic, InvalidSpecRejected) {
  SyntheticSpec s;
  s.mix.caption = 0.9;
  EXPECT_THROW(generate_synthetic(s, [](const ImageRecord&, const cv::Mat&) {}), ContractViolation);
  s = SyntheticSpec{};
  s.n_templates = 0;
  EXPECT_THROW(generate_synthetic(s, [](const ImageRecord&, const cv::Mat&) {}), ContractViolation);
}

TEST(Synthetic, ByteIdenticalForSeed) {
  auto render = [](std::uint64_t seed) {
    auto spec = small_spec();
    spec.seed = seed;
    std::vector<std::vector<unsigned char>> out;
    generate_synthetic(spec, [&](const ImageRecord&, const cv::Mat& m) {
      out.emplace_back(m.data, m.data + m.total() * m.elemSize());
    });
    return out;
  };
  EXPECT_EQ(render(3), render(3));
  EXPECT_NE(render(3), render(4));
}

TEST(Synthetic, CaptionOnlyVariantsStayCloseInPhash) {
  auto spec = small_spec();
  spec.n_templates = 10;
  spec.variants_per_template = 8;
  spec.image_size = 160;
  spec.mix = {1.0, 0.0, 0.0, 0.0, 0.0};
  std::vector<extract::PerceptualHash> bases;
  for (std::size_t t = 0; t < spec.n_templates; ++t)
    bases.push_back(extract::compute_phash(synthetic_template_image(spec, t)));
  std::vector<int> within;
  generate_synthetic(spec, [&](const ImageRecord& r, const cv::Mat& m) {
    const auto t = static_cast<std::size_t>(std::stoi(r.id.substr(1, 3)));
    within.push_back(extract::hamming_distance(extract::compute_phash(from_mat(m)), bases[t]));
  });
  std::vector<int> cross;
  for (std::size_t a = 0; a < bases.size(); ++a)
    for (std::size_t b = a + 1; b < bases.size(); ++b) cross.push_back(extract::hamming_distance(bases[a], bases[b]));
  auto median = [](std::vector<int> v) {
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2), v.end());
    return v[v.size() / 2];
  };
  EXPECT_LT(median(within), median(cross));
}

TEST(Synthetic, LabelPartitionIsFullyConsistent) {
  auto spec = small_spec();
  auto corpus = generate_synthetic(spec, [](const ImageRecord&, const cv::Mat&) {});
  std::map<std::string, std::vector<ImageIndex>> by_label;
  for (ImageIndex i = 0; i < corpus.manifest.size(); ++i) by_label[*corpus.manifest[i].label].push_back(i);
  std::vector<std::vector<ImageIndex>> groups;
  for (auto& [l, g] : by_label) groups.push_back(g);
  const auto lv = corpus.manifest.labels();
  EXPECT_EQ(eval::consistency(groups, eval::Labels(lv.begin(), lv.end())).weighted, 1.0);
}

TEST(Synthetic, WritesCorpusFiles) {
  testutil::TempDir dir("synth");
  auto spec = small_spec();
  spec.n_templates = 2;
  spec.variants_per_template = 3;
  auto corpus = write_synthetic(spec, dir.path());
  auto m = io::load_manifest(dir / "manifest.jsonl");
  EXPECT_EQ(m.size(), 6u);
  for (const auto& r : m.images()) EXPECT_TRUE(fs::exists(io::resolve_image_path(dir / "manifest.jsonl", r)));
  EXPECT_EQ(io::load_masks(dir / "masks.jsonl"), corpus.masks);
  EXPECT_EQ(io::load_ocr(dir / "ocr.jsonl").size(), 6u);
}
