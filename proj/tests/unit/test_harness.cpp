#include <doctest.h>

#include <fstream>

#include "fixtures.hpp"
#include "linkkit/error.hpp"
#include "linkkit/harness.hpp"
#include "linkkit/synthetic.hpp"

using namespace linkkit;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

/// Writes small shared-token corpora into `dir` and returns their names.
std::vector<std::string> write_corpora(const std::filesystem::path& dir, std::size_t n) {
  SharedTokenOptions o;
  o.n_projects = n;
  o.issues_per_project = 60;
  o.days = 150;
  std::vector<std::string> names;
  for (const Corpus& c : shared_token_corpora(17, o)) {
    write_corpus(c, corpus_file(dir, c.project));
    names.push_back(c.project);
  }
  return names;
}

ExperimentConfig lexical_config(const std::filesystem::path& root, std::vector<std::string> projects,
                                 ResearchQuestion rq) {
  ExperimentConfig cfg;
  cfg.rq = rq;
  cfg.projects = std::move(projects);
  cfg.dataset_dir = root / "data";
  cfg.output_dir = root / "runs";
  cfg.train.backend = Backend::lexical;
  cfg.fold_count = 2;
  return cfg;
}

}  // namespace

TEST_CASE("experiment config parsing") {
  const KvConfig kv = KvConfig::parse(
      "rq = rq4\nprojects = a, b, c, d\ndataset_dir = d\noutput_dir = o\nfold_seed = 3\nfold_count = 2\n"
      "train.backend = lexical\ntrain.epochs = 2\nsampling.window_days = 5\nratios = 0.7,0.2,0.1\n");
  const ExperimentConfig c = ExperimentConfig::from_kv(kv);
  CHECK(c.rq == ResearchQuestion::rq4);
  CHECK(c.projects == std::vector<std::string>{"a", "b", "c", "d"});
  CHECK(c.fold_seed == 3);
  CHECK(c.train.backend == Backend::lexical);
  CHECK(c.train.epochs == 2);
  CHECK(c.sampling.window_days == 5);
  CHECK(c.ratios == Ratios{0.7, 0.2, 0.1});
  CHECK(c.to_map().at("train.epochs") == "2");

  CHECK_THROWS_AS(ExperimentConfig::from_kv(KvConfig::parse("rq = rq1\nprojects = a\ndataset_dir = d\n"
                                                            "output_dir = o\ntrain.epoch = 2\n")),
                  UsageError);
  CHECK_THROWS_AS(ExperimentConfig::from_kv(KvConfig::parse("rq = rq3\nprojects = a\ndataset_dir = d\n"
                                                            "output_dir = o\n")),
                  UsageError);
  CHECK_THROWS_AS(ExperimentConfig::from_kv(KvConfig::parse("rq = rq9\nprojects = a\ndataset_dir = d\n"
                                                            "output_dir = o\n")),
                  UsageError);
  CHECK_THROWS_AS(ExperimentConfig::from_kv(KvConfig::parse("projects = a\ndataset_dir = d\noutput_dir = o\n")),
                  UsageError);
}

TEST_CASE("project-based run with the lexical backend is reproducible") {
  const auto root = fixtures::temp_dir("harness-rq1");
  const auto names = write_corpora(root / "data", 1);
  ExperimentConfig cfg = lexical_config(root, names, ResearchQuestion::rq1);
  const MetricsReport r = run_experiment(cfg);
  REQUIRE(r.rows.size() == 1);
  CHECK(r.rows[0].project == names[0]);
  const auto dir = experiment_dir(cfg);
  const std::string csv = slurp(dir / "report.csv");
  CHECK(csv.find("__mean__") != std::string::npos);
  CHECK(csv.find("__std__") != std::string::npos);
  CHECK(std::filesystem::exists(dir / "report.md"));
  CHECK(std::filesystem::exists(dir / "experiment_manifest.json"));
  CHECK(std::filesystem::exists(dir / names[0] / "split_plan.json"));
  CHECK(std::filesystem::exists(dataset_file(cfg.dataset_dir, names[0])));

  const MetricsReport again = run_experiment(cfg);
  CHECK(slurp(dir / "report.csv") == csv);
  CHECK(again.rows[0].counts == r.rows[0].counts);

  const std::string manifest = slurp(dir / "experiment_manifest.json");
  CHECK(manifest.find("\"split_seed\"") != std::string::npos);
  CHECK(manifest.find("\"train_data_fingerprint\"") != std::string::npos);
  CHECK(manifest.find("\"file_sha256\"") != std::string::npos);
}

TEST_CASE("temporal project-based run") {
  const auto root = fixtures::temp_dir("harness-rq2");
  const auto names = write_corpora(root / "data", 2);
  const MetricsReport r = run_experiment(lexical_config(root, names, ResearchQuestion::rq2));
  CHECK(r.rows.size() == 2);
}

TEST_CASE("intermediate fine-tuning on a two-project toy") {
  const auto root = fixtures::temp_dir("harness-rq3");
  const auto names = write_corpora(root / "data", 2);
  const ExperimentConfig cfg = lexical_config(root, names, ResearchQuestion::rq3);
  const MetricsReport r = run_experiment(cfg);
  REQUIRE(r.rows.size() == 2);

  // The pooled model of each fold trained on the other project's temporal 80%.
  for (const Fold& f : project_folds(cfg.projects, cfg.fold_seed, cfg.fold_count)) {
    const ModelHandle pooled = load_model(experiment_dir(cfg) / ("fold-" + std::to_string(f.fold_index)) / "pooled");
    std::size_t expected = 0;
    for (const auto& p : f.train_projects) {
      const ProjectDataset ds = read_dataset(dataset_file(cfg.dataset_dir, p));
      expected += partition_sizes(ds.pairs.size(), cfg.ratios)[0];
    }
    CHECK(pooled.train_manifest.n_train == expected);
    for (const auto& p : f.test_projects) CHECK(pooled.train_manifest.source_fingerprints.count(p) == 0);
  }
}

TEST_CASE("cross-project run tests every project once without exposure") {
  const auto root = fixtures::temp_dir("harness-rq4");
  const auto names = write_corpora(root / "data", 4);
  ExperimentConfig cfg = lexical_config(root, names, ResearchQuestion::rq4);
  const MetricsReport r = run_experiment(cfg);
  REQUIRE(r.rows.size() == 4);
  std::set<std::string> seen;
  for (const auto& row : r.rows) {
    seen.insert(row.project);
    CHECK(row.metrics.f1 == 1.0);
  }
  CHECK(seen.size() == 4);
}

TEST_CASE("exposure check catches shared pairs, stale fingerprints and seen projects") {
  const auto root = fixtures::temp_dir("harness-exposure");
  const auto names = write_corpora(root / "data", 2);
  ExperimentConfig cfg = lexical_config(root, names, ResearchQuestion::rq1);
  const ProjectDataset a = load_project_dataset(cfg, names[0]);
  const ProjectDataset b = load_project_dataset(cfg, names[1]);
  const auto ea = make_examples(a, a.pairs);
  const auto eb = make_examples(b, b.pairs);
  TrainManifest m;
  m.data_fingerprint = data_fingerprint(ea);
  m.source_fingerprints = source_fingerprints(ea);
  check_no_exposure(m, ea, eb, true);
  CHECK_THROWS_AS(check_no_exposure(m, ea, {ea.front()}, false), AuditError);
  CHECK_THROWS_AS(check_no_exposure(m, eb, eb, false), AuditError);
  std::vector<Example> other_pairs_same_project(ea.begin() + 1, ea.end());
  m.data_fingerprint = data_fingerprint(other_pairs_same_project);
  CHECK_THROWS_AS(check_no_exposure(m, other_pairs_same_project, {ea.front()}, true), AuditError);
}

TEST_CASE("missing datasets are data errors") {
  const auto root = fixtures::temp_dir("harness-missing");
  ExperimentConfig cfg = lexical_config(root, {"ghost"}, ResearchQuestion::rq1);
  CHECK_THROWS_AS(run_experiment(cfg), DataError);
}
