// Acceptance checks AC1-AC9. Prints one PASS/FAIL line per criterion and
// exits non-zero when any fails. Pass criterion names (e.g. AC7) to run a
// subset. LINKKIT_UPDATE_GOLDEN=1 rewrites the golden files instead of
// comparing against them.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>
#include <string>

#include "fixtures.hpp"
#include "linkkit/evaluation.hpp"
#include "linkkit/harness.hpp"
#include "linkkit/model/model.hpp"
#include "linkkit/model/serialize.hpp"
#include "linkkit/sampling.hpp"
#include "linkkit/splitting.hpp"
#include "linkkit/synthetic.hpp"

using namespace linkkit;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// ---------------------------------------------------------------------------

Outcome ac1_metric_oracle() {
  Rng rng(2024);
  double worst = 0.0;
  bool counts_ok = true;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + uniform_index(rng, 200);
    std::vector<Label> t(n), p(n);
    for (std::size_t k = 0; k < n; ++k) {
      t[k] = uniform_unit(rng) < 0.5 ? Label::true_link : Label::false_link;
      p[k] = uniform_unit(rng) < 0.5 ? Label::true_link : Label::false_link;
    }
    const Evaluation e = compute_metrics(t, p);
    const ConfusionCounts c = fixtures::brute_force_counts(t, p);
    counts_ok = counts_ok && e.counts == c;
    const double prec = c.tp + c.fp ? double(c.tp) / double(c.tp + c.fp) : 0.0;
    const double rec = c.tp + c.fn ? double(c.tp) / double(c.tp + c.fn) : 0.0;
    const double f1 = prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0.0;
    worst = std::max({worst, std::abs(e.metrics.precision - prec), std::abs(e.metrics.recall - rec),
                      std::abs(e.metrics.f1 - f1)});
  }
  const double fixture = f1_score(0.93, 0.88);
  const bool fixture_ok = fmt("%.4f", fixture) == "0.9043" && fmt("%.2f", fixture) == "0.90";
  return {counts_ok && worst <= 1e-12 && fixture_ok,
          "1000 vectors, max |diff| " + fmt("%.1e", worst) + "; F1(0.93, 0.88) = " + fmt("%.4f", fixture)};
}

Outcome ac2_aggregation() {
  const double f1s[] = {0.97, 0.99, 1.00, 0.99, 0.99, 0.77, 0.71, 0.90, 0.97, 0.97,
                        0.98, 0.75, 0.70, 0.91, 0.94, 0.94, 0.94, 0.75, 0.90, 0.93};
  std::map<std::string, Metrics> m;
  for (std::size_t k = 0; k < std::size(f1s); ++k) m["p" + std::to_string(k)] = {0.0, 0.0, f1s[k]};
  const Aggregate a = aggregate(m);
  return {std::abs(a.mean.f1 - 0.90) <= 0.005 && std::abs(a.std.f1 - 0.10) <= 0.005,
          "mean " + fmt("%.4f", a.mean.f1) + ", std " + fmt("%.4f", a.std.f1)};
}

Outcome ac3_sampler_oracle() {
  std::size_t corpora = 0, mismatches = 0, not_subset = 0, unbalanced = 0, pairs = 0;
  for (std::uint64_t seed = 0; seed < 150; ++seed) {
    const Corpus c = fixtures::random_corpus(1000 + seed, 200, 30 + static_cast<int>(seed % 40));
    if (c.issues.size() + c.commits.size() > 200) return {false, "generated corpus too large"};
    const auto patterns = LinkPatterns::github();
    const auto links = extract_true_links(c.issues, c.commits, patterns);
    SamplingConfig cfg;
    cfg.seed = static_cast<std::int64_t>(seed);
    const auto cands = candidate_false_pairs(c.issues, c.commits, links, patterns, cfg);
    ++corpora;
    mismatches += cands != fixtures::brute_force_candidates(c, links, patterns, cfg.window_days);
    const SampleResult s = sample_false_links(cands, links.size(), c.commits, cfg);
    for (const auto& p : s.pairs) not_subset += !cands.count(p.id());
    if (cands.size() >= links.size() && s.pairs.size() != links.size()) ++unbalanced;
    if (cands.size() < links.size() && (!s.imbalanced || s.pairs.size() != cands.size())) ++unbalanced;
    pairs += cands.size();
  }
  return {mismatches == 0 && not_subset == 0 && unbalanced == 0,
          std::to_string(corpora) + " corpora, " + std::to_string(pairs) + " candidates; " +
              std::to_string(mismatches) + " mismatches, " + std::to_string(not_subset) + " non-subset, " +
              std::to_string(unbalanced) + " unbalanced"};
}

Outcome ac4_leakage() {
  int temporal_failures = 0, random_failures = 0;
  for (int k = 0; k < 100; ++k) {
    const ProjectDataset ds = fixtures::dated_dataset(100 + static_cast<std::size_t>(k % 60),
                                                      30 + static_cast<std::size_t>(k % 25), static_cast<std::uint64_t>(k));
    temporal_failures += !temporal_split(ds).audit.passed;
    random_failures += !random_split(ds, kDefaultRatios, k).audit.passed;
  }
  return {temporal_failures == 0 && random_failures >= 99,
          "temporal failed " + std::to_string(temporal_failures) + "/100, random failed " +
              std::to_string(random_failures) + "/100"};
}

Outcome ac5_split_determinism() {
  using A = std::array<std::size_t, 3>;
  bool sizes = partition_sizes(10, kDefaultRatios) == A{8, 1, 1} && partition_sizes(11, kDefaultRatios) == A{8, 1, 2};
  for (std::size_t n = 1; n < 2000; ++n) {
    const auto s = partition_sizes(n, kDefaultRatios);
    sizes = sizes && s[0] == n * 8 / 10 && s[1] == n / 10 && s[0] + s[1] + s[2] == n;
  }
  const fs::path dir = fixtures::temp_dir("ac5");
  bool identical = true;
  for (int run = 0; run < 2; ++run) {
    const Corpus c = project_fixture("det", 77);
    SamplingConfig cfg;
    cfg.seed = 5;
    const ProjectDataset ds = build_balanced_dataset(c.project, c.issues, c.commits, LinkPatterns::github(), cfg,
                                                     std::string("2024-01-01T00:00:00Z"));
    const fs::path r = dir / ("run" + std::to_string(run));
    write_dataset(ds, r / "det.jsonl");
    write_split_plan(random_split(ds, kDefaultRatios, 9), r / "random.json");
    write_split_plan(temporal_split(ds), r / "temporal.json");
  }
  for (const char* f : {"det.jsonl", "det.manifest.json", "random.json", "temporal.json"}) {
    identical = identical && slurp(dir / "run0" / f) == slurp(dir / "run1" / f) && !slurp(dir / "run0" / f).empty();
  }
  return {sizes && identical, std::string("sizes ") + (sizes ? "ok" : "wrong") + ", files " +
                                  (identical ? "byte-identical" : "differ")};
}

Outcome ac6_folds() {
  std::vector<std::string> projects;
  for (int k = 0; k < 20; ++k) projects.push_back("project" + std::to_string(k));
  const auto folds = project_folds(projects, 4);
  std::map<std::string, int> tested;
  bool shape = folds.size() == 5;
  for (const Fold& f : folds) {
    shape = shape && f.test_projects.size() == 4 && f.train_projects.size() == 16;
    for (const auto& p : f.test_projects) ++tested[p];
  }
  bool once = tested.size() == 20;
  for (const auto& [_, n] : tested) once = once && n == 1;
  return {shape && once, std::to_string(folds.size()) + " folds, " + std::to_string(tested.size()) +
                             " projects tested, each once: " + (once ? "yes" : "no")};
}

// ---------------------------------------------------------------------------

TrainConfig smoke_transformer() {
  TrainConfig c;
  c.encoder_name = "roberta-tiny";
  c.learning_rate = 5e-4;
  c.epochs = 12;
  c.max_input_length = 128;
  c.batch_size = 32;
  c.dropout = 0.2;
  c.weight_decay = 0.01;
  c.seed = 0;
  return c;
}

Outcome ac7_smoke_training() {
  const Corpus c = project_fixture("smoke", 0);
  SamplingConfig sc;
  sc.seed = 1;
  const ProjectDataset ds =
      build_balanced_dataset(c.project, c.issues, c.commits, LinkPatterns::github(), sc, std::string("fixed"));
  const fs::path dir = fixtures::temp_dir("ac7");

  auto run = [&](const SplitPlan& plan, const TrainConfig& cfg, const std::string& name) {
    const auto train = make_examples(ds, select_pairs(ds, plan.train));
    const auto val = make_examples(ds, select_pairs(ds, plan.val));
    const auto test = make_examples(ds, select_pairs(ds, plan.test));
    const ModelHandle m = fine_tune(train, val, cfg, dir / name);
    return std::make_pair(evaluate(m, test).metrics.f1, m.train_manifest.parameter_count);
  };
  TrainConfig lex;
  lex.backend = Backend::lexical;
  const SplitPlan random = random_split(ds, kDefaultRatios, 3);
  const SplitPlan temporal = temporal_split(ds);
  const auto [f_random, params] = run(random, smoke_transformer(), "random");
  const auto [f_temporal, _] = run(temporal, smoke_transformer(), "temporal");
  const auto [f_lexical, __] = run(random, lex, "lexical");
  const bool pass = f_random >= 0.75 && f_random > f_lexical && f_random >= f_temporal - 0.05 && params <= 35'000'000;
  return {pass, std::to_string(ds.pairs.size()) + " pairs, " + std::to_string(params) + " params; F1 random " +
                    fmt("%.4f", f_random) + ", temporal " + fmt("%.4f", f_temporal) + ", lexical " +
                    fmt("%.4f", f_lexical)};
}

/// Every job's model must not list its test project among its training
/// sources, and the recorded fingerprints must match the artifacts.
bool exposure_free(const fs::path& exp_dir, std::string& why) {
  const auto manifest = nlohmann::json::parse(slurp(exp_dir / "experiment_manifest.json"));
  for (const auto& job : manifest.at("jobs")) {
    const std::string project = job.at("name");
    const ModelHandle m = load_model(job.at("artifact").get<std::string>());
    if (m.train_manifest.source_fingerprints.count(project) || job.at("train_sources").contains(project)) {
      why = project + " seen in training";
      return false;
    }
    if (m.train_manifest.data_fingerprint != job.at("train_data_fingerprint").get<std::string>()) {
      why = project + ": artifact fingerprint differs from the run manifest";
      return false;
    }
    for (const auto& [p, fp] : job.at("test_sources").items()) {
      for (const auto& [q, tfp] : m.train_manifest.source_fingerprints) {
        if (tfp == fp.get<std::string>()) {
          why = "test pairs of " + p + " match training source " + q;
          return false;
        }
      }
    }
  }
  return true;
}

Outcome ac8_transfer() {
  const fs::path root = fixtures::temp_dir("ac8");
  std::vector<std::string> names;
  SharedTokenOptions shared;
  shared.issues_per_project = 240;
  for (const Corpus& c : shared_token_corpora(8, shared)) {
    write_corpus(c, corpus_file(root / "data", c.project));
    names.push_back(c.project);
  }
  ExperimentConfig cfg;
  cfg.rq = ResearchQuestion::rq4;
  cfg.projects = names;
  cfg.dataset_dir = root / "data";
  cfg.fold_count = 4;

  cfg.output_dir = root / "lexical";
  cfg.train.backend = Backend::lexical;
  const MetricsReport lex = run_cross_project(cfg);
  std::string why_lex, why_tf;
  const bool lex_clean = exposure_free(experiment_dir(cfg), why_lex);

  cfg.output_dir = root / "transformer";
  cfg.train = smoke_transformer();
  const MetricsReport tf = run_cross_project(cfg);
  const bool tf_clean = exposure_free(experiment_dir(cfg), why_tf);

  auto min_f1 = [](const MetricsReport& r) {
    double m = 1.0;
    for (const auto& row : r.rows) m = std::min(m, row.metrics.f1);
    return r.rows.empty() ? 0.0 : m;
  };
  const double lex_mean = aggregate(lex.metrics_by_project()).mean.f1;
  const double tf_mean = aggregate(tf.metrics_by_project()).mean.f1;
  const bool pass = lex.rows.size() == 4 && tf.rows.size() == 4 && min_f1(lex) == 1.0 && tf_mean >= 0.95 &&
                    lex_clean && tf_clean;
  return {pass, "lexical F1 " + fmt("%.4f", lex_mean) + " (min " + fmt("%.4f", min_f1(lex)) + "), transformer F1 " +
                    fmt("%.4f", tf_mean) + " (min " + fmt("%.4f", min_f1(tf)) + "); exposure " +
                    (lex_clean && tf_clean ? "none" : why_lex + why_tf)};
}

// ---------------------------------------------------------------------------

Outcome ac9_golden() {
  const fs::path golden(LINKKIT_GOLDEN_DIR);
  const bool update = std::getenv("LINKKIT_UPDATE_GOLDEN") != nullptr;
  const fs::path out = fixtures::temp_dir("ac9");

  const Corpus c = fixtures::tiny_corpus();
  const ProjectDataset ds = build_balanced_dataset(c.project, c.issues, c.commits, LinkPatterns::github(),
                                                   SamplingConfig{}, std::string("2024-01-01T00:00:00Z"));
  std::string serialized;
  for (const LinkPair& p : ds.pairs) {
    serialized += serialize_pair(ds.issue(p.issue_id), ds.commit(p.commit_sha)) + "\n";
  }
  SerializeOptions with_desc;
  with_desc.include_description = true;
  serialized += serialize_pair(c.issues[1], c.commits[1], "[SEP]", with_desc) + "\n";
  std::ofstream(out / "serialize_pair.txt", std::ios::binary) << serialized;
  write_dataset(ds, out / "dataset.jsonl");

  MetricsReport report;
  report.rows.push_back({"Pgcli", {61, 3, 59, 5}, metrics_from_counts({61, 3, 59, 5})});
  report.rows.push_back({"Airflow", {880, 120, 860, 140}, metrics_from_counts({880, 120, 860, 140})});
  report.rows.push_back({"Keras", {0, 0, 10, 4}, metrics_from_counts({0, 0, 10, 4})});
  write_report(report, ReportFormat::csv, out / "report.csv");
  write_report(report, ReportFormat::markdown, out / "report.md");

  const char* files[] = {"serialize_pair.txt", "dataset.jsonl", "dataset.manifest.json", "report.csv", "report.md"};
  std::vector<std::string> differing;
  for (const char* f : files) {
    if (update) {
      fs::create_directories(golden);
      fs::copy_file(out / f, golden / f, fs::copy_options::overwrite_existing);
    } else if (!fs::exists(golden / f) || slurp(golden / f) != slurp(out / f)) {
      differing.push_back(f);
    }
  }
  if (update) return {true, "golden files rewritten"};
  std::string detail = std::to_string(std::size(files) - differing.size()) + "/" + std::to_string(std::size(files)) +
                       " golden files match";
  for (const auto& d : differing) detail += "; differs: " + d;
  return {differing.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> checks = {
      {"AC1", ac1_metric_oracle},  {"AC2", ac2_aggregation},      {"AC3", ac3_sampler_oracle},
      {"AC4", ac4_leakage},        {"AC5", ac5_split_determinism}, {"AC6", ac6_folds},
      {"AC7", ac7_smoke_training}, {"AC8", ac8_transfer},          {"AC9", ac9_golden}};
  std::set<std::string> only(argv + 1, argv + argc);
  int failed = 0;
  for (const auto& [name, fn] : checks) {
    if (!only.empty() && !only.count(name)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << name << (o.pass ? " PASS " : " FAIL ") << o.detail << " [" << fmt("%.1f", secs) << "s]"
              << std::endl;
    failed += !o.pass;
  }
  return failed == 0 ? 0 : 1;
}
