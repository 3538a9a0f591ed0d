// linkkit command line: ingest, build, split, train, eval, experiment, synth.
//
// Files live in a data directory (default ./data):
//   <project>.corpus.jsonl        ingest / synth output
//   <project>.jsonl               build output (+ .manifest.json)
//   <project>.<policy>.split.json split output

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "linkkit/corpus.hpp"
#include "linkkit/error.hpp"
#include "linkkit/evaluation.hpp"
#include "linkkit/harness.hpp"
#include "linkkit/ingestion.hpp"
#include "linkkit/kvconfig.hpp"
#include "linkkit/model/model.hpp"
#include "linkkit/preprocess.hpp"
#include "linkkit/sampling.hpp"
#include "linkkit/splitting.hpp"
#include "linkkit/synthetic.hpp"

namespace fs = std::filesystem;
using namespace linkkit;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitTraining = 3;

fs::path plan_path(const fs::path& data_dir, const std::string& project, SplitPolicy policy) {
  return data_dir / (project + "." + std::string(to_string(policy)) + ".split.json");
}

/// `<dir>/<project>.<policy>.split.json` -> `<dir>/<project>.jsonl`.
fs::path dataset_for_plan(const fs::path& plan) {
  std::string name = plan.filename().string();
  for (const char* policy : {".random.split.json", ".temporal.split.json"}) {
    const std::string suffix(policy);
    if (name.size() > suffix.size() && name.ends_with(suffix)) {
      return plan.parent_path() / (name.substr(0, name.size() - suffix.size()) + ".jsonl");
    }
  }
  throw UsageError("cannot infer the dataset of plan '" + plan.string() + "'; pass --dataset");
}

struct IngestArgs {
  std::string project;
  fs::path config;
};

void cmd_ingest(const IngestArgs& a, const fs::path& data_dir) {
  const KvConfig kv = KvConfig::load(a.config);
  kv.require_known({"repo_slug", "its", "jira_base_url", "jira_project_key", "cache_dir", "github_api_url",
                    "page_size", "max_retries", "parallelism", "category_overrides"});
  SourceConfig src;
  src.project = a.project;
  src.repo_slug = kv.string_or("repo_slug", "");
  src.its = parse_issue_source(kv.string_or("its", "github"));
  src.jira_base_url = kv.optional_string("jira_base_url");
  src.jira_project_key = kv.optional_string("jira_project_key");
  src.cache_dir = kv.string_or("cache_dir", src.cache_dir.string());
  src.github_api_url = kv.string_or("github_api_url", src.github_api_url);
  src.validate();
  FetchOptions opts;
  opts.page_size = static_cast<std::size_t>(kv.integer_or("page_size", static_cast<std::int64_t>(opts.page_size)));
  opts.max_retries = static_cast<int>(kv.integer_or("max_retries", opts.max_retries));
  opts.parallelism = static_cast<std::size_t>(kv.integer_or("parallelism", static_cast<std::int64_t>(opts.parallelism)));
  const CategoryMaps maps = kv.has("category_overrides") ? CategoryMaps::with_overrides(kv.string("category_overrides"))
                                                         : CategoryMaps::defaults();

  const Credentials auth = Credentials::from_env();
  HttplibTransport transport;
  FetchStats stats;
  Corpus corpus;
  corpus.project = a.project;
  corpus.commits = fetch_commits(src, auth, transport, opts, &stats);
  corpus.issues = fetch_issues(src, auth, transport, opts, &stats);
  for (Issue& i : corpus.issues) normalize_issue(i, maps);
  for (Commit& c : corpus.commits) normalize_commit(c, maps);
  const fs::path out = corpus_file(data_dir, a.project);
  write_corpus(corpus, out);
  std::cout << a.project << ": " << corpus.issues.size() << " issues, " << corpus.commits.size() << " commits ("
            << stats.network_requests << " requests, " << stats.cache_hits << " cached) -> " << out.string() << "\n";
}

struct BuildArgs {
  std::string project;
  std::int64_t seed = 0;
  int window_days = 7;
  std::optional<std::size_t> max_candidates;
  std::vector<std::string> patterns;
  bool ignore_case = false;
};

void cmd_build(const BuildArgs& a, const fs::path& data_dir) {
  const Corpus corpus = read_corpus(corpus_file(data_dir, a.project));
  LinkPatterns patterns = patterns_for_corpus(corpus);
  if (!a.patterns.empty()) {
    std::vector<ReferencePattern> custom;
    for (const auto& p : a.patterns) {
      ReferencePattern r;
      r.name = "custom" + std::to_string(custom.size());
      r.expression = p;
      r.ignore_case = a.ignore_case;
      custom.push_back(std::move(r));
    }
    patterns = LinkPatterns(std::move(custom));
  }
  SamplingConfig cfg;
  cfg.seed = a.seed;
  cfg.window_days = a.window_days;
  cfg.max_candidates_per_issue = a.max_candidates;
  const ProjectDataset ds = build_balanced_dataset(a.project, corpus.issues, corpus.commits, patterns, cfg);
  const fs::path out = dataset_file(data_dir, a.project);
  write_dataset(ds, out);
  std::cout << a.project << ": " << ds.manifest.n_true << " true, " << ds.manifest.n_false << " false"
            << (ds.manifest.imbalanced ? " (imbalanced)" : "") << " -> " << out.string() << "\n";
}

struct SplitArgs {
  std::string project;
  std::string policy = "temporal";
  std::string ratios = "0.8,0.1,0.1";
  std::int64_t seed = 0;
  std::string out;
};

void cmd_split(const SplitArgs& a, const fs::path& data_dir) {
  const SplitPolicy policy = parse_split_policy(a.policy);
  const Ratios ratios = parse_ratios(a.ratios);
  const ProjectDataset ds = read_dataset(dataset_file(data_dir, a.project));
  const SplitPlan plan = policy == SplitPolicy::temporal ? temporal_split(ds, ratios) : random_split(ds, ratios, a.seed);
  const fs::path out = a.out.empty() ? plan_path(data_dir, a.project, policy) : fs::path(a.out);
  write_split_plan(plan, out);
  std::cout << a.project << ": train " << plan.train.size() << ", val " << plan.val.size() << ", test "
            << plan.test.size() << "; audit " << (plan.audit.passed ? "passed" : "FAILED") << " ("
            << plan.audit.leaked_pairs.size() << " leaked) -> " << out.string() << "\n";
}

struct TrainArgs {
  std::string backend;
  fs::path config;
};

/// Train config: dataset, plan, artifact_dir, plus the TrainConfig fields.
void cmd_train(const TrainArgs& a) {
  KvConfig kv = KvConfig::load(a.config);
  std::set<std::string> known = {"dataset", "plan", "artifact_dir"};
  for (const auto& k : TrainConfig::keys()) known.insert(k);
  kv.require_known(known);
  if (!a.backend.empty()) kv.set("backend", a.backend);
  const TrainConfig cfg = TrainConfig::from_kv(kv);
  const fs::path plan_file = kv.string("plan");
  const fs::path dataset = kv.has("dataset") ? fs::path(kv.string("dataset")) : dataset_for_plan(plan_file);
  const ProjectDataset ds = read_dataset(dataset);
  const SplitPlan plan = read_split_plan(plan_file);
  if (plan.policy == SplitPolicy::temporal && !plan.audit.passed) {
    throw AuditError("temporal plan '" + plan_file.string() + "' failed the leakage audit");
  }
  const auto train = make_examples(ds, select_pairs(ds, plan.train));
  const auto val = make_examples(ds, select_pairs(ds, plan.val));
  const ModelHandle model = fine_tune(train, val, cfg, kv.string("artifact_dir"));
  std::cout << "trained " << to_string(model.backend) << " on " << train.size() << " pairs";
  if (model.train_manifest.val) {
    std::printf("; val F1 %.4f (epoch %zu)", model.train_manifest.val->metrics.f1, model.train_manifest.best_epoch);
  }
  std::cout << " -> " << model.artifact_path.string() << "\n";
}

struct EvalArgs {
  fs::path plan;
  fs::path model;
  std::string dataset;
  std::string format = "markdown";
  std::string out;
  std::string partition = "test";
};

void cmd_eval(const EvalArgs& a) {
  const SplitPlan plan = read_split_plan(a.plan);
  const ProjectDataset ds = read_dataset(a.dataset.empty() ? dataset_for_plan(a.plan) : fs::path(a.dataset));
  const std::vector<PairId>* ids = nullptr;
  if (a.partition == "test") ids = &plan.test;
  if (a.partition == "val") ids = &plan.val;
  if (a.partition == "train") ids = &plan.train;
  if (!ids) throw UsageError("--partition must be train, val or test");
  const ModelHandle model = load_model(a.model);
  const auto train = make_examples(ds, select_pairs(ds, plan.train));
  const auto examples = make_examples(ds, select_pairs(ds, *ids));
  if (a.partition != "train" && model.train_manifest.source_fingerprints.count(ds.project) &&
      model.train_manifest.data_fingerprint == data_fingerprint(train)) {
    check_no_exposure(model.train_manifest, train, examples, false);
  }
  const Evaluation e = evaluate(model, examples);
  MetricsReport report;
  report.rows.push_back({ds.project, e.counts, e.metrics});
  const ReportFormat format = parse_report_format(a.format);
  if (a.out.empty()) {
    std::cout << render_report(report, format);
  } else {
    write_report(report, format, a.out);
  }
}

struct ExperimentArgs {
  std::string rq;
  fs::path config;
};

void cmd_experiment(const ExperimentArgs& a) {
  KvConfig kv = KvConfig::load(a.config);
  if (!a.rq.empty()) kv.set("rq", a.rq);
  const ExperimentConfig cfg = ExperimentConfig::from_kv(kv);
  const MetricsReport report = run_experiment(cfg);
  std::cout << render_report(report, ReportFormat::markdown);
  std::cout << "reports in " << experiment_dir(cfg).string() << "\n";
}

struct SynthArgs {
  std::string kind = "project";
  std::string project = "smoke";
  std::uint64_t seed = 0;
  std::size_t projects = 4;
};

void cmd_synth(const SynthArgs& a, const fs::path& data_dir) {
  std::vector<Corpus> corpora;
  if (a.kind == "project") {
    corpora.push_back(project_fixture(a.project, a.seed));
  } else if (a.kind == "shared") {
    SharedTokenOptions o;
    o.n_projects = a.projects;
    corpora = shared_token_corpora(a.seed, o);
  } else {
    throw UsageError("--kind must be project or shared");
  }
  for (const Corpus& c : corpora) {
    const fs::path out = corpus_file(data_dir, c.project);
    write_corpus(c, out);
    std::cout << c.project << ": " << c.issues.size() << " issues, " << c.commits.size() << " commits -> "
              << out.string() << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Issue-commit link recovery toolkit"};
  app.require_subcommand(1);
  std::string data_dir = "data";
  app.add_option("--data-dir", data_dir, "Directory of corpora, datasets and split plans")->capture_default_str();

  IngestArgs ingest;
  auto* c_ingest = app.add_subcommand("ingest", "Fetch issues and commits into <project>.corpus.jsonl");
  c_ingest->add_option("--project", ingest.project)->required();
  c_ingest->add_option("--config", ingest.config, "Source config file")->required();

  BuildArgs build;
  std::size_t max_candidates = 0;
  auto* c_build = app.add_subcommand("build", "Build the balanced dataset <project>.jsonl");
  c_build->add_option("--project", build.project)->required();
  c_build->add_option("--seed", build.seed)->capture_default_str();
  c_build->add_option("--window-days", build.window_days)->capture_default_str();
  auto* o_max = c_build->add_option("--max-candidates", max_candidates, "Cap on candidates per issue");
  c_build->add_option("--pattern", build.patterns, "Reference regex (first group = issue id); repeatable");
  c_build->add_flag("--ignore-case", build.ignore_case, "Match --pattern case-insensitively");

  SplitArgs split;
  auto* c_split = app.add_subcommand("split", "Write a SplitPlan for a dataset");
  c_split->add_option("--project", split.project)->required();
  c_split->add_option("--policy", split.policy)->check(CLI::IsMember({"random", "temporal"}))->capture_default_str();
  c_split->add_option("--ratios", split.ratios)->capture_default_str();
  c_split->add_option("--seed", split.seed)->capture_default_str();
  c_split->add_option("--out", split.out, "Plan file (default <data-dir>/<project>.<policy>.split.json)");

  TrainArgs train;
  auto* c_train = app.add_subcommand("train", "Fine-tune a model on a plan's train portion");
  c_train->add_option("--backend", train.backend)->check(CLI::IsMember({"transformer", "lexical"}));
  c_train->add_option("--config", train.config)->required();

  EvalArgs eval;
  auto* c_eval = app.add_subcommand("eval", "Score a model on a plan partition");
  c_eval->add_option("--plan", eval.plan)->required();
  c_eval->add_option("--model", eval.model)->required();
  c_eval->add_option("--dataset", eval.dataset, "Dataset file (default inferred from the plan name)");
  c_eval->add_option("--format", eval.format)->check(CLI::IsMember({"csv", "markdown"}))->capture_default_str();
  c_eval->add_option("--partition", eval.partition)->capture_default_str();
  c_eval->add_option("--out", eval.out);

  ExperimentArgs exp;
  auto* c_exp = app.add_subcommand("experiment", "Run an rq1-rq4 protocol");
  c_exp->add_option("--rq", exp.rq)->check(CLI::IsMember({"rq1", "rq2", "rq3", "rq4"}));
  c_exp->add_option("--config", exp.config)->required();

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "Write synthetic corpora");
  c_synth->add_option("--kind", synth.kind)->check(CLI::IsMember({"project", "shared"}))->capture_default_str();
  c_synth->add_option("--project", synth.project)->capture_default_str();
  c_synth->add_option("--seed", synth.seed)->capture_default_str();
  c_synth->add_option("--projects", synth.projects, "Project count for --kind shared")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    const fs::path dir(data_dir);
    if (*c_ingest) cmd_ingest(ingest, dir);
    if (*c_build) {
      if (o_max->count()) build.max_candidates = max_candidates;
      cmd_build(build, dir);
    }
    if (*c_split) cmd_split(split, dir);
    if (*c_train) cmd_train(train);
    if (*c_eval) cmd_eval(eval);
    if (*c_exp) cmd_experiment(exp);
    if (*c_synth) cmd_synth(synth, dir);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const TrainingError& e) {
    std::cerr << "training error: " << e.what() << "\n";
    return kExitTraining;
  } catch (const AuditError& e) {
    std::cerr << "audit error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitOk;
}
