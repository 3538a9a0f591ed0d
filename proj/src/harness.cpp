#include "linkkit/harness.hpp"

#include <algorithm>
#include <set>

#include "json_util.hpp"
#include "linkkit/error.hpp"
#include "linkkit/hash.hpp"
#include "linkkit/ingestion.hpp"
#include "linkkit/log.hpp"

namespace linkkit {

using detail::Json;

std::string_view to_string(ResearchQuestion rq) {
  switch (rq) {
    case ResearchQuestion::rq1: return "rq1";
    case ResearchQuestion::rq2: return "rq2";
    case ResearchQuestion::rq3: return "rq3";
    case ResearchQuestion::rq4: return "rq4";
  }
  return "rq1";
}

ResearchQuestion parse_research_question(std::string_view s) {
  if (s == "rq1") return ResearchQuestion::rq1;
  if (s == "rq2") return ResearchQuestion::rq2;
  if (s == "rq3") return ResearchQuestion::rq3;
  if (s == "rq4") return ResearchQuestion::rq4;
  throw UsageError("unknown rq '" + std::string(s) + "' (expected rq1, rq2, rq3 or rq4)");
}

void ExperimentConfig::validate() const {
  if (projects.empty()) throw UsageError("experiment needs at least one project");
  const std::set<std::string> unique(projects.begin(), projects.end());
  if (unique.size() != projects.size()) throw UsageError("experiment projects must be distinct");
  if ((rq == ResearchQuestion::rq3 || rq == ResearchQuestion::rq4) && projects.size() < 2) {
    throw UsageError(std::string(to_string(rq)) + " needs at least 2 projects");
  }
  if (dataset_dir.empty()) throw UsageError("dataset_dir is required");
  if (output_dir.empty()) throw UsageError("output_dir is required");
  if (fold_count < 2 && (rq == ResearchQuestion::rq3 || rq == ResearchQuestion::rq4)) {
    throw UsageError("fold_count must be >= 2");
  }
  validate_ratios(ratios);
  train.validate();
  sampling.validate();
}

ExperimentConfig ExperimentConfig::from_kv(const KvConfig& kv) {
  std::set<std::string> known = {"rq",        "projects",   "dataset_dir", "output_dir", "fold_seed",
                                 "fold_count", "split_seed", "ratios",      "sampling.window_days",
                                 "sampling.seed", "sampling.max_candidates_per_issue"};
  for (const auto& k : TrainConfig::keys()) known.insert("train." + k);
  kv.require_known(known);

  ExperimentConfig c;
  c.rq = parse_research_question(kv.string("rq"));
  c.projects = kv.list("projects");
  c.dataset_dir = kv.string("dataset_dir");
  c.output_dir = kv.string("output_dir");
  c.fold_seed = kv.integer_or("fold_seed", c.fold_seed);
  const std::int64_t folds = kv.integer_or("fold_count", static_cast<std::int64_t>(c.fold_count));
  if (folds < 1) throw UsageError("fold_count must be positive");
  c.fold_count = static_cast<std::size_t>(folds);
  c.split_seed = kv.integer_or("split_seed", c.split_seed);
  if (kv.has("ratios")) c.ratios = parse_ratios(kv.string("ratios"));
  c.train = TrainConfig::from_kv(kv, "train.");
  c.sampling.window_days = static_cast<int>(kv.integer_or("sampling.window_days", c.sampling.window_days));
  c.sampling.seed = kv.integer_or("sampling.seed", c.sampling.seed);
  if (kv.has("sampling.max_candidates_per_issue")) {
    const std::int64_t m = kv.integer_or("sampling.max_candidates_per_issue", 0);
    if (m < 0) throw UsageError("sampling.max_candidates_per_issue must be non-negative");
    c.sampling.max_candidates_per_issue = static_cast<std::size_t>(m);
  }
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) { return from_kv(KvConfig::load(path)); }

std::map<std::string, std::string> ExperimentConfig::to_map() const {
  std::string plist, rlist;
  for (const auto& p : projects) plist += (plist.empty() ? "" : ",") + p;
  for (double r : ratios) rlist += (rlist.empty() ? "" : ",") + Json(r).dump();
  std::map<std::string, std::string> m = {{"rq", std::string(to_string(rq))},
                                          {"projects", plist},
                                          {"dataset_dir", dataset_dir.string()},
                                          {"output_dir", output_dir.string()},
                                          {"fold_seed", std::to_string(fold_seed)},
                                          {"fold_count", std::to_string(fold_count)},
                                          {"split_seed", std::to_string(split_seed)},
                                          {"ratios", rlist},
                                          {"sampling.window_days", std::to_string(sampling.window_days)},
                                          {"sampling.seed", std::to_string(sampling.seed)}};
  if (sampling.max_candidates_per_issue) {
    m["sampling.max_candidates_per_issue"] = std::to_string(*sampling.max_candidates_per_issue);
  }
  for (const auto& [k, v] : train.to_map()) m["train." + k] = v;
  return m;
}

std::filesystem::path dataset_file(const std::filesystem::path& dir, const std::string& project) {
  return dir / (project + ".jsonl");
}

std::filesystem::path corpus_file(const std::filesystem::path& dir, const std::string& project) {
  return dir / (project + ".corpus.jsonl");
}

LinkPatterns patterns_for_corpus(const Corpus& corpus) {
  for (const Issue& i : corpus.issues) {
    if (i.source == IssueSource::jira) {
      const auto dash = i.issue_id.rfind('-');
      if (dash == std::string::npos || dash == 0) throw DataError("jira issue id '" + i.issue_id + "' has no key");
      return LinkPatterns::jira(i.issue_id.substr(0, dash));
    }
  }
  return LinkPatterns::github();
}

ProjectDataset load_project_dataset(const ExperimentConfig& cfg, const std::string& project) {
  const auto path = dataset_file(cfg.dataset_dir, project);
  std::error_code ec;
  if (std::filesystem::exists(path, ec)) return read_dataset(path);
  const auto raw = corpus_file(cfg.dataset_dir, project);
  if (!std::filesystem::exists(raw, ec)) {
    throw DataError("no dataset for project '" + project + "': expected " + path.string() + " or " + raw.string());
  }
  const Corpus corpus = read_corpus(raw);
  ProjectDataset ds = build_balanced_dataset(project, corpus.issues, corpus.commits, patterns_for_corpus(corpus),
                                             cfg.sampling);
  write_dataset(ds, path);
  return ds;
}

void check_no_exposure(const TrainManifest& manifest, const std::vector<Example>& train,
                       const std::vector<Example>& test, bool unseen_projects) {
  if (manifest.data_fingerprint != data_fingerprint(train)) {
    throw AuditError("model manifest fingerprint does not match its train examples");
  }
  std::set<std::pair<std::string, PairId>> seen;
  for (const Example& e : train) seen.insert({e.project, e.id()});
  for (const Example& e : test) {
    if (seen.count({e.project, e.id()})) {
      throw AuditError("evaluation pair " + e.project + "/" + e.id().to_string() + " was used for training");
    }
    if (unseen_projects && manifest.source_fingerprints.count(e.project)) {
      throw AuditError("evaluation project '" + e.project + "' appears among the training sources");
    }
  }
}

std::filesystem::path experiment_dir(const ExperimentConfig& cfg) {
  return cfg.output_dir / std::string(to_string(cfg.rq));
}

namespace {

struct Portions {
  SplitPlan plan;
  std::vector<Example> train, val, test;
};

Portions split_project(const ProjectDataset& ds, const ExperimentConfig& cfg, SplitPolicy policy) {
  Portions p;
  p.plan = policy == SplitPolicy::temporal ? temporal_split(ds, cfg.ratios) : random_split(ds, cfg.ratios, cfg.split_seed);
  p.train = make_examples(ds, select_pairs(ds, p.plan.train));
  p.val = make_examples(ds, select_pairs(ds, p.plan.val));
  p.test = make_examples(ds, select_pairs(ds, p.plan.test));
  return p;
}

void append(std::vector<Example>& into, const std::vector<Example>& from) {
  into.insert(into.end(), from.begin(), from.end());
}

std::string file_digest(const std::filesystem::path& path) { return sha256_hex(detail::read_text_file(path)); }

Json fingerprints_json(const std::map<std::string, std::string>& m) {
  Json j = Json::object();
  for (const auto& [k, v] : m) j[k] = v;
  return j;
}

/// Collects the reproducibility manifest while an experiment runs.
class RunLog {
 public:
  explicit RunLog(const ExperimentConfig& cfg) : cfg_(cfg) {
    root_["rq"] = std::string(to_string(cfg.rq));
    Json c = Json::object();
    for (const auto& [k, v] : cfg.to_map()) c[k] = v;
    root_["config"] = std::move(c);
    root_["seeds"] = {{"fold_seed", cfg.fold_seed},
                      {"split_seed", cfg.split_seed},
                      {"train_seed", cfg.train.seed},
                      {"sampling_seed", cfg.sampling.seed}};
    root_["datasets"] = Json::object();
    root_["folds"] = Json::array();
    root_["jobs"] = Json::array();
  }

  void dataset(const std::string& project, const ProjectDataset& ds) {
    root_["datasets"][project] = {{"file_sha256", file_digest(dataset_file(cfg_.dataset_dir, project))},
                                  {"pairs_fingerprint", pairs_fingerprint(ds.project, ds.pairs)},
                                  {"n_pairs", ds.pairs.size()}};
  }

  void fold(const Fold& f) {
    root_["folds"].push_back({{"fold_index", f.fold_index},
                              {"train_projects", f.train_projects},
                              {"test_projects", f.test_projects}});
  }

  void job(const std::string& name, const ModelHandle& model, const std::vector<Example>& test, Json extra = {}) {
    Json j = {{"name", name},
              {"artifact", model.artifact_path.string()},
              {"train_data_fingerprint", model.train_manifest.data_fingerprint},
              {"train_sources", fingerprints_json(model.train_manifest.source_fingerprints)},
              {"n_train", model.train_manifest.n_train},
              {"n_val", model.train_manifest.n_val},
              {"test_data_fingerprint", test.empty() ? "" : data_fingerprint(test)},
              {"test_sources", fingerprints_json(source_fingerprints(test))},
              {"n_test", test.size()}};
    if (extra.is_object()) {
      for (auto& [k, v] : extra.items()) j[k] = v;
    }
    root_["jobs"].push_back(std::move(j));
  }

  void skipped(const std::string& project, const std::string& reason) {
    root_["skipped"][project] = reason;
  }

  void finish(const MetricsReport& report) {
    const auto dir = experiment_dir(cfg_);
    write_report(report, ReportFormat::csv, dir / "report.csv");
    write_report(report, ReportFormat::markdown, dir / "report.md");
    detail::write_text_file(dir / "experiment_manifest.json", detail::dump_pretty(root_));
  }

 private:
  const ExperimentConfig& cfg_;
  Json root_;
};

ProjectResult score(const std::string& project, const ModelHandle& model, const std::vector<Example>& test) {
  const Evaluation e = evaluate(model, test);
  return {project, e.counts, e.metrics};
}

void write_plan_json(const SplitPlan& plan, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_split_plan(plan, dir / "split_plan.json");
}

}  // namespace

MetricsReport run_project_based(const ExperimentConfig& cfg, SplitPolicy policy) {
  cfg.validate();
  const auto root = experiment_dir(cfg);
  RunLog log(cfg);
  MetricsReport report;
  for (const auto& project : cfg.projects) {
    const ProjectDataset ds = load_project_dataset(cfg, project);
    log.dataset(project, ds);
    const auto job_dir = root / project;
    Portions p;
    try {
      p = split_project(ds, cfg, policy);
      if (policy == SplitPolicy::temporal && !p.plan.audit.passed) {
        throw AuditError("temporal split of '" + project + "' leaks " +
                         std::to_string(p.plan.audit.leaked_pairs.size()) + " test pairs");
      }
    } catch (const AuditError& e) {
      std::filesystem::create_directories(job_dir);
      detail::write_text_file(job_dir / "audit_failure.txt", std::string(e.what()) + "\n");
      warn(std::string("skipping project '") + project + "': " + e.what());
      log.skipped(project, e.what());
      continue;
    }
    write_plan_json(p.plan, job_dir);
    const ModelHandle model = fine_tune(p.train, p.val, cfg.train, job_dir / "model");
    check_no_exposure(model.train_manifest, p.train, p.test, false);
    check_no_exposure(model.train_manifest, p.train, p.val, false);
    report.rows.push_back(score(project, model, p.test));
    log.job(project, model, p.test, {{"policy", std::string(to_string(policy))}, {"audit_passed", p.plan.audit.passed}});
  }
  log.finish(report);
  return report;
}

namespace {

struct FoldData {
  std::vector<Example> pooled_train, pooled_val;
  std::map<std::string, Portions> per_project;
};

/// Temporal portions of every project the fold touches.
FoldData fold_data(const ExperimentConfig& cfg, const Fold& fold, std::map<std::string, ProjectDataset>& cache,
                   RunLog& log) {
  FoldData d;
  auto portions = [&](const std::string& project) -> Portions& {
    auto it = d.per_project.find(project);
    if (it != d.per_project.end()) return it->second;
    auto ds = cache.find(project);
    if (ds == cache.end()) {
      ds = cache.emplace(project, load_project_dataset(cfg, project)).first;
      log.dataset(project, ds->second);
    }
    return d.per_project.emplace(project, split_project(ds->second, cfg, SplitPolicy::temporal)).first->second;
  };
  for (const auto& project : fold.train_projects) {
    const Portions& p = portions(project);
    append(d.pooled_train, p.train);
    append(d.pooled_val, p.val);
  }
  for (const auto& project : fold.test_projects) portions(project);
  return d;
}

}  // namespace

MetricsReport run_intermediate_finetune(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto root = experiment_dir(cfg);
  RunLog log(cfg);
  std::map<std::string, ProjectDataset> cache;
  MetricsReport report;
  for (const Fold& fold : project_folds(cfg.projects, cfg.fold_seed, cfg.fold_count)) {
    log.fold(fold);
    const FoldData d = fold_data(cfg, fold, cache, log);
    const auto fold_dir = root / ("fold-" + std::to_string(fold.fold_index));
    const ModelHandle pooled = fine_tune(d.pooled_train, d.pooled_val, cfg.train, fold_dir / "pooled");

    for (const auto& project : fold.test_projects) {
      const Portions& p = d.per_project.at(project);
      check_no_exposure(pooled.train_manifest, d.pooled_train, p.test, true);
      const auto job_dir = fold_dir / project;
      write_plan_json(p.plan, job_dir);
      TrainConfig cont = cfg.train;
      std::vector<Example> cont_train = p.train;
      if (cfg.train.backend == Backend::transformer) {
        cont.encoder_name = pooled.artifact_path.string();
      } else {
        // The lexical baseline has no weights to continue from; it is
        // refit on the pooled portions plus the target's train portion.
        cont_train = d.pooled_train;
        append(cont_train, p.train);
      }
      const ModelHandle model = fine_tune(cont_train, p.val, cont, job_dir / "model");
      check_no_exposure(model.train_manifest, cont_train, p.test, false);
      report.rows.push_back(score(project, model, p.test));
      log.job(project, model, p.test,
              {{"fold_index", fold.fold_index},
               {"pooled_artifact", pooled.artifact_path.string()},
               {"pooled_data_fingerprint", pooled.train_manifest.data_fingerprint}});
    }
  }
  log.finish(report);
  return report;
}

MetricsReport run_cross_project(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto root = experiment_dir(cfg);
  RunLog log(cfg);
  std::map<std::string, ProjectDataset> cache;
  MetricsReport report;
  for (const Fold& fold : project_folds(cfg.projects, cfg.fold_seed, cfg.fold_count)) {
    log.fold(fold);
    const FoldData d = fold_data(cfg, fold, cache, log);
    const auto fold_dir = root / ("fold-" + std::to_string(fold.fold_index));
    const ModelHandle model = fine_tune(d.pooled_train, d.pooled_val, cfg.train, fold_dir / "model");
    for (const auto& project : fold.test_projects) {
      const Portions& p = d.per_project.at(project);
      check_no_exposure(model.train_manifest, d.pooled_train, p.test, true);
      write_plan_json(p.plan, fold_dir / project);
      report.rows.push_back(score(project, model, p.test));
      log.job(project, model, p.test, {{"fold_index", fold.fold_index}});
    }
  }
  log.finish(report);
  return report;
}

MetricsReport run_experiment(const ExperimentConfig& cfg) {
  switch (cfg.rq) {
    case ResearchQuestion::rq1: return run_project_based(cfg, SplitPolicy::random);
    case ResearchQuestion::rq2: return run_project_based(cfg, SplitPolicy::temporal);
    case ResearchQuestion::rq3: return run_intermediate_finetune(cfg);
    case ResearchQuestion::rq4: return run_cross_project(cfg);
  }
  throw UsageError("unknown rq");
}

}  // namespace linkkit
