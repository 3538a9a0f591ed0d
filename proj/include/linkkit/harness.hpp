#pragma once

// Experiment protocols over per-project datasets:
//   rq1  project-based, random split
//   rq2  project-based, temporal split
//   rq3  pooled training on the fold's train projects, then continued
//        training on each test project's temporal-first 80%
//   rq4  pooled training only, evaluated on unseen projects

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "linkkit/evaluation.hpp"
#include "linkkit/kvconfig.hpp"
#include "linkkit/model/model.hpp"
#include "linkkit/sampling.hpp"
#include "linkkit/splitting.hpp"

namespace linkkit {

enum class ResearchQuestion { rq1, rq2, rq3, rq4 };

std::string_view to_string(ResearchQuestion rq);
ResearchQuestion parse_research_question(std::string_view s);

/// Loaded from a flat document: rq, projects, dataset_dir, output_dir,
/// fold_seed, fold_count, split_seed, ratios, train.<field>, sampling.<field>.
struct ExperimentConfig {
  ResearchQuestion rq = ResearchQuestion::rq1;
  std::vector<std::string> projects;
  std::filesystem::path dataset_dir;
  std::filesystem::path output_dir;
  TrainConfig train;
  SamplingConfig sampling;
  std::int64_t fold_seed = 0;
  std::size_t fold_count = 5;
  /// Seed of the random split policy.
  std::int64_t split_seed = 0;
  Ratios ratios = kDefaultRatios;

  void validate() const;
  static ExperimentConfig from_kv(const KvConfig& kv);
  static ExperimentConfig load(const std::filesystem::path& path);
  std::map<std::string, std::string> to_map() const;
};

/// `<dataset_dir>/<project>.jsonl`; built from `<project>.corpus.jsonl`
/// with the sampling config when only the corpus exists.
ProjectDataset load_project_dataset(const ExperimentConfig& cfg, const std::string& project);

std::filesystem::path dataset_file(const std::filesystem::path& dir, const std::string& project);
std::filesystem::path corpus_file(const std::filesystem::path& dir, const std::string& project);

/// Reference patterns matching the corpus' issue tracker.
LinkPatterns patterns_for_corpus(const Corpus& corpus);

/// Throws AuditError when a model saw evaluation pairs: any shared pair id,
/// a manifest fingerprint that does not match the train examples, or (for
/// `unseen_projects`) a test project listed among the training sources.
void check_no_exposure(const TrainManifest& manifest, const std::vector<Example>& train,
                       const std::vector<Example>& test, bool unseen_projects);

MetricsReport run_project_based(const ExperimentConfig& cfg, SplitPolicy policy);
MetricsReport run_intermediate_finetune(const ExperimentConfig& cfg);
MetricsReport run_cross_project(const ExperimentConfig& cfg);

/// Dispatches on cfg.rq. Reports and the reproducibility manifest land in
/// `<output_dir>/<rq>/`.
MetricsReport run_experiment(const ExperimentConfig& cfg);

std::filesystem::path experiment_dir(const ExperimentConfig& cfg);

}  // namespace linkkit
