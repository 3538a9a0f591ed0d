#pragma once

// Random, temporal and project-fold splits plus the temporal leakage audit.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "linkkit/corpus.hpp"

namespace linkkit {

enum class SplitPolicy { random, temporal };

std::string_view to_string(SplitPolicy p);
SplitPolicy parse_split_policy(std::string_view s);

using Ratios = std::array<double, 3>;
inline constexpr Ratios kDefaultRatios = {0.8, 0.1, 0.1};

/// Parses "0.8,0.1,0.1".
Ratios parse_ratios(std::string_view text);

struct LeakedPair {
  PairId test_pair;
  /// Latest train/val pair date, which is later than the test pair's date.
  Date max_train_date;

  friend bool operator==(const LeakedPair&, const LeakedPair&) = default;
};

struct AuditReport {
  SplitPolicy policy = SplitPolicy::random;
  std::vector<LeakedPair> leaked_pairs;
  bool passed = true;

  friend bool operator==(const AuditReport&, const AuditReport&) = default;
};

struct SplitPlan {
  SplitPolicy policy = SplitPolicy::random;
  Ratios ratios = kDefaultRatios;
  std::optional<std::int64_t> seed;
  std::vector<PairId> train;
  std::vector<PairId> val;
  std::vector<PairId> test;
  AuditReport audit;

  std::size_t size() const { return train.size() + val.size() + test.size(); }
  friend bool operator==(const SplitPlan&, const SplitPlan&) = default;
};

/// train = floor(r0 n), val = floor(r1 n), test = the rest.
std::array<std::size_t, 3> partition_sizes(std::size_t n, const Ratios& ratios);

void validate_ratios(const Ratios& ratios);

SplitPlan random_split(const ProjectDataset& dataset, const Ratios& ratios, std::int64_t seed);

/// Sorted by (pair_date, issue_id, commit_sha); validation precedes test.
SplitPlan temporal_split(const ProjectDataset& dataset, const Ratios& ratios = kDefaultRatios);

/// Passes iff every train/val date is <= every test date. Each test pair
/// dated before the latest train/val pair is reported.
AuditReport audit_leakage(const SplitPlan& plan, const ProjectDataset& dataset);

/// Resolves the ids of one partition against the dataset, in plan order.
std::vector<LinkPair> select_pairs(const ProjectDataset& dataset, const std::vector<PairId>& ids);

struct Fold {
  std::size_t fold_index = 0;
  std::vector<std::string> train_projects;
  std::vector<std::string> test_projects;

  friend bool operator==(const Fold&, const Fold&) = default;
};

/// Seeded shuffle of the projects, then contiguous groups as test sets.
/// The project count must be a multiple of `fold_count`.
std::vector<Fold> project_folds(const std::vector<std::string>& projects, std::int64_t seed,
                                std::size_t fold_count = 5);

void write_split_plan(const SplitPlan& plan, const std::filesystem::path& path);
SplitPlan read_split_plan(const std::filesystem::path& path);

}  // namespace linkkit
