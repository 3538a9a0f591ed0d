#pragma once

// Constrained negative sampling and balanced dataset construction.

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "linkkit/corpus.hpp"
#include "linkkit/ingestion.hpp"

namespace linkkit {

struct SamplingConfig {
  int window_days = 7;
  std::int64_t seed = 0;
  /// Keeps at most this many candidates per issue (the first in sha order).
  std::optional<std::size_t> max_candidates_per_issue;

  void validate() const;
};

/// Every (issue, commit) of the project with
///   |authored - created| <= window_days,
///   no reference from the commit to the issue and not already a true link,
///   trimmed author != trimmed creator.
std::set<PairId> candidate_false_pairs(std::span<const Issue> issues, std::span<const Commit> commits,
                                       std::span<const LinkPair> true_links, const LinkPatterns& patterns,
                                       const SamplingConfig& cfg);

struct SampleResult {
  std::vector<LinkPair> pairs;
  /// Set when fewer candidates than true links were available.
  bool imbalanced = false;
};

/// Uniform seeded selection of min(n_true, |candidates|) false links. The
/// pair dates come from `commits`.
SampleResult sample_false_links(const std::set<PairId>& candidates, std::size_t n_true,
                                std::span<const Commit> commits, const SamplingConfig& cfg);

/// Extraction, candidate enumeration and sampling in one step. Throws
/// DataError when the corpus yields no true links. `built_at` defaults to
/// the current UTC time.
ProjectDataset build_balanced_dataset(const std::string& project, std::span<const Issue> issues,
                                      std::span<const Commit> commits, const LinkPatterns& patterns,
                                      const SamplingConfig& cfg,
                                      std::optional<std::string> built_at = std::nullopt);

/// Trimmed string equality used for the author/creator constraint.
bool same_identity(std::string_view a, std::string_view b);

std::string utc_timestamp_now();

}  // namespace linkkit
