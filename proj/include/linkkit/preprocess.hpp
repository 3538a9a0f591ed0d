#pragma once

// Text, category, and timestamp normalization into the final feature list.

#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "linkkit/corpus.hpp"

namespace linkkit {

/// Identifier of the shipped stop-word list; recorded in dataset manifests.
inline constexpr std::string_view kStopWordsVersion = "linkkit-en-1";

const std::vector<std::string>& stop_words();
bool is_stop_word(std::string_view lowercase_token);

/// Lowercased alphanumeric tokens, split at whitespace and punctuation.
/// Stop words are kept; use normalize_text to drop them.
std::vector<std::string> word_tokens(std::string_view raw);

/// Lowercase, punctuation-split, stop-word-free text joined by single
/// spaces. Idempotent.
std::string normalize_text(std::string_view raw);

/// Raw-value -> category tables for issue types and commit statuses.
struct CategoryMaps {
  std::map<std::string, IssueType> issue_types;
  std::map<std::string, CommitStatus> statuses;

  static const CategoryMaps& defaults();

  /// Defaults overlaid with a `raw=category` file, one entry per line.
  /// Blank lines and lines starting with '#' are ignored.
  static CategoryMaps with_overrides(const std::filesystem::path& path);
  void apply_overrides(std::string_view text);
};

/// Unmapped values fall back to `task` and emit a warning.
IssueType normalize_issue_type(std::string_view type_raw,
                               const CategoryMaps& maps = CategoryMaps::defaults());

/// Unmapped values fall back to `closed` and emit a warning.
CommitStatus normalize_commit_status(std::string_view status_raw,
                                     const CategoryMaps& maps = CategoryMaps::defaults());

/// Converts an ISO-8601 timestamp to UTC, then drops the time of day.
/// Throws DataError naming `field` when the value cannot be parsed.
Date truncate_timestamp(std::string_view ts, std::string_view field = "timestamp");

/// Fills type_norm / status_norm from the raw values.
void normalize_issue(Issue& issue, const CategoryMaps& maps = CategoryMaps::defaults());
void normalize_commit(Commit& commit, const CategoryMaps& maps = CategoryMaps::defaults());

/// The twelve model features of one <issue, commit> pair.
struct PairFeatures {
  std::string creator;
  std::string author;
  std::string committer;
  bool closed = false;
  bool resolved = false;
  bool bug = false;
  bool feature = false;
  bool task = false;
  Date committed_time;
  Date authored_time;
  Date created_date;
  Date updated_date;
};

const std::array<std::string_view, 12>& feature_names();

PairFeatures assemble_features(const Issue& issue, const Commit& commit);

inline constexpr std::size_t kDefaultIdentityBuckets = 16;

/// [bug, feature, task] ++ [closed, resolved] ++ hashed one-hot buckets for
/// creator, author and committer. Length is 5 + 3 * identity_buckets.
std::vector<double> one_hot_encode(const Issue& issue, const Commit& commit,
                                   std::size_t identity_buckets = kDefaultIdentityBuckets);

std::size_t one_hot_length(std::size_t identity_buckets = kDefaultIdentityBuckets);

}  // namespace linkkit
