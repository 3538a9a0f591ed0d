#pragma once

// Domain records shared by every stage of the pipeline, plus their on-disk
// persistence (JSON-Lines dataset + sibling manifest, raw corpus JSON).

#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "linkkit/date.hpp"

namespace linkkit {

enum class IssueType { task, feature, bug };
enum class CommitStatus { closed, resolved };
enum class IssueSource { jira, github };
/// Ordered so that false_link < true_link.
enum class Label { false_link, true_link };
enum class ProvenanceMethod { id_reference, negative_sample };

std::string_view to_string(IssueType v);
std::string_view to_string(CommitStatus v);
std::string_view to_string(IssueSource v);
std::string_view to_string(Label v);
std::string_view to_string(ProvenanceMethod v);

IssueType parse_issue_type(std::string_view s);
CommitStatus parse_commit_status(std::string_view s);
IssueSource parse_issue_source(std::string_view s);
Label parse_label(std::string_view s);
ProvenanceMethod parse_provenance_method(std::string_view s);

struct Issue {
  std::string issue_id;
  std::string title;
  std::string description;
  std::string type_raw;
  IssueType type_norm = IssueType::task;
  std::string creator;
  Date created_date;
  Date updated_date;
  IssueSource source = IssueSource::github;

  friend bool operator==(const Issue&, const Issue&) = default;
};

struct Commit {
  std::string sha;
  std::string message;
  std::string author;
  std::string committer;
  Date authored_date;
  Date committed_date;
  std::string status_raw;
  CommitStatus status_norm = CommitStatus::closed;
  /// Kept for completeness; never part of model input.
  std::optional<std::string> diff_text;

  friend bool operator==(const Commit&, const Commit&) = default;
};

struct Provenance {
  ProvenanceMethod method = ProvenanceMethod::id_reference;
  std::optional<std::string> pattern;
  std::optional<std::int64_t> seed;

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

/// Identity of a pair within one project.
struct PairId {
  std::string issue_id;
  std::string commit_sha;

  std::string to_string() const { return issue_id + ":" + commit_sha; }
  friend auto operator<=>(const PairId&, const PairId&) = default;
};

struct LinkPair {
  std::string issue_id;
  std::string commit_sha;
  Label label = Label::false_link;
  /// Ordering key for temporal splits: the commit's authored date.
  Date pair_date;
  Provenance provenance;

  PairId id() const { return {issue_id, commit_sha}; }
  friend bool operator==(const LinkPair&, const LinkPair&) = default;
};

struct DatasetManifest {
  std::size_t n_true = 0;
  std::size_t n_false = 0;
  int window_days = 7;
  std::int64_t seed = 0;
  std::string built_at;
  std::map<std::string, std::size_t> source_counts;
  std::string stop_words_version;
  /// Set when the candidate pool was smaller than the number of true links.
  bool imbalanced = false;

  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

/// Balanced, labeled pairs for one project, with the issue and commit
/// records every pair refers to. Immutable once built.
struct ProjectDataset {
  std::string project;
  std::vector<LinkPair> pairs;
  DatasetManifest manifest;
  std::map<std::string, Issue> issues;
  std::map<std::string, Commit> commits;

  const Issue& issue(const std::string& id) const;
  const Commit& commit(const std::string& sha) const;

  friend bool operator==(const ProjectDataset&, const ProjectDataset&) = default;
};

/// Raw, unlabeled artifacts of one project as fetched from the ITS and VCS.
struct Corpus {
  std::string project;
  std::vector<Issue> issues;
  std::vector<Commit> commits;

  friend bool operator==(const Corpus&, const Corpus&) = default;
};

/// True when `message` mentions `issue_id` as a whole token (not as a prefix
/// of a longer id such as PROJ-12 inside PROJ-123).
bool mentions_issue_id(std::string_view message, std::string_view issue_id);

void validate_issue(const Issue& issue);
void validate_commit(const Commit& commit);

/// Checks every dataset invariant and throws DataError naming the first
/// violating pair.
void validate_dataset(const ProjectDataset& dataset);

std::filesystem::path manifest_path_for(const std::filesystem::path& dataset_path);

void write_dataset(const ProjectDataset& dataset, const std::filesystem::path& path);
ProjectDataset read_dataset(const std::filesystem::path& path);

void write_corpus(const Corpus& corpus, const std::filesystem::path& path);
Corpus read_corpus(const std::filesystem::path& path);

/// Order-independent SHA-256 over (project, issue_id, commit_sha, label).
std::string pairs_fingerprint(std::string_view project, std::span<const LinkPair> pairs);

}  // namespace linkkit
