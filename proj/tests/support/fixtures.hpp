#pragma once

// Small corpora and brute-force oracles shared by unit and acceptance tests.

#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "linkkit/corpus.hpp"
#include "linkkit/evaluation.hpp"
#include "linkkit/ingestion.hpp"
#include "linkkit/random.hpp"

namespace fixtures {

using namespace linkkit;

inline Issue issue(std::string id, std::string title, std::string creator, Date created,
                   std::string type_raw = "Bug") {
  Issue i;
  i.issue_id = std::move(id);
  i.title = std::move(title);
  i.description = "Steps to reproduce are in the attached log.";
  i.type_raw = std::move(type_raw);
  i.type_norm = i.type_raw == "Bug" ? IssueType::bug : i.type_raw == "Task" ? IssueType::task : IssueType::feature;
  i.creator = std::move(creator);
  i.created_date = created;
  i.updated_date = created.plus_days(2);
  i.source = IssueSource::github;
  return i;
}

inline Commit commit(std::string sha, std::string message, std::string author, Date authored) {
  Commit c;
  c.sha = std::move(sha);
  c.message = std::move(message);
  c.author = author;
  c.committer = std::move(author);
  c.authored_date = authored;
  c.committed_date = authored.plus_days(1);
  c.status_raw = "closed";
  c.status_norm = CommitStatus::closed;
  return c;
}

inline std::string sha_of(int k) {
  std::string s = std::to_string(k);
  return std::string(40 - s.size(), '0') + s;
}

/// Four issues and six commits: three explicit links, one commit that
/// mentions an issue without linking keywords, the rest unrelated.
inline Corpus tiny_corpus() {
  const Date d0(2021, 3, 1);
  Corpus c;
  c.project = "tiny";
  c.issues = {
      issue("#1", "Crash when opening the settings dialog", "alice", d0),
      issue("#2", "Add dark mode to the editor", "bob", d0.plus_days(1), "New Feature"),
      issue("#3", "Slow startup on large projects", "carol", d0.plus_days(3), "Task"),
      issue("#4", "Typo in the README", "dave", d0.plus_days(20)),
  };
  c.commits = {
      commit(sha_of(1), "Fix settings dialog crash, closes #1", "bob", d0.plus_days(1)),
      commit(sha_of(2), "Implement dark mode (#2)", "carol", d0.plus_days(4)),
      commit(sha_of(3), "Cache the project index to speed up startup. Fixes #3", "alice", d0.plus_days(5)),
      commit(sha_of(4), "Bump dependencies", "erin", d0.plus_days(2)),
      commit(sha_of(5), "Refactor dialog layout", "alice", d0.plus_days(3)),
      commit(sha_of(6), "Update CI matrix", "frank", d0.plus_days(40)),
  };
  return c;
}

/// Random GitHub-style corpus with at most `max_artifacts` issues + commits,
/// dates over `span_days`, a small author pool (so author == creator
/// happens) and a mix of linking and non-linking references.
inline Corpus random_corpus(std::uint64_t seed, std::size_t max_artifacts = 200, int span_days = 60) {
  Rng rng(seed);
  Corpus c;
  c.project = "rand" + std::to_string(seed);
  const std::vector<std::string> people = {"ann", "ben", " ann", "cid", "dee", "eve "};
  const std::size_t n_issues = 1 + uniform_index(rng, max_artifacts / 2 - 1);
  const std::size_t n_commits = 1 + uniform_index(rng, max_artifacts - n_issues - 1);
  const Date d0(2020, 1, 1);
  for (std::size_t i = 0; i < n_issues; ++i) {
    c.issues.push_back(issue("#" + std::to_string(i + 1), "issue number " + std::to_string(i + 1),
                             people[uniform_index(rng, people.size())],
                             d0.plus_days(static_cast<long>(uniform_index(rng, static_cast<std::uint64_t>(span_days))))));
  }
  for (std::size_t k = 0; k < n_commits; ++k) {
    std::string msg = "change " + std::to_string(k);
    const auto ref = std::to_string(1 + uniform_index(rng, n_issues + 3));
    switch (uniform_index(rng, 5)) {
      case 0: msg += " closes #" + ref; break;
      case 1: msg += " (#" + ref + ")"; break;
      case 2: msg += " see issue " + ref; break;
      default: break;
    }
    c.commits.push_back(commit(sha_of(static_cast<int>(k + 1)), msg, people[uniform_index(rng, people.size())],
                               d0.plus_days(static_cast<long>(uniform_index(rng, static_cast<std::uint64_t>(span_days))))));
  }
  return c;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

/// Direct enumeration of the false-link constraints over issues x commits.
inline std::set<PairId> brute_force_candidates(const Corpus& c, const std::vector<LinkPair>& true_links,
                                               const LinkPatterns& patterns, int window_days) {
  std::set<PairId> linked;
  for (const auto& p : true_links) linked.insert(p.id());
  std::set<PairId> out;
  for (const Issue& i : c.issues) {
    for (const Commit& k : c.commits) {
      const long gap = days_between(i.created_date, k.authored_date);
      if (gap > window_days || gap < -window_days) continue;
      if (linked.count({i.issue_id, k.sha})) continue;
      if (patterns.references_issue(k.message, i.issue_id)) continue;
      if (mentions_issue_id(k.message, i.issue_id)) continue;
      if (trim(i.creator) == trim(k.author)) continue;
      out.insert({i.issue_id, k.sha});
    }
  }
  return out;
}

inline ConfusionCounts brute_force_counts(const std::vector<Label>& truth, const std::vector<Label>& pred) {
  ConfusionCounts c;
  for (std::size_t k = 0; k < truth.size(); ++k) {
    const bool t = truth[k] == Label::true_link;
    const bool p = pred[k] == Label::true_link;
    if (t && p) ++c.tp;
    if (!t && p) ++c.fp;
    if (!t && !p) ++c.tn;
    if (t && !p) ++c.fn;
  }
  return c;
}

/// Dated pairs with `n` entries over `distinct_dates` days, half true.
inline ProjectDataset dated_dataset(std::size_t n, std::size_t distinct_dates, std::uint64_t seed) {
  Rng rng(seed);
  ProjectDataset ds;
  ds.project = "dated";
  const Date d0(2019, 6, 1);
  for (std::size_t k = 0; k < n; ++k) {
    const Date d = d0.plus_days(static_cast<long>(k % distinct_dates));
    const std::string id = "#" + std::to_string(k + 1);
    Issue is = issue(id, "issue " + std::to_string(k), "ann", d);
    Commit cm = commit(sha_of(static_cast<int>(k + 1)), "work", "ben", d);
    ds.issues[id] = is;
    ds.commits[cm.sha] = cm;
    LinkPair p;
    p.issue_id = id;
    p.commit_sha = cm.sha;
    p.label = k % 2 == 0 ? Label::true_link : Label::false_link;
    p.pair_date = d;
    if (p.label == Label::true_link) {
      p.provenance = {ProvenanceMethod::id_reference, std::string("github_keyword"), std::nullopt};
    } else {
      p.provenance = {ProvenanceMethod::negative_sample, std::nullopt, 0};
    }
    ds.pairs.push_back(p);
  }
  // Shuffle the stored order so splits cannot rely on it.
  shuffle_in_place(ds.pairs, rng);
  std::sort(ds.pairs.begin(), ds.pairs.end(), [](const LinkPair& a, const LinkPair& b) { return a.id() < b.id(); });
  ds.manifest.n_true = (n + 1) / 2;
  ds.manifest.n_false = n / 2;
  ds.manifest.built_at = "2024-01-01T00:00:00Z";
  ds.manifest.source_counts["github"] = n;
  ds.manifest.stop_words_version = "linkkit-en-1";
  return ds;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("linkkit-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace fixtures
