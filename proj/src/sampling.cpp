#include "linkkit/sampling.hpp"

#include <algorithm>
#include <cctype>
#include <ctime>
#include <map>

#include "linkkit/error.hpp"
#include "linkkit/log.hpp"
#include "linkkit/preprocess.hpp"
#include "linkkit/random.hpp"

namespace linkkit {

namespace {

std::string_view trimmed(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace

void SamplingConfig::validate() const {
  if (window_days < 0) throw UsageError("window_days must be >= 0");
}

bool same_identity(std::string_view a, std::string_view b) { return trimmed(a) == trimmed(b); }

std::set<PairId> candidate_false_pairs(std::span<const Issue> issues, std::span<const Commit> commits,
                                       std::span<const LinkPair> true_links, const LinkPatterns& patterns,
                                       const SamplingConfig& cfg) {
  cfg.validate();
  std::set<PairId> linked;
  for (const LinkPair& p : true_links) linked.insert(p.id());

  // Reference sets once per commit instead of once per pair.
  std::vector<std::set<std::string>> refs(commits.size());
  for (std::size_t c = 0; c < commits.size(); ++c) {
    for (const auto& m : patterns.references(commits[c].message)) refs[c].insert(m.issue_id);
  }

  std::vector<std::size_t> by_date(commits.size());
  for (std::size_t c = 0; c < commits.size(); ++c) by_date[c] = c;
  std::sort(by_date.begin(), by_date.end(), [&](std::size_t a, std::size_t b) {
    return commits[a].authored_date < commits[b].authored_date;
  });

  std::set<PairId> out;
  for (const Issue& issue : issues) {
    const Date lo = issue.created_date.plus_days(-cfg.window_days);
    const Date hi = issue.created_date.plus_days(cfg.window_days);
    auto first = std::lower_bound(by_date.begin(), by_date.end(), lo, [&](std::size_t c, const Date& d) {
      return commits[c].authored_date < d;
    });
    std::vector<PairId> mine;
    for (auto it = first; it != by_date.end() && commits[*it].authored_date <= hi; ++it) {
      const Commit& commit = commits[*it];
      if (same_identity(commit.author, issue.creator)) continue;
      if (refs[*it].count(issue.issue_id) || mentions_issue_id(commit.message, issue.issue_id)) continue;
      PairId id{issue.issue_id, commit.sha};
      if (linked.count(id)) continue;
      mine.push_back(std::move(id));
    }
    std::sort(mine.begin(), mine.end());
    if (cfg.max_candidates_per_issue && mine.size() > *cfg.max_candidates_per_issue) {
      mine.resize(*cfg.max_candidates_per_issue);
    }
    out.insert(mine.begin(), mine.end());
  }
  return out;
}

SampleResult sample_false_links(const std::set<PairId>& candidates, std::size_t n_true,
                                std::span<const Commit> commits, const SamplingConfig& cfg) {
  std::map<std::string, Date> authored;
  for (const Commit& c : commits) authored.emplace(c.sha, c.authored_date);

  Rng rng(static_cast<std::uint64_t>(cfg.seed));
  const std::vector<PairId> pool(candidates.begin(), candidates.end());
  SampleResult result;
  result.imbalanced = pool.size() < n_true;
  for (PairId& id : sample_without_replacement(pool, n_true, rng)) {
    auto it = authored.find(id.commit_sha);
    if (it == authored.end()) throw DataError("candidate " + id.to_string() + " refers to an unknown commit");
    LinkPair p;
    p.issue_id = std::move(id.issue_id);
    p.commit_sha = std::move(id.commit_sha);
    p.label = Label::false_link;
    p.pair_date = it->second;
    p.provenance.method = ProvenanceMethod::negative_sample;
    p.provenance.seed = cfg.seed;
    result.pairs.push_back(std::move(p));
  }
  return result;
}

std::string utc_timestamp_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

ProjectDataset build_balanced_dataset(const std::string& project, std::span<const Issue> issues,
                                      std::span<const Commit> commits, const LinkPatterns& patterns,
                                      const SamplingConfig& cfg, std::optional<std::string> built_at) {
  if (issues.empty() || commits.empty()) {
    throw DataError("project '" + project + "': corpus needs at least one issue and one commit");
  }
  std::vector<LinkPair> true_links = extract_true_links(issues, commits, patterns);
  if (true_links.empty()) {
    throw DataError("project '" + project + "': no true links found; nothing to learn from");
  }
  const auto candidates = candidate_false_pairs(issues, commits, true_links, patterns, cfg);
  SampleResult sampled = sample_false_links(candidates, true_links.size(), commits, cfg);

  ProjectDataset d;
  d.project = project;
  d.manifest.n_true = true_links.size();
  d.manifest.n_false = sampled.pairs.size();
  d.manifest.window_days = cfg.window_days;
  d.manifest.seed = cfg.seed;
  d.manifest.built_at = built_at ? *built_at : utc_timestamp_now();
  d.manifest.stop_words_version = std::string(kStopWordsVersion);
  d.manifest.imbalanced = sampled.imbalanced;

  d.pairs = std::move(true_links);
  d.pairs.insert(d.pairs.end(), std::make_move_iterator(sampled.pairs.begin()),
                 std::make_move_iterator(sampled.pairs.end()));
  std::sort(d.pairs.begin(), d.pairs.end(), [](const LinkPair& a, const LinkPair& b) { return a.id() < b.id(); });

  std::map<std::string, const Issue*> issue_by_id;
  for (const Issue& i : issues) issue_by_id.emplace(i.issue_id, &i);
  std::map<std::string, const Commit*> commit_by_sha;
  for (const Commit& c : commits) commit_by_sha.emplace(c.sha, &c);
  for (const LinkPair& p : d.pairs) {
    const Issue& issue = *issue_by_id.at(p.issue_id);
    d.issues.emplace(issue.issue_id, issue);
    d.commits.emplace(p.commit_sha, *commit_by_sha.at(p.commit_sha));
    d.manifest.source_counts[std::string(to_string(issue.source))] += 1;
  }
  if (sampled.imbalanced) {
    warn("project '" + project + "': only " + std::to_string(d.manifest.n_false) + " false-link candidates for " +
         std::to_string(d.manifest.n_true) + " true links; dataset is imbalanced");
  }
  validate_dataset(d);
  return d;
}

}  // namespace linkkit
