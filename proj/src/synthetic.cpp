#include "linkkit/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "linkkit/preprocess.hpp"
#include "linkkit/random.hpp"

namespace linkkit {

namespace {

const Date kEpoch(2019, 1, 1);

constexpr const char* kSyllables[] = {"ka", "lo", "mi", "ra", "te", "su", "no", "vi", "pe", "da",
                                      "xo", "ge", "fu", "ba", "zi", "qu", "ly", "or", "en", "ax"};

std::string pseudo_word(Rng& rng, std::size_t syllables = 3) {
  std::string w;
  for (std::size_t k = 0; k < syllables; ++k) w += kSyllables[uniform_index(rng, std::size(kSyllables))];
  return w;
}

/// Distinct pseudo-words not already in `taken`.
std::vector<std::string> fresh_words(Rng& rng, std::size_t n, std::set<std::string>& taken, std::size_t syllables = 3) {
  std::vector<std::string> out;
  while (out.size() < n) {
    std::string w = pseudo_word(rng, syllables);
    if (is_stop_word(w) || !taken.insert(w).second) continue;
    out.push_back(std::move(w));
  }
  return out;
}

template <typename T>
const T& pick(Rng& rng, const std::vector<T>& v) {
  return v[uniform_index(rng, v.size())];
}

std::string join(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) out += (out.empty() ? "" : " ") + w;
  return out;
}

std::string make_sha(std::uint64_t project_seed, std::uint64_t k) {
  // 40 hex digits, unique per (project, k).
  char buf[41];
  std::snprintf(buf, sizeof buf, "%08llx%016llx%016llx", static_cast<unsigned long long>(project_seed & 0xffffffffULL),
                static_cast<unsigned long long>(k * 0x9E3779B97F4A7C15ULL),
                static_cast<unsigned long long>((k + 1) * 0xC2B2AE3D27D4EB4FULL ^ project_seed));
  return buf;
}

double exponential(Rng& rng, double rate) {
  double u = uniform_unit(rng);
  while (u <= 0.0) u = uniform_unit(rng);
  return -std::log(u) / rate;
}

Issue make_issue(const std::string& id, std::string title, std::string description, const std::string& type_raw,
                 const std::string& creator, Date created, Date updated) {
  Issue i;
  i.issue_id = id;
  i.title = std::move(title);
  i.description = std::move(description);
  i.type_raw = type_raw;
  i.type_norm = normalize_issue_type(type_raw);
  i.creator = creator;
  i.created_date = created;
  i.updated_date = updated;
  i.source = IssueSource::github;
  return i;
}

Commit make_commit(std::string sha, std::string message, const std::string& author, const std::string& committer,
                   Date authored, Date committed) {
  Commit c;
  c.sha = std::move(sha);
  c.message = std::move(message);
  c.author = author;
  c.committer = committer;
  c.authored_date = authored;
  c.committed_date = committed;
  c.status_raw = "closed";
  c.status_norm = CommitStatus::closed;
  return c;
}

const std::vector<std::string> kTypes = {"Bug", "New Feature", "Task", "Improvement", "Bug", "Enhancement"};
const std::vector<std::string> kFiller = {"update", "handle", "error",   "issue",   "problem",
                                          "support", "config", "option", "display", "output"};
const std::vector<std::string> kVerbs = {"fix", "refactor", "improve", "cleanup", "add"};

}  // namespace

Corpus project_fixture(const std::string& project, std::uint64_t seed, const ProjectFixtureOptions& o) {
  Rng rng(seed);
  Corpus corpus;
  corpus.project = project;

  std::vector<std::string> devs, users;
  for (std::size_t k = 0; k < 10; ++k) devs.push_back(project + "-dev" + std::to_string(k));
  for (std::size_t k = 0; k < 40; ++k) users.push_back(project + "-user" + std::to_string(k));

  struct Topic {
    std::vector<std::string> issue_words, commit_words;
    double center;
  };
  std::set<std::string> taken(kFiller.begin(), kFiller.end());
  taken.insert(kVerbs.begin(), kVerbs.end());
  std::vector<Topic> topics;
  for (std::size_t t = 0; t < o.n_topics; ++t) {
    Topic tp;
    tp.issue_words = fresh_words(rng, 3, taken);
    tp.commit_words = fresh_words(rng, 3, taken);
    tp.center = uniform_unit(rng) * static_cast<double>(o.days);
    topics.push_back(std::move(tp));
  }
  const double width = static_cast<double>(o.days) / 6.0;
  auto pick_topic = [&](double day) {
    std::vector<double> w;
    double total = 0.0;
    for (const Topic& tp : topics) {
      const double z = (day - tp.center) / width;
      w.push_back(std::exp(-z * z));
      total += w.back();
    }
    double u = uniform_unit(rng) * total;
    for (std::size_t t = 0; t < w.size(); ++t) {
      if (u < w[t]) return t;
      u -= w[t];
    }
    return w.size() - 1;
  };
  auto two_of = [&](const std::vector<std::string>& v) {
    return sample_without_replacement(v, 2, rng);
  };

  std::uint64_t sha_counter = 0;
  for (std::size_t i = 0; i < o.n_issues; ++i) {
    const std::size_t day = i * o.days / o.n_issues;
    const Topic& tp = topics[pick_topic(static_cast<double>(day))];
    std::vector<std::string> title = two_of(tp.issue_words);
    for (auto& w : two_of(kFiller)) title.push_back(w);
    if (uniform_unit(rng) < 0.3) title.push_back(pick(rng, topics[uniform_index(rng, topics.size())].issue_words));
    shuffle_in_place(title, rng);
    const bool by_dev = uniform_unit(rng) < 0.6;
    const std::string creator = by_dev ? pick(rng, devs) : pick(rng, users);
    const std::string id = "#" + std::to_string(i + 1);
    const Date created = kEpoch.plus_days(static_cast<long>(day));
    const Date updated = created.plus_days(static_cast<long>(uniform_index(rng, 30)));
    std::vector<std::string> desc = two_of(tp.issue_words);
    desc.push_back(pick(rng, kFiller));
    corpus.issues.push_back(make_issue(id, join(title), "When " + join(desc) + " happens.", pick(rng, kTypes), creator,
                                       created, updated));

    if (uniform_unit(rng) < o.link_rate) {
      const long lag = std::min<long>(static_cast<long>(exponential(rng, 0.6)), 6);
      const std::string author = by_dev && uniform_unit(rng) < 0.8 ? creator : pick(rng, devs);
      std::vector<std::string> msg = two_of(tp.commit_words);
      for (auto& w : two_of(kFiller)) msg.push_back(w);
      if (uniform_unit(rng) < 0.6) msg.push_back(pick(rng, title));
      shuffle_in_place(msg, rng);
      msg.insert(msg.begin(), pick(rng, kVerbs));
      const std::size_t form = uniform_index(rng, 3);
      msg.push_back(form == 0 ? "closes " + id : form == 1 ? "(" + id + ")" : "fixes " + id);
      const Date authored = created.plus_days(lag);
      corpus.commits.push_back(make_commit(make_sha(seed, sha_counter++), join(msg), author, author, authored,
                                           authored.plus_days(static_cast<long>(uniform_index(rng, 2)))));
    }
  }
  for (std::size_t j = 0; j < o.n_background_commits; ++j) {
    const std::size_t day = uniform_index(rng, o.days);
    const Topic& tp = topics[pick_topic(static_cast<double>(day))];
    std::vector<std::string> msg = two_of(tp.commit_words);
    for (auto& w : two_of(kFiller)) msg.push_back(w);
    shuffle_in_place(msg, rng);
    msg.insert(msg.begin(), pick(rng, kVerbs));
    // References to pull requests, which are not issues of this corpus.
    const std::size_t form = uniform_index(rng, 3);
    const std::string pr = "#" + std::to_string(100000 + sha_counter);
    if (form == 0) msg.push_back("(" + pr + ")");
    if (form == 1) msg.push_back("closes " + pr);
    const std::string author = pick(rng, devs);
    const Date authored = kEpoch.plus_days(static_cast<long>(day));
    corpus.commits.push_back(make_commit(make_sha(seed, sha_counter++), join(msg), author, author, authored, authored));
  }
  return corpus;
}

std::vector<Corpus> shared_token_corpora(std::uint64_t seed, const SharedTokenOptions& o) {
  Rng rng(seed);
  std::set<std::string> taken(kFiller.begin(), kFiller.end());
  // The pool is drawn once; each project uses every pool token once.
  std::vector<std::string> pool = fresh_words(rng, o.issues_per_project, taken, 4);
  // Filler vocabularies are shared too, so projects differ only in who writes what.
  const std::vector<std::string> issue_vocab = fresh_words(rng, 40, taken);
  const std::vector<std::string> commit_vocab = fresh_words(rng, 40, taken);
  std::vector<Corpus> out;
  for (std::size_t p = 0; p < o.n_projects; ++p) {
    Corpus c;
    c.project = "shared" + std::to_string(p);
    std::vector<std::string> devs;
    for (std::size_t k = 0; k < 8; ++k) devs.push_back(c.project + "-dev" + std::to_string(k));
    std::vector<std::string> tokens = pool;
    shuffle_in_place(tokens, rng);
    for (std::size_t i = 0; i < o.issues_per_project; ++i) {
      const std::string id = "#" + std::to_string(i + 1);
      const Date created = kEpoch.plus_days(static_cast<long>(i * o.days / o.issues_per_project));
      std::vector<std::string> title = sample_without_replacement(issue_vocab, 3, rng);
      title.push_back(tokens[i]);
      shuffle_in_place(title, rng);
      const std::string creator = pick(rng, devs);
      c.issues.push_back(make_issue(id, join(title), "", pick(rng, kTypes), creator, created,
                                    created.plus_days(static_cast<long>(uniform_index(rng, 10)))));
      std::vector<std::string> msg = sample_without_replacement(commit_vocab, 3, rng);
      msg.push_back(tokens[i]);
      shuffle_in_place(msg, rng);
      std::string author;
      do {
        author = pick(rng, devs);
      } while (author == creator);
      const Date authored = created.plus_days(static_cast<long>(uniform_index(rng, 3)));
      c.commits.push_back(
          make_commit(make_sha(seed * 131 + p, i), join(msg) + " closes " + id, author, author, authored, authored));
    }
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace linkkit
