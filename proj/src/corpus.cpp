#include "linkkit/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <set>
#include <sstream>

#include "json_util.hpp"
#include "linkkit/error.hpp"
#include "linkkit/hash.hpp"

namespace linkkit {

using detail::FieldReader;
using detail::Json;

std::string_view to_string(IssueType v) {
  switch (v) {
    case IssueType::task: return "task";
    case IssueType::feature: return "feature";
    case IssueType::bug: return "bug";
  }
  return "task";
}

std::string_view to_string(CommitStatus v) {
  return v == CommitStatus::resolved ? "resolved" : "closed";
}

std::string_view to_string(IssueSource v) { return v == IssueSource::jira ? "jira" : "github"; }

std::string_view to_string(Label v) { return v == Label::true_link ? "true_link" : "false_link"; }

std::string_view to_string(ProvenanceMethod v) {
  return v == ProvenanceMethod::id_reference ? "id_reference" : "negative_sample";
}

IssueType parse_issue_type(std::string_view s) {
  if (s == "task") return IssueType::task;
  if (s == "feature") return IssueType::feature;
  if (s == "bug") return IssueType::bug;
  throw DataError("unknown issue type '" + std::string(s) + "'");
}

CommitStatus parse_commit_status(std::string_view s) {
  if (s == "closed") return CommitStatus::closed;
  if (s == "resolved") return CommitStatus::resolved;
  throw DataError("unknown commit status '" + std::string(s) + "'");
}

IssueSource parse_issue_source(std::string_view s) {
  if (s == "jira") return IssueSource::jira;
  if (s == "github") return IssueSource::github;
  throw DataError("unknown issue source '" + std::string(s) + "'");
}

Label parse_label(std::string_view s) {
  if (s == "true_link") return Label::true_link;
  if (s == "false_link") return Label::false_link;
  throw DataError("unknown label '" + std::string(s) + "'");
}

ProvenanceMethod parse_provenance_method(std::string_view s) {
  if (s == "id_reference") return ProvenanceMethod::id_reference;
  if (s == "negative_sample") return ProvenanceMethod::negative_sample;
  throw DataError("unknown provenance method '" + std::string(s) + "'");
}

const Issue& ProjectDataset::issue(const std::string& id) const {
  auto it = issues.find(id);
  if (it == issues.end()) throw DataError("dataset '" + project + "' has no issue '" + id + "'");
  return it->second;
}

const Commit& ProjectDataset::commit(const std::string& sha) const {
  auto it = commits.find(sha);
  if (it == commits.end()) throw DataError("dataset '" + project + "' has no commit '" + sha + "'");
  return it->second;
}

namespace {

bool is_id_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

}  // namespace

bool mentions_issue_id(std::string_view message, std::string_view issue_id) {
  if (issue_id.empty()) return false;
  std::size_t pos = 0;
  while ((pos = message.find(issue_id, pos)) != std::string_view::npos) {
    const bool left_ok = pos == 0 || !is_id_char(issue_id.front()) || !is_id_char(message[pos - 1]);
    const std::size_t end = pos + issue_id.size();
    const bool right_ok = end == message.size() || !is_id_char(message[end]);
    if (left_ok && right_ok) return true;
    ++pos;
  }
  return false;
}

void validate_issue(const Issue& issue) {
  if (issue.issue_id.empty()) throw DataError("issue with empty issue_id");
  if (issue.created_date > issue.updated_date) {
    throw DataError("issue " + issue.issue_id + ": created_date " + issue.created_date.to_string() +
                    " is after updated_date " + issue.updated_date.to_string());
  }
}

void validate_commit(const Commit& commit) {
  if (commit.sha.empty()) throw DataError("commit with empty sha");
  if (commit.authored_date > commit.committed_date) {
    throw DataError("commit " + commit.sha + ": authored_date " + commit.authored_date.to_string() +
                    " is after committed_date " + commit.committed_date.to_string());
  }
}

void validate_dataset(const ProjectDataset& d) {
  if (d.project.empty()) throw DataError("dataset has no project name");
  std::set<PairId> seen;
  std::size_t n_true = 0, n_false = 0;
  for (const LinkPair& p : d.pairs) {
    const std::string where = "pair " + p.id().to_string() + ": ";
    if (!seen.insert(p.id()).second) throw DataError(where + "duplicate pair");
    auto ii = d.issues.find(p.issue_id);
    if (ii == d.issues.end()) throw DataError(where + "issue record missing");
    auto ci = d.commits.find(p.commit_sha);
    if (ci == d.commits.end()) throw DataError(where + "commit record missing");
    const Issue& issue = ii->second;
    const Commit& commit = ci->second;
    try {
      validate_issue(issue);
      validate_commit(commit);
    } catch (const DataError& e) {
      throw DataError(where + e.what());
    }
    if (p.pair_date != commit.authored_date) {
      throw DataError(where + "pair_date differs from the commit's authored_date");
    }
    if (p.label == Label::true_link) {
      ++n_true;
      if (p.provenance.method != ProvenanceMethod::id_reference) {
        throw DataError(where + "true_link must come from an id_reference");
      }
    } else {
      ++n_false;
      if (p.provenance.method != ProvenanceMethod::negative_sample) {
        throw DataError(where + "false_link must come from a negative_sample");
      }
      const long gap = days_between(issue.created_date, commit.authored_date);
      if (std::abs(gap) > d.manifest.window_days) {
        throw DataError(where + "false_link outside the " + std::to_string(d.manifest.window_days) +
                        "-day window (" + std::to_string(gap) + " days)");
      }
      if (trim(commit.author) == trim(issue.creator)) {
        throw DataError(where + "false_link commit author is the issue creator");
      }
      if (mentions_issue_id(commit.message, issue.issue_id)) {
        throw DataError(where + "false_link commit references the issue");
      }
    }
  }
  if (n_true != d.manifest.n_true || n_false != d.manifest.n_false) {
    throw DataError("manifest counts (n_true=" + std::to_string(d.manifest.n_true) +
                    ", n_false=" + std::to_string(d.manifest.n_false) + ") do not match pairs (" +
                    std::to_string(n_true) + " true, " + std::to_string(n_false) + " false)");
  }
  if (!d.manifest.imbalanced && n_true != n_false) {
    throw DataError("dataset is unbalanced but the manifest does not flag an imbalance");
  }
}

namespace {

Json issue_body(const Issue& i) {
  Json j;
  j["title"] = i.title;
  j["description"] = i.description;
  j["type_raw"] = i.type_raw;
  j["type_norm"] = to_string(i.type_norm);
  j["creator"] = i.creator;
  j["created_date"] = i.created_date.to_string();
  j["updated_date"] = i.updated_date.to_string();
  j["source"] = to_string(i.source);
  return j;
}

Json commit_body(const Commit& c) {
  Json j;
  j["message"] = c.message;
  j["author"] = c.author;
  j["committer"] = c.committer;
  j["authored_date"] = c.authored_date.to_string();
  j["committed_date"] = c.committed_date.to_string();
  j["status_raw"] = c.status_raw;
  j["status_norm"] = to_string(c.status_norm);
  if (c.diff_text) j["diff_text"] = *c.diff_text;
  return j;
}

Issue read_issue_body(const FieldReader& r, std::string id) {
  Issue i;
  i.issue_id = std::move(id);
  i.title = r.string("title");
  i.description = r.string("description");
  i.type_raw = r.string("type_raw");
  i.type_norm = r.parse("type_norm", parse_issue_type);
  i.creator = r.string("creator");
  i.created_date = r.parse("created_date", Date::parse);
  i.updated_date = r.parse("updated_date", Date::parse);
  i.source = r.parse("source", parse_issue_source);
  return i;
}

Commit read_commit_body(const FieldReader& r, std::string sha) {
  Commit c;
  c.sha = std::move(sha);
  c.message = r.string("message");
  c.author = r.string("author");
  c.committer = r.string("committer");
  c.authored_date = r.parse("authored_date", Date::parse);
  c.committed_date = r.parse("committed_date", Date::parse);
  c.status_raw = r.string("status_raw");
  c.status_norm = r.parse("status_norm", parse_commit_status);
  c.diff_text = r.optional_string("diff_text");
  return c;
}

Json pair_record(const ProjectDataset& d, const LinkPair& p) {
  Json j;
  j["issue_id"] = p.issue_id;
  j["commit_sha"] = p.commit_sha;
  j["label"] = to_string(p.label);
  j["pair_date"] = p.pair_date.to_string();
  j["issue"] = issue_body(d.issue(p.issue_id));
  j["commit"] = commit_body(d.commit(p.commit_sha));
  Json prov;
  prov["method"] = to_string(p.provenance.method);
  prov["pattern"] = p.provenance.pattern ? Json(*p.provenance.pattern) : Json(nullptr);
  prov["seed"] = p.provenance.seed ? Json(*p.provenance.seed) : Json(nullptr);
  j["provenance"] = prov;
  return j;
}

Json manifest_record(const ProjectDataset& d) {
  const DatasetManifest& m = d.manifest;
  Json j;
  j["project"] = d.project;
  j["n_true"] = m.n_true;
  j["n_false"] = m.n_false;
  j["window_days"] = m.window_days;
  j["seed"] = m.seed;
  j["built_at"] = m.built_at;
  Json counts = Json::object();
  for (const auto& [k, v] : m.source_counts) counts[k] = v;
  j["source_counts"] = counts;
  j["stop_words_version"] = m.stop_words_version;
  j["imbalanced"] = m.imbalanced;
  return j;
}

}  // namespace

std::filesystem::path manifest_path_for(const std::filesystem::path& dataset_path) {
  return dataset_path.parent_path() / (dataset_path.stem().string() + ".manifest.json");
}

void write_dataset(const ProjectDataset& dataset, const std::filesystem::path& path) {
  validate_dataset(dataset);
  std::string body;
  for (const LinkPair& p : dataset.pairs) {
    body += detail::dump_compact(pair_record(dataset, p));
    body += '\n';
  }
  detail::write_text_file(path, body);
  detail::write_text_file(manifest_path_for(path), detail::dump_pretty(manifest_record(dataset)));
}

ProjectDataset read_dataset(const std::filesystem::path& path) {
  const std::filesystem::path mpath = manifest_path_for(path);
  const Json mj = detail::parse_json_file(mpath);
  FieldReader mr(mj, 0, "manifest.");
  ProjectDataset d;
  d.project = mr.string("project");
  d.manifest.n_true = static_cast<std::size_t>(mr.integer("n_true"));
  d.manifest.n_false = static_cast<std::size_t>(mr.integer("n_false"));
  d.manifest.window_days = static_cast<int>(mr.integer("window_days"));
  d.manifest.seed = mr.integer("seed");
  d.manifest.built_at = mr.string("built_at");
  if (mj.contains("source_counts")) {
    for (const auto& [k, v] : mj.at("source_counts").items()) {
      d.manifest.source_counts[k] = v.get<std::size_t>();
    }
  }
  if (mj.contains("stop_words_version")) d.manifest.stop_words_version = mr.string("stop_words_version");
  if (mj.contains("imbalanced")) d.manifest.imbalanced = mj.at("imbalanced").get<bool>();

  std::istringstream in(detail::read_text_file(path));
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::parse_error& e) {
      throw SchemaError(lineno, "<record>", std::string("malformed JSON: ") + e.what());
    }
    FieldReader r(j, lineno);
    LinkPair p;
    p.issue_id = r.string("issue_id");
    p.commit_sha = r.string("commit_sha");
    p.label = r.parse("label", parse_label);
    p.pair_date = r.parse("pair_date", Date::parse);
    Issue issue = read_issue_body(r.object("issue"), p.issue_id);
    Commit commit = read_commit_body(r.object("commit"), p.commit_sha);
    FieldReader pr = r.object("provenance");
    p.provenance.method = pr.parse("method", parse_provenance_method);
    p.provenance.pattern = pr.optional_string("pattern");
    p.provenance.seed = pr.optional_integer("seed");

    auto [iit, inew] = d.issues.emplace(issue.issue_id, issue);
    if (!inew && iit->second != issue) throw SchemaError(lineno, "issue", "conflicts with an earlier record");
    auto [cit, cnew] = d.commits.emplace(commit.sha, commit);
    if (!cnew && cit->second != commit) throw SchemaError(lineno, "commit", "conflicts with an earlier record");
    d.pairs.push_back(std::move(p));
  }
  validate_dataset(d);
  return d;
}

void write_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  Json j;
  j["project"] = corpus.project;
  Json issues = Json::array();
  for (const Issue& i : corpus.issues) {
    Json rec;
    rec["issue_id"] = i.issue_id;
    rec.update(issue_body(i));
    issues.push_back(std::move(rec));
  }
  Json commits = Json::array();
  for (const Commit& c : corpus.commits) {
    Json rec;
    rec["sha"] = c.sha;
    rec.update(commit_body(c));
    commits.push_back(std::move(rec));
  }
  j["issues"] = std::move(issues);
  j["commits"] = std::move(commits);
  detail::write_text_file(path, detail::dump_pretty(j));
}

Corpus read_corpus(const std::filesystem::path& path) {
  const Json j = detail::parse_json_file(path);
  FieldReader r(j, 0);
  Corpus c;
  c.project = r.string("project");
  std::size_t idx = 0;
  for (const Json& rec : r.at("issues")) {
    FieldReader ir(rec, ++idx, "issues.");
    c.issues.push_back(read_issue_body(ir, ir.string("issue_id")));
  }
  idx = 0;
  for (const Json& rec : r.at("commits")) {
    FieldReader cr(rec, ++idx, "commits.");
    c.commits.push_back(read_commit_body(cr, cr.string("sha")));
  }
  return c;
}

std::string pairs_fingerprint(std::string_view project, std::span<const LinkPair> pairs) {
  std::vector<std::string> rows;
  rows.reserve(pairs.size());
  for (const LinkPair& p : pairs) {
    rows.push_back(std::string(project) + '\t' + p.issue_id + '\t' + p.commit_sha + '\t' +
                   std::string(to_string(p.label)));
  }
  std::sort(rows.begin(), rows.end());
  std::string joined;
  for (const auto& r : rows) joined += r + '\n';
  return sha256_hex(joined);
}

}  // namespace linkkit
