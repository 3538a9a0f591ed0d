#include "linkkit/ingestion.hpp"

#include <algorithm>
#include <cstdlib>
#include <future>
#include <mutex>
#include <set>
#include <thread>

#include "httplib.h"
#include "json_util.hpp"
#include "linkkit/error.hpp"
#include "linkkit/hash.hpp"
#include "linkkit/log.hpp"
#include "linkkit/preprocess.hpp"

namespace linkkit {

using detail::Json;

void SourceConfig::validate() const {
  if (project.empty()) throw UsageError("source config: 'project' is required");
  if (repo_slug.find('/') == std::string::npos) {
    throw UsageError("source config: 'repo_slug' must look like owner/name");
  }
  if (its == IssueSource::jira && (!jira_base_url || !jira_project_key)) {
    throw UsageError("source config: its=jira requires jira_base_url and jira_project_key");
  }
}

std::string SourceConfig::repo_owner() const { return repo_slug.substr(0, repo_slug.find('/')); }
std::string SourceConfig::repo_name() const { return repo_slug.substr(repo_slug.find('/') + 1); }

Credentials Credentials::from_env() {
  auto env = [](const char* name) {
    const char* v = std::getenv(name);
    return v ? std::string(v) : std::string();
  };
  return {env(kGithubTokenEnv), env(kJiraUserEnv), env(kJiraTokenEnv)};
}

// ---------------------------------------------------------------------------
// Transport

HttplibTransport::HttplibTransport(std::chrono::seconds timeout) : timeout_(timeout) {}

HttpResponse HttplibTransport::send(const HttpRequest& request) {
  const auto scheme_end = request.url.find("://");
  if (scheme_end == std::string::npos) throw NetworkError("malformed URL '" + request.url + "'");
  const auto path_start = request.url.find('/', scheme_end + 3);
  const std::string origin = request.url.substr(0, path_start);
  const std::string path = path_start == std::string::npos ? "/" : request.url.substr(path_start);

  httplib::Client client(origin);
  client.set_connection_timeout(timeout_);
  client.set_read_timeout(timeout_);
  httplib::Headers headers;
  for (const auto& [k, v] : request.headers) headers.emplace(k, v);

  httplib::Result res = request.method == "POST"
                            ? client.Post(path, headers, request.body, "application/json")
                            : client.Get(path, headers);
  if (!res) {
    throw NetworkError("request to " + origin + " failed: " + httplib::to_string(res.error()));
  }
  HttpResponse out;
  out.status = res->status;
  out.body = res->body;
  for (const auto& [k, v] : res->headers) {
    std::string key = k;
    std::transform(key.begin(), key.end(), key.begin(), [](unsigned char c) { return std::tolower(c); });
    out.headers[key] = v;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Cache

ResponseCache::ResponseCache(std::filesystem::path cache_dir, const std::string& project)
    : dir_(std::move(cache_dir) / project) {}

std::string ResponseCache::request_key(const HttpRequest& request) {
  // Credentials live in headers and are deliberately not part of the key.
  return sha256_hex(request.method + "\n" + request.url + "\n" + request.body);
}

std::filesystem::path ResponseCache::path_for(const std::string& key) const { return dir_ / (key + ".json"); }

std::optional<std::string> ResponseCache::load(const std::string& key) const {
  const auto p = path_for(key);
  std::error_code ec;
  if (!std::filesystem::exists(p, ec)) return std::nullopt;
  return detail::read_text_file(p);
}

void ResponseCache::store(const std::string& key, const std::string& body) const {
  detail::write_text_file(path_for(key), body);
}

// ---------------------------------------------------------------------------
// Request execution with cache and bounded retries

namespace {

class Requester {
 public:
  Requester(HttpTransport& transport, ResponseCache cache, const FetchOptions& options, FetchStats* stats,
            std::string auth_env_hint)
      : transport_(transport),
        cache_(std::move(cache)),
        options_(options),
        stats_(stats),
        auth_env_hint_(std::move(auth_env_hint)) {}

  Json fetch(const HttpRequest& request) {
    const std::string key = ResponseCache::request_key(request);
    if (auto cached = cache_.load(key)) {
      count([](FetchStats& s) { ++s.cache_hits; });
      return parse(*cached, request);
    }
    for (int attempt = 0;; ++attempt) {
      std::optional<HttpResponse> resp;
      std::string failure;
      count([](FetchStats& s) { ++s.network_requests; });
      try {
        resp = transport_.send(request);
      } catch (const AuthError&) {
        throw;
      } catch (const NetworkError& e) {
        failure = e.what();
      }
      if (resp) {
        if (resp->status == 401) {
          throw AuthError("authentication rejected by " + request.url + "; check the " + auth_env_hint_ +
                          " environment variable");
        }
        if (resp->status >= 200 && resp->status < 300) {
          Json body = parse(resp->body, request);
          if (!graphql_rate_limited(body)) {
            if (body.contains("errors") && !body.at("errors").empty()) {
              throw NetworkError("API error from " + request.url + ": " + detail::dump_compact(body.at("errors")));
            }
            cache_.store(key, resp->body);
            return body;
          }
          failure = "GraphQL rate limit";
        } else if (is_retryable(*resp)) {
          failure = "HTTP " + std::to_string(resp->status);
        } else {
          throw NetworkError("HTTP " + std::to_string(resp->status) + " from " + request.url + ": " +
                             resp->body.substr(0, 200));
        }
      }
      if (attempt >= options_.max_retries) {
        throw NetworkError("giving up on " + request.url + " after " + std::to_string(options_.max_retries) +
                           " retries (" + failure + ")");
      }
      count([](FetchStats& s) { ++s.retries; });
      backoff(attempt, resp);
    }
  }

 private:
  template <typename F>
  void count(F&& f) {
    if (!stats_) return;
    std::lock_guard lock(mu_);
    f(*stats_);
  }

  static Json parse(const std::string& body, const HttpRequest& request) {
    try {
      return Json::parse(body);
    } catch (const Json::parse_error& e) {
      throw NetworkError("malformed JSON from " + request.url + ": " + e.what());
    }
  }

  static bool graphql_rate_limited(const Json& body) {
    if (!body.is_object() || !body.contains("errors") || !body.at("errors").is_array()) return false;
    for (const Json& e : body.at("errors")) {
      if (e.is_object() && e.value("type", std::string()) == "RATE_LIMITED") return true;
    }
    return false;
  }

  static bool is_retryable(const HttpResponse& r) {
    if (r.status == 429 || r.status == 502 || r.status == 503 || r.status == 504) return true;
    if (r.status == 403) {
      auto it = r.headers.find("x-ratelimit-remaining");
      if (it != r.headers.end() && it->second == "0") return true;
      return r.body.find("rate limit") != std::string::npos;
    }
    return false;
  }

  void backoff(int attempt, const std::optional<HttpResponse>& resp) {
    auto delay = options_.base_backoff * (1LL << std::min(attempt, 20));
    if (resp) {
      auto it = resp->headers.find("retry-after");
      if (it != resp->headers.end()) {
        char* end = nullptr;
        const long secs = std::strtol(it->second.c_str(), &end, 10);
        if (end != it->second.c_str() && secs >= 0) delay = std::chrono::milliseconds(secs * 1000);
      }
    }
    delay = std::min<std::chrono::milliseconds>(delay, options_.max_backoff);
    if (options_.sleep) {
      options_.sleep(delay);
    } else {
      std::this_thread::sleep_for(delay);
    }
  }

  HttpTransport& transport_;
  ResponseCache cache_;
  const FetchOptions& options_;
  FetchStats* stats_;
  std::string auth_env_hint_;
  std::mutex mu_;
};

std::string identity_of(const Json& actor) {
  if (!actor.is_object()) return "";
  if (actor.contains("user") && actor.at("user").is_object()) {
    const Json& u = actor.at("user");
    if (u.contains("login") && u.at("login").is_string()) return u.at("login").get<std::string>();
  }
  for (const char* k : {"login", "name", "email"}) {
    if (actor.contains(k) && actor.at(k).is_string() && !actor.at(k).get<std::string>().empty()) {
      return actor.at(k).get<std::string>();
    }
  }
  return "";
}

std::string string_or_empty(const Json& obj, const char* key) {
  if (!obj.is_object() || !obj.contains(key) || !obj.at(key).is_string()) return "";
  return obj.at(key).get<std::string>();
}

const Json* walk(const Json& root, std::initializer_list<const char*> path) {
  const Json* cur = &root;
  for (const char* k : path) {
    if (!cur->is_object() || !cur->contains(k) || cur->at(k).is_null()) return nullptr;
    cur = &cur->at(k);
  }
  return cur;
}

HttpRequest graphql_request(const SourceConfig& cfg, const Credentials& auth, const std::string& query,
                            std::size_t page_size, const std::optional<std::string>& cursor) {
  if (auth.github_token.empty()) {
    throw AuthError(std::string("no GitHub token; set the ") + kGithubTokenEnv + " environment variable");
  }
  Json vars;
  vars["owner"] = cfg.repo_owner();
  vars["name"] = cfg.repo_name();
  vars["first"] = page_size;
  vars["after"] = cursor ? Json(*cursor) : Json(nullptr);
  Json body;
  body["query"] = query;
  body["variables"] = vars;
  HttpRequest req;
  req.method = "POST";
  req.url = cfg.github_api_url;
  req.headers["Authorization"] = "bearer " + auth.github_token;
  req.headers["User-Agent"] = "linkkit";
  req.body = detail::dump_compact(body);
  return req;
}

constexpr const char* kCommitsQuery =
    "query($owner:String!,$name:String!,$first:Int!,$after:String){repository(owner:$owner,name:$name){"
    "defaultBranchRef{target{...on Commit{history(first:$first,after:$after){pageInfo{hasNextPage endCursor}"
    "nodes{oid message authoredDate committedDate author{name email user{login}} "
    "committer{name email user{login}}}}}}}}}";

constexpr const char* kIssuesQuery =
    "query($owner:String!,$name:String!,$first:Int!,$after:String){repository(owner:$owner,name:$name){"
    "issues(first:$first,after:$after,orderBy:{field:CREATED_AT,direction:ASC}){pageInfo{hasNextPage endCursor}"
    "nodes{number title body createdAt updatedAt author{login} labels(first:20){nodes{name}}}}}}";

/// Cursor pagination over a GraphQL connection; returns all nodes.
std::vector<Json> paginate_graphql(Requester& requester, const SourceConfig& cfg, const Credentials& auth,
                                   const char* query, std::initializer_list<const char*> connection_path,
                                   std::size_t page_size) {
  std::vector<Json> nodes;
  std::optional<std::string> cursor;
  for (;;) {
    const Json body = requester.fetch(graphql_request(cfg, auth, query, page_size, cursor));
    const Json* data = walk(body, {"data"});
    if (!data) throw NetworkError("GraphQL response without data");
    if (!walk(*data, {"repository"})) throw NetworkError("repository " + cfg.repo_slug + " not found");
    const Json* conn = walk(*data, connection_path);
    if (!conn) break;  // e.g. an empty repository has no default branch
    if (const Json* n = walk(*conn, {"nodes"}); n && n->is_array()) {
      for (const Json& node : *n) nodes.push_back(node);
    }
    const Json* info = walk(*conn, {"pageInfo"});
    if (!info || !info->value("hasNextPage", false)) break;
    cursor = string_or_empty(*info, "endCursor");
  }
  return nodes;
}

Commit commit_from_node(const Json& node) {
  Commit c;
  c.sha = string_or_empty(node, "oid");
  c.message = string_or_empty(node, "message");
  c.author = identity_of(node.value("author", Json()));
  c.committer = identity_of(node.value("committer", Json()));
  c.authored_date = truncate_timestamp(string_or_empty(node, "authoredDate"), "authoredDate");
  c.committed_date = truncate_timestamp(string_or_empty(node, "committedDate"), "committedDate");
  if (c.committed_date < c.authored_date) {
    warn("commit " + c.sha + " has a committer date before its author date; clamping");
    c.committed_date = c.authored_date;
  }
  c.status_raw = "closed";
  c.status_norm = CommitStatus::closed;
  return c;
}

Issue issue_from_github_node(const Json& node) {
  Issue i;
  i.issue_id = "#" + std::to_string(node.value("number", 0));
  i.title = string_or_empty(node, "title");
  i.description = string_or_empty(node, "body");
  i.creator = identity_of(node.value("author", Json()));
  i.created_date = truncate_timestamp(string_or_empty(node, "createdAt"), "createdAt");
  i.updated_date = truncate_timestamp(string_or_empty(node, "updatedAt"), "updatedAt");
  i.source = IssueSource::github;
  // The first label the default mapping table knows wins, else the first label.
  std::vector<std::string> labels;
  if (const Json* ln = walk(node, {"labels", "nodes"}); ln && ln->is_array()) {
    for (const Json& l : *ln) labels.push_back(string_or_empty(l, "name"));
  }
  const auto& known = CategoryMaps::defaults().issue_types;
  for (const auto& l : labels) {
    std::string key = l;
    std::transform(key.begin(), key.end(), key.begin(), [](unsigned char c) { return std::tolower(c); });
    if (known.count(key)) {
      i.type_raw = l;
      break;
    }
  }
  if (i.type_raw.empty() && !labels.empty()) i.type_raw = labels.front();
  return i;
}

std::string url_encode(const std::string& s) {
  static constexpr char kHex[] = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : s) {
    if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
      out.push_back(static_cast<char>(c));
    } else {
      out.push_back('%');
      out.push_back(kHex[c >> 4]);
      out.push_back(kHex[c & 0xF]);
    }
  }
  return out;
}

HttpRequest jira_request(const SourceConfig& cfg, const Credentials& auth, std::size_t start_at,
                         std::size_t page_size) {
  if (auth.jira_user.empty() || auth.jira_token.empty()) {
    throw AuthError(std::string("no Jira credentials; set the ") + kJiraUserEnv + " and " + kJiraTokenEnv +
                    " environment variables");
  }
  std::string base = *cfg.jira_base_url;
  while (!base.empty() && base.back() == '/') base.pop_back();
  HttpRequest req;
  req.method = "GET";
  req.url = base + "/rest/api/2/search?jql=" + url_encode("project = " + *cfg.jira_project_key + " ORDER BY key ASC") +
            "&startAt=" + std::to_string(start_at) + "&maxResults=" + std::to_string(page_size) +
            "&fields=summary,description,issuetype,creator,created,updated";
  req.headers["Authorization"] = "Basic " + base64_encode(auth.jira_user + ":" + auth.jira_token);
  req.headers["Accept"] = "application/json";
  return req;
}

Issue issue_from_jira(const Json& rec) {
  Issue i;
  i.issue_id = string_or_empty(rec, "key");
  const Json fields = rec.value("fields", Json::object());
  i.title = string_or_empty(fields, "summary");
  i.description = string_or_empty(fields, "description");
  if (const Json* t = walk(fields, {"issuetype"})) i.type_raw = string_or_empty(*t, "name");
  if (const Json* c = walk(fields, {"creator"})) {
    for (const char* k : {"name", "accountId", "displayName"}) {
      i.creator = string_or_empty(*c, k);
      if (!i.creator.empty()) break;
    }
  }
  i.created_date = truncate_timestamp(string_or_empty(fields, "created"), "created");
  i.updated_date = truncate_timestamp(string_or_empty(fields, "updated"), "updated");
  if (i.updated_date < i.created_date) i.updated_date = i.created_date;
  i.source = IssueSource::jira;
  return i;
}

std::vector<Json> jira_issues_of(const Json& page) {
  std::vector<Json> out;
  if (page.contains("issues") && page.at("issues").is_array()) {
    for (const Json& r : page.at("issues")) out.push_back(r);
  }
  return out;
}

}  // namespace

std::vector<Commit> fetch_commits(const SourceConfig& cfg, const Credentials& auth, HttpTransport& transport,
                                  const FetchOptions& options, FetchStats* stats) {
  cfg.validate();
  Requester requester(transport, ResponseCache(cfg.cache_dir, cfg.project), options, stats, kGithubTokenEnv);
  std::vector<Commit> commits;
  for (const Json& node : paginate_graphql(requester, cfg, auth, kCommitsQuery,
                                           {"repository", "defaultBranchRef", "target", "history"},
                                           options.page_size)) {
    commits.push_back(commit_from_node(node));
  }
  std::sort(commits.begin(), commits.end(), [](const Commit& a, const Commit& b) {
    return std::tie(a.authored_date, a.sha) < std::tie(b.authored_date, b.sha);
  });
  return commits;
}

std::vector<Issue> fetch_issues(const SourceConfig& cfg, const Credentials& auth, HttpTransport& transport,
                                const FetchOptions& options, FetchStats* stats) {
  cfg.validate();
  std::vector<Issue> issues;
  if (cfg.its == IssueSource::github) {
    Requester requester(transport, ResponseCache(cfg.cache_dir, cfg.project), options, stats, kGithubTokenEnv);
    for (const Json& node :
         paginate_graphql(requester, cfg, auth, kIssuesQuery, {"repository", "issues"}, options.page_size)) {
      issues.push_back(issue_from_github_node(node));
    }
  } else {
    Requester requester(transport, ResponseCache(cfg.cache_dir, cfg.project), options, stats,
                        std::string(kJiraUserEnv) + "/" + kJiraTokenEnv);
    const std::size_t page = std::max<std::size_t>(options.page_size, 1);
    const Json first = requester.fetch(jira_request(cfg, auth, 0, page));
    const std::size_t total = first.value("total", std::size_t{0});
    std::vector<std::vector<Json>> pages{jira_issues_of(first)};
    std::vector<std::size_t> offsets;
    for (std::size_t at = page; at < total; at += page) offsets.push_back(at);
    pages.resize(1 + offsets.size());
    // Remaining pages are independent; fetch them in bounded waves.
    const std::size_t width = std::max<std::size_t>(options.parallelism, 1);
    for (std::size_t w = 0; w < offsets.size(); w += width) {
      std::vector<std::future<Json>> wave;
      for (std::size_t k = w; k < std::min(offsets.size(), w + width); ++k) {
        HttpRequest req = jira_request(cfg, auth, offsets[k], page);
        wave.push_back(std::async(std::launch::async, [&requester, req] { return requester.fetch(req); }));
      }
      for (std::size_t k = 0; k < wave.size(); ++k) pages[1 + w + k] = jira_issues_of(wave[k].get());
    }
    for (const auto& p : pages) {
      for (const Json& rec : p) issues.push_back(issue_from_jira(rec));
    }
  }
  std::sort(issues.begin(), issues.end(), [](const Issue& a, const Issue& b) {
    return std::tie(a.created_date, a.issue_id) < std::tie(b.created_date, b.issue_id);
  });
  return issues;
}

// ---------------------------------------------------------------------------
// Reference patterns and true links

LinkPatterns::LinkPatterns(std::vector<ReferencePattern> patterns) : patterns_(std::move(patterns)) {
  for (const auto& p : patterns_) {
    auto flags = std::regex::ECMAScript;
    if (p.ignore_case) flags |= std::regex::icase;
    try {
      compiled_.emplace_back(p.expression, flags);
    } catch (const std::regex_error& e) {
      throw UsageError("invalid reference pattern '" + p.expression + "': " + e.what());
    }
  }
}

LinkPatterns LinkPatterns::jira(const std::string& project_key) {
  return LinkPatterns({{"jira-key", "\\b(" + project_key + "-[0-9]+)\\b", "{1}", false}});
}

LinkPatterns LinkPatterns::github() {
  return LinkPatterns({
      {"github-keyword", "\\b(?:fix(?:es|ed)?|close[sd]?|resolve[sd]?)\\s*:?\\s+#([0-9]+)\\b", "#{1}", true},
      {"github-hash", "#([0-9]+)\\b", "#{1}", false},
  });
}

LinkPatterns LinkPatterns::for_source(const SourceConfig& cfg) {
  if (cfg.its == IssueSource::jira) return jira(cfg.jira_project_key.value_or(cfg.project));
  return github();
}

std::vector<LinkPatterns::Match> LinkPatterns::references(const std::string& text) const {
  std::vector<Match> out;
  std::set<std::string> seen;
  for (std::size_t k = 0; k < compiled_.size(); ++k) {
    for (auto it = std::sregex_iterator(text.begin(), text.end(), compiled_[k]); it != std::sregex_iterator();
         ++it) {
      std::string id = patterns_[k].id_template;
      const std::string cap = it->size() > 1 ? (*it)[1].str() : it->str();
      if (auto pos = id.find("{1}"); pos != std::string::npos) id.replace(pos, 3, cap);
      if (seen.insert(id).second) out.push_back({id, patterns_[k].name});
    }
  }
  return out;
}

bool LinkPatterns::references_issue(const std::string& text, const std::string& issue_id) const {
  for (const auto& m : references(text)) {
    if (m.issue_id == issue_id) return true;
  }
  return false;
}

std::vector<LinkPair> extract_true_links(std::span<const Issue> issues, std::span<const Commit> commits,
                                         const LinkPatterns& patterns) {
  std::set<std::string> known;
  for (const Issue& i : issues) known.insert(i.issue_id);
  std::map<PairId, LinkPair> found;
  for (const Commit& c : commits) {
    for (const auto& m : patterns.references(c.message)) {
      if (!known.count(m.issue_id)) continue;
      LinkPair p;
      p.issue_id = m.issue_id;
      p.commit_sha = c.sha;
      p.label = Label::true_link;
      p.pair_date = c.authored_date;
      p.provenance.method = ProvenanceMethod::id_reference;
      p.provenance.pattern = m.pattern;
      found.emplace(p.id(), std::move(p));
    }
  }
  std::vector<LinkPair> out;
  out.reserve(found.size());
  for (auto& [id, p] : found) out.push_back(std::move(p));
  return out;
}

}  // namespace linkkit
