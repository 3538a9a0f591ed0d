#pragma once

// Fetching issues and commits (GitHub GraphQL, Jira REST) with an on-disk
// response cache, and extraction of true links from issue-id references in
// commit messages.

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <regex>
#include <span>
#include <string>
#include <vector>

#include "linkkit/corpus.hpp"

namespace linkkit {

inline constexpr const char* kGithubTokenEnv = "LINKKIT_GITHUB_TOKEN";
inline constexpr const char* kJiraUserEnv = "LINKKIT_JIRA_USER";
inline constexpr const char* kJiraTokenEnv = "LINKKIT_JIRA_TOKEN";

struct SourceConfig {
  std::string project;
  /// owner/name
  std::string repo_slug;
  IssueSource its = IssueSource::github;
  std::optional<std::string> jira_base_url;
  std::optional<std::string> jira_project_key;
  std::filesystem::path cache_dir = "cache";
  std::string github_api_url = "https://api.github.com/graphql";

  void validate() const;
  std::string repo_owner() const;
  std::string repo_name() const;
};

struct Credentials {
  std::string github_token;
  std::string jira_user;
  std::string jira_token;

  static Credentials from_env();
};

struct HttpRequest {
  std::string method = "GET";
  std::string url;
  std::map<std::string, std::string> headers;
  std::string body;
};

struct HttpResponse {
  int status = 0;
  std::string body;
  std::map<std::string, std::string> headers;
};

/// Network boundary. Implementations must be safe to call from several
/// threads at once.
class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResponse send(const HttpRequest& request) = 0;
};

/// cpp-httplib backed transport (HTTP and HTTPS).
class HttplibTransport final : public HttpTransport {
 public:
  explicit HttplibTransport(std::chrono::seconds timeout = std::chrono::seconds(60));
  HttpResponse send(const HttpRequest& request) override;

 private:
  std::chrono::seconds timeout_;
};

/// Raw response bodies stored as `<cache_dir>/<project>/<request-hash>.json`.
class ResponseCache {
 public:
  ResponseCache(std::filesystem::path cache_dir, const std::string& project);

  static std::string request_key(const HttpRequest& request);

  std::optional<std::string> load(const std::string& key) const;
  void store(const std::string& key, const std::string& body) const;
  std::filesystem::path path_for(const std::string& key) const;

 private:
  std::filesystem::path dir_;
};

struct FetchOptions {
  std::size_t page_size = 100;
  int max_retries = 5;
  std::chrono::milliseconds base_backoff{1000};
  std::chrono::milliseconds max_backoff{60000};
  /// Upper bound on concurrent page requests where the API allows it.
  std::size_t parallelism = 4;
  std::function<void(std::chrono::milliseconds)> sleep;
};

struct FetchStats {
  std::size_t network_requests = 0;
  std::size_t cache_hits = 0;
  std::size_t retries = 0;
};

/// All default-branch commits, sorted by (authored_date, sha).
std::vector<Commit> fetch_commits(const SourceConfig& cfg, const Credentials& auth, HttpTransport& transport,
                                  const FetchOptions& options = {}, FetchStats* stats = nullptr);

/// All issues of the project's ITS, sorted by (created_date, issue_id).
/// type_norm is left at its default; preprocess resolves it from type_raw.
std::vector<Issue> fetch_issues(const SourceConfig& cfg, const Credentials& auth, HttpTransport& transport,
                                const FetchOptions& options = {}, FetchStats* stats = nullptr);

/// A regex whose first capture group, substituted into `id_template` at
/// `{1}`, yields an issue id.
struct ReferencePattern {
  std::string name;
  std::string expression;
  std::string id_template = "{1}";
  bool ignore_case = false;
};

class LinkPatterns {
 public:
  LinkPatterns() = default;
  explicit LinkPatterns(std::vector<ReferencePattern> patterns);

  /// `<KEY>-<digits>` with word boundaries.
  static LinkPatterns jira(const std::string& project_key);
  /// Keyword forms (fix/close/resolve #N) and bare `#N`.
  static LinkPatterns github();
  static LinkPatterns for_source(const SourceConfig& cfg);

  struct Match {
    std::string issue_id;
    std::string pattern;
  };

  /// Every distinct issue id referenced by `text`, tagged with the first
  /// pattern (in priority order) that produced it.
  std::vector<Match> references(const std::string& text) const;
  bool references_issue(const std::string& text, const std::string& issue_id) const;

  const std::vector<ReferencePattern>& patterns() const { return patterns_; }

 private:
  std::vector<ReferencePattern> patterns_;
  std::vector<std::regex> compiled_;
};

/// One true_link per (issue, commit) where the commit text references an
/// issue present in `issues`. Sorted by (issue_id, commit_sha).
std::vector<LinkPair> extract_true_links(std::span<const Issue> issues, std::span<const Commit> commits,
                                         const LinkPatterns& patterns);

}  // namespace linkkit
