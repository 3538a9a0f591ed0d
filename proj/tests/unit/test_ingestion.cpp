#include <doctest.h>

#include <atomic>
#include <mutex>
#include <nlohmann/json.hpp>

#include "fixtures.hpp"
#include "linkkit/error.hpp"
#include "linkkit/ingestion.hpp"

using namespace linkkit;
using nlohmann::json;

namespace {

/// Serves canned GitHub/Jira pages and counts every call.
class FakeTransport : public HttpTransport {
 public:
  std::function<HttpResponse(const HttpRequest&)> handler;
  std::atomic<int> calls{0};
  std::mutex mu;
  std::vector<HttpRequest> seen;

  HttpResponse send(const HttpRequest& r) override {
    ++calls;
    {
      std::lock_guard lock(mu);
      seen.push_back(r);
    }
    return handler(r);
  }
};

json commit_node(int k, const std::string& day) {
  return {{"oid", fixtures::sha_of(k)},
          {"message", "change " + std::to_string(k) + " fixes #" + std::to_string(k)},
          {"authoredDate", day + "T10:00:00Z"},
          {"committedDate", day + "T12:00:00+02:00"},
          {"author", {{"name", "Dev"}, {"email", "dev@x"}, {"user", {{"login", "dev" + std::to_string(k % 2)}}}}},
          {"committer", {{"name", "GitHub"}, {"email", "noreply@github.com"}, {"user", nullptr}}}};
}

json issue_node(int n, const std::string& day, std::vector<std::string> labels) {
  json ls = json::array();
  for (auto& l : labels) ls.push_back({{"name", l}});
  return {{"number", n},
          {"title", "Issue " + std::to_string(n)},
          {"body", "body"},
          {"createdAt", day + "T08:00:00Z"},
          {"updatedAt", day + "T09:00:00Z"},
          {"author", {{"login", "user" + std::to_string(n)}}},
          {"labels", {{"nodes", ls}}}};
}

/// Three commit pages and two issue pages, keyed by cursor.
HttpResponse github_pages(const HttpRequest& r) {
  const json body = json::parse(r.body);
  const json after = body["variables"]["after"];
  const std::string cursor = after.is_null() ? "" : after.get<std::string>();
  const bool issues = body["query"].get<std::string>().find("issues(") != std::string::npos;
  json conn;
  if (!issues) {
    const std::map<std::string, std::pair<json, std::string>> pages = {
        {"", {json::array({commit_node(5, "2021-01-05"), commit_node(4, "2021-01-04")}), "c1"}},
        {"c1", {json::array({commit_node(3, "2021-01-03"), commit_node(2, "2021-01-03")}), "c2"}},
        {"c2", {json::array({commit_node(1, "2021-01-01")}), ""}}};
    const auto& [nodes, next] = pages.at(cursor);
    conn = {{"pageInfo", {{"hasNextPage", !next.empty()}, {"endCursor", next.empty() ? json(nullptr) : json(next)}}},
            {"nodes", nodes}};
    return {200, json{{"data", {{"repository", {{"defaultBranchRef", {{"target", {{"history", conn}}}}}}}}}}.dump(), {}};
  }
  const std::map<std::string, std::pair<json, std::string>> pages = {
      {"", {json::array({issue_node(1, "2020-12-30", {"question", "Bug"}), issue_node(2, "2021-01-02", {})}), "i1"}},
      {"i1", {json::array({issue_node(3, "2021-01-02", {"enhancement"})}), ""}}};
  const auto& [nodes, next] = pages.at(cursor);
  conn = {{"pageInfo", {{"hasNextPage", !next.empty()}, {"endCursor", next.empty() ? json(nullptr) : json(next)}}},
          {"nodes", nodes}};
  return {200, json{{"data", {{"repository", {{"issues", conn}}}}}}.dump(), {}};
}

SourceConfig github_source(const std::filesystem::path& cache) {
  SourceConfig cfg;
  cfg.project = "demo";
  cfg.repo_slug = "acme/demo";
  cfg.its = IssueSource::github;
  cfg.cache_dir = cache;
  return cfg;
}

Credentials token() {
  Credentials c;
  c.github_token = "t0ken";
  c.jira_user = "me";
  c.jira_token = "secret";
  return c;
}

FetchOptions no_sleep(std::vector<std::chrono::milliseconds>* slept = nullptr) {
  FetchOptions o;
  o.page_size = 2;
  o.sleep = [slept](std::chrono::milliseconds d) {
    if (slept) slept->push_back(d);
  };
  return o;
}

}  // namespace

TEST_CASE("GitHub commits: pagination, identity fallback, UTC truncation, sorted output") {
  const auto dir = fixtures::temp_dir("ingest-gh");
  FakeTransport t;
  t.handler = github_pages;
  FetchStats stats;
  const auto commits = fetch_commits(github_source(dir), token(), t, no_sleep(), &stats);
  CHECK(t.calls == 3);
  CHECK(stats.network_requests == 3);
  REQUIRE(commits.size() == 5);
  CHECK(commits[0].sha == fixtures::sha_of(1));
  CHECK(commits[1].sha == fixtures::sha_of(2));  // same day as sha 3, ordered by sha
  CHECK(commits[2].sha == fixtures::sha_of(3));
  CHECK(commits[0].author == "dev1");
  CHECK(commits[0].committer == "GitHub");
  CHECK(commits[0].committed_date.to_string() == "2021-01-01");
  CHECK(commits[0].status_raw == "closed");
  CHECK(t.seen[0].headers.at("Authorization") == "bearer t0ken");
}

TEST_CASE("warm cache serves identical output with zero network requests") {
  const auto dir = fixtures::temp_dir("ingest-cache");
  FakeTransport t;
  t.handler = github_pages;
  const auto cold = fetch_issues(github_source(dir), token(), t, no_sleep());
  const int after_cold = t.calls;
  CHECK(after_cold == 2);
  FetchStats stats;
  const auto warm = fetch_issues(github_source(dir), token(), t, no_sleep(), &stats);
  CHECK(t.calls == after_cold);
  CHECK(stats.network_requests == 0);
  CHECK(stats.cache_hits == 2);
  CHECK(warm == cold);
  REQUIRE(cold.size() == 3);
  CHECK(cold[0].issue_id == "#1");
  CHECK(cold[0].type_raw == "Bug");
  CHECK(cold[1].type_raw == "");
  CHECK(cold[2].type_raw == "enhancement");
  CHECK(cold[0].creator == "user1");
  // Cache layout: <cache_dir>/<project>/<hash>.json
  std::size_t files = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir / "demo")) {
    CHECK(e.path().extension() == ".json");
    ++files;
  }
  CHECK(files == 2);
}

TEST_CASE("rate limits back off exponentially, then give up") {
  const auto dir = fixtures::temp_dir("ingest-rate");
  FakeTransport t;
  int failures_left = 2;
  t.handler = [&](const HttpRequest& r) -> HttpResponse {
    if (failures_left-- > 0) return {429, "slow down", {}};
    return github_pages(r);
  };
  std::vector<std::chrono::milliseconds> slept;
  FetchStats stats;
  auto opts = no_sleep(&slept);
  const auto commits = fetch_commits(github_source(dir), token(), t, opts, &stats);
  CHECK(commits.size() == 5);
  CHECK(stats.retries == 2);
  REQUIRE(slept.size() == 2);
  CHECK(slept[1] == 2 * slept[0]);

  SUBCASE("Retry-After is honored") {
    const auto d2 = fixtures::temp_dir("ingest-rate-after");
    FakeTransport t2;
    bool once = true;
    t2.handler = [&](const HttpRequest& r) -> HttpResponse {
      if (once) {
        once = false;
        return {403, "API rate limit exceeded", {{"retry-after", "3"}}};
      }
      return github_pages(r);
    };
    std::vector<std::chrono::milliseconds> s2;
    fetch_commits(github_source(d2), token(), t2, no_sleep(&s2));
    REQUIRE(s2.size() == 1);
    CHECK(s2[0] == std::chrono::milliseconds(3000));
  }

  SUBCASE("GraphQL RATE_LIMITED errors are retried too") {
    const auto d3 = fixtures::temp_dir("ingest-rate-gql");
    FakeTransport t3;
    bool once = true;
    t3.handler = [&](const HttpRequest& r) -> HttpResponse {
      if (once) {
        once = false;
        return {200, R"({"errors":[{"type":"RATE_LIMITED","message":"limit"}]})", {}};
      }
      return github_pages(r);
    };
    CHECK(fetch_commits(github_source(d3), token(), t3, no_sleep()).size() == 5);
  }

  SUBCASE("persistent limits fail after max_retries") {
    const auto d4 = fixtures::temp_dir("ingest-rate-fail");
    FakeTransport t4;
    t4.handler = [](const HttpRequest&) -> HttpResponse { return {503, "", {}}; };
    auto o = no_sleep();
    o.max_retries = 3;
    CHECK_THROWS_AS(fetch_commits(github_source(d4), token(), t4, o), NetworkError);
    CHECK(t4.calls == 4);
  }
}

TEST_CASE("auth failures name the environment variable") {
  const auto dir = fixtures::temp_dir("ingest-auth");
  FakeTransport t;
  t.handler = [](const HttpRequest&) -> HttpResponse { return {401, "Bad credentials", {}}; };
  try {
    fetch_commits(github_source(dir), token(), t, no_sleep());
    FAIL("expected AuthError");
  } catch (const AuthError& e) {
    CHECK(std::string(e.what()).find(kGithubTokenEnv) != std::string::npos);
  }
  CHECK_THROWS_AS(fetch_commits(github_source(dir), Credentials{}, t, no_sleep()), AuthError);
  CHECK(t.calls == 1);
}

TEST_CASE("Jira pages are fetched concurrently and sorted deterministically") {
  const auto dir = fixtures::temp_dir("ingest-jira");
  SourceConfig cfg;
  cfg.project = "Proj";
  cfg.its = IssueSource::jira;
  cfg.repo_slug = "acme/proj";
  cfg.jira_base_url = "https://issues.example.org/";
  cfg.jira_project_key = "PROJ";
  cfg.cache_dir = dir;

  FakeTransport t;
  const int total = 7;
  t.handler = [&](const HttpRequest& r) -> HttpResponse {
    const auto at = r.url.find("startAt=");
    const int start = std::stoi(r.url.substr(at + 8));
    json issues = json::array();
    for (int k = start; k < std::min(total, start + 2); ++k) {
      const int n = total - k;  // served newest first
      issues.push_back({{"key", "PROJ-" + std::to_string(n)},
                        {"fields",
                         {{"summary", "Summary " + std::to_string(n)},
                          {"description", nullptr},
                          {"issuetype", {{"name", "Improvement"}}},
                          {"creator", {{"name", "jdoe"}}},
                          {"created", "2020-05-0" + std::to_string(n) + "T22:15:00.000-0500"},
                          {"updated", "2020-05-09T10:00:00.000+0000"}}}});
    }
    return {200, json{{"startAt", start}, {"maxResults", 2}, {"total", total}, {"issues", issues}}.dump(), {}};
  };
  auto opts = no_sleep();
  opts.parallelism = 3;
  const auto issues = fetch_issues(cfg, token(), t, opts);
  CHECK(t.calls == 4);
  REQUIRE(issues.size() == 7);
  for (std::size_t k = 1; k < issues.size(); ++k) CHECK(issues[k - 1].created_date <= issues[k].created_date);
  CHECK(issues[0].issue_id == "PROJ-1");
  CHECK(issues[0].created_date.to_string() == "2020-05-02");  // 22:15 at -05:00 is the next UTC day
  CHECK(issues[0].description == "");
  CHECK(issues[0].type_raw == "Improvement");
  CHECK(issues[0].creator == "jdoe");
  CHECK(issues[0].source == IssueSource::jira);
  CHECK(t.seen[0].url.find("https://issues.example.org/rest/api/2/search?jql=project%20%3D%20PROJ") == 0);
  CHECK(t.seen[0].headers.at("Authorization") == "Basic bWU6c2VjcmV0");
}

TEST_CASE("source config validation") {
  SourceConfig cfg;
  cfg.project = "p";
  cfg.repo_slug = "no-slash";
  CHECK_THROWS_AS(cfg.validate(), UsageError);
  cfg.repo_slug = "a/b";
  cfg.validate();
  CHECK(cfg.repo_owner() == "a");
  CHECK(cfg.repo_name() == "b");
  cfg.its = IssueSource::jira;
  CHECK_THROWS_AS(cfg.validate(), UsageError);
}

TEST_CASE("Jira reference pattern uses word boundaries") {
  const auto p = LinkPatterns::jira("PROJ");
  const auto refs = p.references("PROJ-12: fix, see also PROJ-123 and XPROJ-5, PROJ-12 again");
  REQUIRE(refs.size() == 2);
  CHECK(refs[0].issue_id == "PROJ-12");
  CHECK(refs[1].issue_id == "PROJ-123");
  CHECK_FALSE(p.references_issue("PROJ-1234", "PROJ-123"));
}

TEST_CASE("GitHub patterns: keyword forms take priority over bare references") {
  const auto p = LinkPatterns::github();
  const auto refs = p.references("Resolves: #10, touches #11; FIXED #12 and #100abc");
  REQUIRE(refs.size() == 3);
  CHECK(refs[0].issue_id == "#10");
  CHECK(refs[1].issue_id == "#12");
  CHECK(refs[2].issue_id == "#11");
  CHECK(refs[0].pattern == refs[1].pattern);
  CHECK(refs[2].pattern != refs[0].pattern);
  CHECK_THROWS_AS(LinkPatterns({{"bad", "(unclosed", "{1}", false}}), UsageError);
}

TEST_CASE("extract_true_links keeps only known issues and records provenance") {
  const Corpus c = fixtures::tiny_corpus();
  std::vector<Commit> commits = c.commits;
  commits.push_back(fixtures::commit(fixtures::sha_of(9), "closes #99 and #1", "zed", Date(2021, 3, 2)));
  const auto links = extract_true_links(c.issues, commits, LinkPatterns::github());
  REQUIRE(links.size() == 4);
  for (const auto& l : links) {
    CHECK(l.label == Label::true_link);
    CHECK(l.provenance.method == ProvenanceMethod::id_reference);
    CHECK(l.provenance.pattern.has_value());
    CHECK(l.issue_id != "#99");
  }
  CHECK(links[0].issue_id == "#1");
  CHECK(links[0].pair_date == Date(2021, 3, 2));
  // Sorted by (issue_id, commit_sha).
  for (std::size_t k = 1; k < links.size(); ++k) CHECK(links[k - 1].id() < links[k].id());
}
