#include <doctest.h>

#include <fstream>
#include <set>

#include "fixtures.hpp"
#include "linkkit/error.hpp"
#include "linkkit/log.hpp"
#include "linkkit/preprocess.hpp"

using namespace linkkit;

TEST_CASE("normalize_text lowercases, splits on punctuation and drops stop words") {
  CHECK(normalize_text("Fix the crash in Parser::parse() when it's EMPTY") == "fix crash parser parse empty");
  CHECK(normalize_text("   ") == "");
  CHECK(normalize_text("Ünïcode stays-intact") == "ünïcode stays intact");
  CHECK(word_tokens("a,b;;C") == std::vector<std::string>{"a", "b", "c"});
}

TEST_CASE("stop word list is the NLTK English list") {
  CHECK(stop_words().size() == 153);
  const std::set<std::string> unique(stop_words().begin(), stop_words().end());
  CHECK(unique.size() == stop_words().size());
  CHECK(is_stop_word("the"));
  CHECK_FALSE(is_stop_word("parser"));
}

TEST_CASE("category mapping with fallback warning") {
  CHECK(normalize_issue_type("Bug") == IssueType::bug);
  CHECK(normalize_issue_type(" new feature ") == IssueType::feature);
  CHECK(normalize_issue_type("Improvement") == IssueType::feature);
  CHECK(normalize_commit_status("Fixed") == CommitStatus::resolved);

  std::vector<std::string> warnings;
  auto old = set_warning_handler([&](const std::string& m) { warnings.push_back(m); });
  CHECK(normalize_issue_type("Epic") == IssueType::task);
  CHECK(normalize_commit_status("merged") == CommitStatus::closed);
  set_warning_handler(old);
  CHECK(warnings.size() == 2);
}

TEST_CASE("category overrides") {
  const auto dir = fixtures::temp_dir("preprocess-overrides");
  std::ofstream(dir / "maps.txt") << "# comment\nEpic=feature\n\nmerged=resolved\n";
  const CategoryMaps maps = CategoryMaps::with_overrides(dir / "maps.txt");
  CHECK(normalize_issue_type("epic", maps) == IssueType::feature);
  CHECK(normalize_commit_status("Merged", maps) == CommitStatus::resolved);
  CHECK(normalize_issue_type("bug", maps) == IssueType::bug);
}

TEST_CASE("timestamps convert to UTC before truncation") {
  CHECK(truncate_timestamp("2020-01-01").to_string() == "2020-01-01");
  CHECK(truncate_timestamp("2020-01-01T23:30:00Z").to_string() == "2020-01-01");
  CHECK(truncate_timestamp("2020-01-01T23:30:00-02:00").to_string() == "2020-01-02");
  CHECK(truncate_timestamp("2020-01-01T01:00:00+0300").to_string() == "2019-12-31");
  CHECK(truncate_timestamp("2020-03-01T00:10:00.123+01").to_string() == "2020-02-29");
  CHECK_THROWS_AS(truncate_timestamp("yesterday", "created"), DataError);
  CHECK_THROWS_AS(truncate_timestamp("2020-01-01T25:00:00Z"), DataError);
  CHECK_THROWS_AS(truncate_timestamp("2020-01-01T10:00:00Q"), DataError);
}

TEST_CASE("feature assembly and one-hot layout") {
  const Issue i = fixtures::issue("#1", "t", "alice", Date(2020, 1, 1), "Task");
  Commit c = fixtures::commit(fixtures::sha_of(1), "m", "bob", Date(2020, 1, 2));
  c.status_norm = CommitStatus::resolved;
  const PairFeatures f = assemble_features(i, c);
  CHECK(feature_names().size() == 12);
  CHECK(f.task);
  CHECK(f.resolved);
  CHECK(f.created_date == Date(2020, 1, 1));

  const auto v = one_hot_encode(i, c);
  REQUIRE(v.size() == one_hot_length());
  CHECK(v.size() == 5 + 3 * kDefaultIdentityBuckets);
  CHECK(v[2] == 1.0);
  CHECK(v[4] == 1.0);
  double total = 0;
  for (double x : v) total += x;
  CHECK(total == 5.0);

  // Identity hashing ignores case and surrounding whitespace.
  Issue j = i;
  j.creator = "  ALICE ";
  CHECK(one_hot_encode(j, c) == v);
}
