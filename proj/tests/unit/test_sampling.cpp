#include <doctest.h>

#include "fixtures.hpp"
#include "linkkit/error.hpp"
#include "linkkit/log.hpp"
#include "linkkit/sampling.hpp"

using namespace linkkit;

TEST_CASE("candidates equal brute-force enumeration on random corpora") {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const Corpus c = fixtures::random_corpus(seed);
    const auto patterns = LinkPatterns::github();
    const auto links = extract_true_links(c.issues, c.commits, patterns);
    for (int window : {0, 3, 7}) {
      SamplingConfig cfg;
      cfg.window_days = window;
      CHECK(candidate_false_pairs(c.issues, c.commits, links, patterns, cfg) ==
            fixtures::brute_force_candidates(c, links, patterns, window));
    }
  }
}

TEST_CASE("window boundary is inclusive in both directions") {
  const Date d(2022, 5, 10);
  Corpus c;
  c.issues = {fixtures::issue("#1", "t", "ann", d)};
  c.commits = {fixtures::commit(fixtures::sha_of(1), "a", "ben", d.plus_days(7)),
               fixtures::commit(fixtures::sha_of(2), "b", "ben", d.plus_days(8)),
               fixtures::commit(fixtures::sha_of(3), "c", "ben", d.plus_days(-7)),
               fixtures::commit(fixtures::sha_of(4), "d", "ben", d.plus_days(-8))};
  const auto got = candidate_false_pairs(c.issues, c.commits, {}, LinkPatterns::github(), SamplingConfig{});
  CHECK(got == std::set<PairId>{{"#1", fixtures::sha_of(1)}, {"#1", fixtures::sha_of(3)}});
}

TEST_CASE("author equal to creator after trimming is excluded") {
  const Date d(2022, 5, 10);
  Corpus c;
  c.issues = {fixtures::issue("#1", "t", " ann ", d)};
  c.commits = {fixtures::commit(fixtures::sha_of(1), "a", "ann", d), fixtures::commit(fixtures::sha_of(2), "b", "Ann", d)};
  const auto got = candidate_false_pairs(c.issues, c.commits, {}, LinkPatterns::github(), SamplingConfig{});
  CHECK(got == std::set<PairId>{{"#1", fixtures::sha_of(2)}});
}

TEST_CASE("max_candidates_per_issue keeps the first candidates") {
  const Corpus c = fixtures::random_corpus(3);
  const auto patterns = LinkPatterns::github();
  const auto links = extract_true_links(c.issues, c.commits, patterns);
  SamplingConfig cfg;
  cfg.max_candidates_per_issue = 1;
  const auto got = candidate_false_pairs(c.issues, c.commits, links, patterns, cfg);
  const auto all = fixtures::brute_force_candidates(c, links, patterns, 7);
  std::map<std::string, int> per_issue;
  for (const auto& p : got) {
    CHECK(all.count(p));
    ++per_issue[p.issue_id];
  }
  for (const auto& [_, n] : per_issue) CHECK(n == 1);
}

TEST_CASE("sampled false links are a balanced, seeded subset") {
  const Corpus c = fixtures::random_corpus(11, 200, 20);
  const auto patterns = LinkPatterns::github();
  const auto links = extract_true_links(c.issues, c.commits, patterns);
  SamplingConfig cfg;
  cfg.seed = 42;
  const auto cands = candidate_false_pairs(c.issues, c.commits, links, patterns, cfg);
  REQUIRE(cands.size() >= links.size());
  const auto a = sample_false_links(cands, links.size(), c.commits, cfg);
  const auto b = sample_false_links(cands, links.size(), c.commits, cfg);
  CHECK(a.pairs == b.pairs);
  CHECK_FALSE(a.imbalanced);
  CHECK(a.pairs.size() == links.size());
  for (const auto& p : a.pairs) {
    CHECK(cands.count(p.id()));
    CHECK(p.label == Label::false_link);
    CHECK(p.provenance.method == ProvenanceMethod::negative_sample);
    CHECK(p.provenance.seed == 42);
  }
  cfg.seed = 43;
  CHECK(sample_false_links(cands, links.size(), c.commits, cfg).pairs != a.pairs);
}

TEST_CASE("a pool smaller than the true links yields an imbalanced dataset with a warning") {
  const Date d(2022, 5, 10);
  Corpus c;
  c.project = "small";
  c.issues = {fixtures::issue("#1", "a", "ann", d), fixtures::issue("#2", "b", "ann", d)};
  c.commits = {fixtures::commit(fixtures::sha_of(1), "closes #1 and #2", "ben", d),
               fixtures::commit(fixtures::sha_of(3), "unrelated", "ann", d.plus_days(1))};
  std::vector<std::string> warnings;
  auto old = set_warning_handler([&](const std::string& m) { warnings.push_back(m); });
  const ProjectDataset ds =
      build_balanced_dataset(c.project, c.issues, c.commits, LinkPatterns::github(), SamplingConfig{}, "t");
  set_warning_handler(old);
  CHECK(ds.manifest.imbalanced);
  CHECK(ds.manifest.n_true == 2);
  CHECK(ds.manifest.n_false == 0);
  CHECK(warnings.size() == 1);

  c.commits.back().author = "cid";
  c.commits.back().committer = "cid";
  warnings.clear();
  old = set_warning_handler([&](const std::string& m) { warnings.push_back(m); });
  const ProjectDataset ds2 =
      build_balanced_dataset(c.project, c.issues, c.commits, LinkPatterns::github(), SamplingConfig{}, "t");
  set_warning_handler(old);
  CHECK_FALSE(ds2.manifest.imbalanced);
  CHECK(ds2.manifest.n_false == 2);
  CHECK(warnings.empty());
}

TEST_CASE("build_balanced_dataset output satisfies dataset invariants") {
  for (std::uint64_t seed = 100; seed < 110; ++seed) {
    const Corpus c = fixtures::random_corpus(seed);
    const auto patterns = LinkPatterns::github();
    if (extract_true_links(c.issues, c.commits, patterns).empty()) {
      CHECK_THROWS_AS(build_balanced_dataset(c.project, c.issues, c.commits, patterns, SamplingConfig{}), DataError);
      continue;
    }
    SamplingConfig cfg;
    cfg.seed = static_cast<std::int64_t>(seed);
    const ProjectDataset ds = build_balanced_dataset(c.project, c.issues, c.commits, patterns, cfg, "t");
    validate_dataset(ds);
    CHECK(ds.manifest.seed == cfg.seed);
    CHECK(ds.manifest.window_days == 7);
    CHECK(ds.manifest.stop_words_version == "linkkit-en-1");
    for (std::size_t k = 1; k < ds.pairs.size(); ++k) CHECK(ds.pairs[k - 1].id() < ds.pairs[k].id());
    if (!ds.manifest.imbalanced) CHECK(ds.manifest.n_true == ds.manifest.n_false);
  }
}

TEST_CASE("empty inputs") {
  CHECK_THROWS_AS(build_balanced_dataset("x", {}, {}, LinkPatterns::github(), SamplingConfig{}), DataError);
  SamplingConfig bad;
  bad.window_days = -1;
  CHECK_THROWS_AS(bad.validate(), UsageError);
}
