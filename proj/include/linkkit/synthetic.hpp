#pragma once

// Deterministic synthetic corpora standing in for crawled projects in
// smoke tests and demos. Generated corpora go through the normal build
// pipeline (reference extraction, negative sampling).

#include <cstdint>
#include <string>
#include <vector>

#include "linkkit/corpus.hpp"

namespace linkkit {

/// A GitHub-style project whose link signal mixes topic vocabulary shared
/// between issue titles and commit messages, occasional verbatim title
/// words, and developer identity. Topic popularity drifts over time.
struct ProjectFixtureOptions {
  std::size_t n_issues = 700;
  std::size_t n_topics = 16;
  std::size_t n_background_commits = 1200;
  std::size_t days = 700;
  double link_rate = 0.92;
};

Corpus project_fixture(const std::string& project, std::uint64_t seed, const ProjectFixtureOptions& options = {});

/// `n_projects` corpora where each linked issue/commit pair shares one
/// token from a common pool and nothing else project-specific carries the
/// link. Every pool token occurs in every project.
struct SharedTokenOptions {
  std::size_t n_projects = 4;
  std::size_t issues_per_project = 160;
  std::size_t days = 400;
};

std::vector<Corpus> shared_token_corpora(std::uint64_t seed, const SharedTokenOptions& options = {});

}  // namespace linkkit
