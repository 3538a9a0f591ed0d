#pragma once

// Turning an <issue, commit> pair into encoder input.

#include <cstdint>
#include <string>
#include <vector>

#include "linkkit/corpus.hpp"
#include "linkkit/model/tokenizer.hpp"

namespace linkkit {

struct SerializeOptions {
  /// Appends the normalized issue description to the issue text.
  bool include_description = false;
};

/// The four parts of a serialized pair. Free text may be truncated; the
/// bracketed metadata never is.
struct PairSegments {
  std::string issue_text;
  std::string issue_meta;
  std::string commit_text;
  std::string commit_meta;
};

PairSegments pair_segments(const Issue& issue, const Commit& commit, const SerializeOptions& options = {});

/// `issue: <title> [type=..] [creator=..] [created=..] [updated=..] <SEP>
///  commit: <message> [author=..] [committer=..] [authored=..] [status=..]`
std::string serialize_pair(const Issue& issue, const Commit& commit, const std::string& sep = "</s></s>",
                           const SerializeOptions& options = {});

struct EncodedPair {
  std::vector<std::int32_t> ids;
  /// 1 where a free-text word also occurs in the other side's free text, or
  /// where a whole metadata value equals one on the other side.
  std::vector<std::uint8_t> match;
  /// Free-text pieces dropped to fit the length limit.
  std::size_t truncated = 0;
};

/// Tokenizes a pair into at most `max_length` ids. Throws DataError when
/// the metadata alone does not fit.
EncodedPair encode_pair(const Tokenizer& tokenizer, const Issue& issue, const Commit& commit, std::size_t max_length,
                        const SerializeOptions& options = {});

/// Every pre-token of a serialized pair; used to build vocabularies.
std::vector<std::string> pair_words(const Issue& issue, const Commit& commit, const SerializeOptions& options = {});

}  // namespace linkkit
