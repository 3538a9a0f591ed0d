#include "linkkit/model/serialize.hpp"

#include <algorithm>
#include <set>

#include "linkkit/error.hpp"
#include "linkkit/preprocess.hpp"

namespace linkkit {

PairSegments pair_segments(const Issue& issue, const Commit& commit, const SerializeOptions& options) {
  PairSegments s;
  s.issue_text = normalize_text(issue.title);
  if (options.include_description) {
    const std::string desc = normalize_text(issue.description);
    if (!desc.empty()) s.issue_text += (s.issue_text.empty() ? "" : " ") + desc;
  }
  s.issue_meta = "[type=" + std::string(to_string(issue.type_norm)) + "] [creator=" + issue.creator +
                 "] [created=" + issue.created_date.to_string() + "] [updated=" + issue.updated_date.to_string() + "]";
  s.commit_text = normalize_text(commit.message);
  s.commit_meta = "[author=" + commit.author + "] [committer=" + commit.committer +
                  "] [authored=" + commit.authored_date.to_string() +
                  "] [status=" + std::string(to_string(commit.status_norm)) + "]";
  return s;
}

std::string serialize_pair(const Issue& issue, const Commit& commit, const std::string& sep,
                           const SerializeOptions& options) {
  const PairSegments s = pair_segments(issue, commit, options);
  std::string out = "issue:";
  for (const std::string* part : {&s.issue_text, &s.issue_meta}) {
    if (!part->empty()) out += " " + *part;
  }
  out += " " + sep + " commit:";
  for (const std::string* part : {&s.commit_text, &s.commit_meta}) {
    if (!part->empty()) out += " " + *part;
  }
  return out;
}

std::vector<std::string> pair_words(const Issue& issue, const Commit& commit, const SerializeOptions& options) {
  const PairSegments s = pair_segments(issue, commit, options);
  std::vector<std::string> out = {"issue", ":", "commit", ":"};
  for (const std::string* part : {&s.issue_text, &s.issue_meta, &s.commit_text, &s.commit_meta}) {
    for (auto& w : pre_tokenize(*part)) out.push_back(std::move(w));
  }
  return out;
}

namespace {

struct Piece {
  std::int32_t id;
  std::uint8_t match;
};

std::vector<Piece> pieces_of(const Tokenizer& tok, const std::vector<std::string>& words,
                             const std::set<std::string>& other_side) {
  std::vector<Piece> out;
  for (const auto& w : words) {
    const std::uint8_t m = !is_punctuation_token(w) && other_side.count(w) ? 1 : 0;
    for (std::int32_t id : tok.word_pieces(w)) out.push_back({id, m});
  }
  return out;
}

std::set<std::string> content_words(const std::vector<std::string>& words) {
  std::set<std::string> out;
  for (const auto& w : words) {
    if (!is_punctuation_token(w)) out.insert(w);
  }
  return out;
}

// "[key=value] [key=value]" split into fields; values compare lowercased.
struct MetaField {
  std::string text;
  std::string value;
};

std::vector<MetaField> meta_fields(const std::string& meta) {
  std::vector<MetaField> out;
  std::size_t begin = 0;
  while (begin < meta.size()) {
    std::size_t end = meta.find("] [", begin);
    end = end == std::string::npos ? meta.size() : end + 1;
    MetaField f{meta.substr(begin, end - begin), {}};
    const std::size_t eq = f.text.find('=');
    if (eq != std::string::npos && f.text.size() >= eq + 2) f.value = f.text.substr(eq + 1, f.text.size() - eq - 2);
    for (char& c : f.value) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    out.push_back(std::move(f));
    begin = end + 1;
  }
  return out;
}

std::set<std::string> meta_values(const std::vector<MetaField>& fields) {
  std::set<std::string> out;
  for (const auto& f : fields) {
    if (!f.value.empty()) out.insert(f.value);
  }
  return out;
}

// A metadata value is flagged only when the whole value recurs on the other
// side (same person, same date), never for shared fragments of it.
std::vector<Piece> meta_pieces(const Tokenizer& tok, const std::vector<MetaField>& fields,
                               const std::set<std::string>& other_values) {
  std::vector<Piece> out;
  for (const auto& f : fields) {
    const auto words = pre_tokenize(f.text);
    const bool hit = !f.value.empty() && other_values.count(f.value);
    for (std::size_t k = 0; k < words.size(); ++k) {
      // "[", key and "=" lead every field; the closing "]" trails it.
      const std::uint8_t m = hit && k >= 3 && !is_punctuation_token(words[k]) ? 1 : 0;
      for (std::int32_t id : tok.word_pieces(words[k])) out.push_back({id, m});
    }
  }
  return out;
}

}  // namespace

EncodedPair encode_pair(const Tokenizer& tokenizer, const Issue& issue, const Commit& commit, std::size_t max_length,
                        const SerializeOptions& options) {
  const PairSegments s = pair_segments(issue, commit, options);
  const auto it_words = pre_tokenize(s.issue_text);
  const auto ct_words = pre_tokenize(s.commit_text);
  const auto im_fields = meta_fields(s.issue_meta);
  const auto cm_fields = meta_fields(s.commit_meta);

  const std::vector<Piece> issue_text = pieces_of(tokenizer, it_words, content_words(ct_words));
  const std::vector<Piece> issue_meta = meta_pieces(tokenizer, im_fields, meta_values(cm_fields));
  const std::vector<Piece> commit_text = pieces_of(tokenizer, ct_words, content_words(it_words));
  const std::vector<Piece> commit_meta = meta_pieces(tokenizer, cm_fields, meta_values(im_fields));
  const std::vector<Piece> issue_prefix = {{tokenizer.id("issue"), 0}, {tokenizer.id(":"), 0}};
  const std::vector<Piece> commit_prefix = {{tokenizer.id("commit"), 0}, {tokenizer.id(":"), 0}};
  const SpecialTokens& sp = tokenizer.specials();

  const std::size_t fixed = 2 + sp.pair_sep.size() + issue_prefix.size() + commit_prefix.size() + issue_meta.size() +
                            commit_meta.size();
  if (fixed > max_length) {
    throw DataError("pair " + issue.issue_id + ":" + commit.sha + " needs " + std::to_string(fixed) +
                    " metadata tokens, more than the limit of " + std::to_string(max_length));
  }
  // Share the remaining budget in proportion to the two text lengths.
  const std::size_t budget = max_length - fixed;
  std::size_t keep_i = issue_text.size(), keep_c = commit_text.size();
  if (keep_i + keep_c > budget) {
    keep_i = budget * issue_text.size() / (issue_text.size() + commit_text.size());
    keep_c = std::min(commit_text.size(), budget - keep_i);
    keep_i = std::min(issue_text.size(), budget - keep_c);
  }

  EncodedPair out;
  out.truncated = issue_text.size() - keep_i + commit_text.size() - keep_c;
  auto push = [&](std::int32_t id, std::uint8_t m) {
    out.ids.push_back(id);
    out.match.push_back(m);
  };
  auto push_all = [&](const std::vector<Piece>& v, std::size_t n) {
    for (std::size_t k = 0; k < n; ++k) push(v[k].id, v[k].match);
  };
  push(tokenizer.id(sp.cls), 0);
  push_all(issue_prefix, issue_prefix.size());
  push_all(issue_text, keep_i);
  push_all(issue_meta, issue_meta.size());
  for (const auto& t : sp.pair_sep) push(tokenizer.id(t), 0);
  push_all(commit_prefix, commit_prefix.size());
  push_all(commit_text, keep_c);
  push_all(commit_meta, commit_meta.size());
  push(tokenizer.id(sp.eos), 0);
  return out;
}

}  // namespace linkkit
