#include "linkkit/model/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <sstream>

#include "../json_util.hpp"
#include "linkkit/error.hpp"

namespace linkkit {

std::string_view to_string(EncoderFamily f) {
  switch (f) {
    case EncoderFamily::roberta: return "roberta";
    case EncoderFamily::distilbert: return "distilbert";
    case EncoderFamily::albert: return "albert";
  }
  return "roberta";
}

EncoderFamily parse_encoder_family(std::string_view s) {
  if (s == "roberta") return EncoderFamily::roberta;
  if (s == "distilbert") return EncoderFamily::distilbert;
  if (s == "albert") return EncoderFamily::albert;
  throw UsageError("unknown encoder family '" + std::string(s) + "'");
}

SpecialTokens SpecialTokens::for_family(EncoderFamily f) {
  if (f == EncoderFamily::roberta) return {"<pad>", "<unk>", "<s>", {"</s>", "</s>"}, "</s>"};
  return {"[PAD]", "[UNK]", "[CLS]", {"[SEP]"}, "[SEP]"};
}

std::string SpecialTokens::pair_sep_text() const {
  std::string out;
  for (const auto& t : pair_sep) out += t;
  return out;
}

namespace {

bool word_byte(unsigned char c) { return std::isalnum(c) || c >= 0x80; }

// Splits a word into characters, keeping UTF-8 sequences together.
std::vector<std::string> characters(const std::string& word) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < word.size();) {
    const auto c = static_cast<unsigned char>(word[i]);
    std::size_t len = 1;
    if (c >= 0xF0) len = 4;
    else if (c >= 0xE0) len = 3;
    else if (c >= 0xC0) len = 2;
    len = std::min(len, word.size() - i);
    out.push_back(word.substr(i, len));
    i += len;
  }
  return out;
}

}  // namespace

std::vector<std::string> pre_tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (word_byte(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
      continue;
    }
    if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
    if (!std::isspace(c)) out.emplace_back(1, ch);
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

bool is_punctuation_token(std::string_view token) {
  return !token.empty() &&
         std::none_of(token.begin(), token.end(), [](char c) { return word_byte(static_cast<unsigned char>(c)); });
}

void Tokenizer::add(const std::string& token) {
  if (index_.count(token)) return;
  index_.emplace(token, static_cast<std::int32_t>(vocab_.size()));
  vocab_.push_back(token);
}

Tokenizer Tokenizer::build(EncoderFamily family, std::span<const std::vector<std::string>> documents,
                           std::size_t min_freq, std::size_t max_words) {
  Tokenizer t;
  t.family_ = family;
  t.specials_ = SpecialTokens::for_family(family);
  t.add(t.specials_.pad);
  t.add(t.specials_.unk);
  t.add(t.specials_.cls);
  for (const auto& s : t.specials_.pair_sep) t.add(s);
  t.add(t.specials_.eos);

  std::map<std::string, std::size_t> freq;
  std::set<std::string> chars;
  for (char c = 33; c < 127; ++c) chars.insert(std::string(1, static_cast<char>(std::tolower(c))));
  for (const auto& doc : documents) {
    for (const auto& w : doc) {
      ++freq[w];
      for (auto& ch : characters(w)) chars.insert(std::move(ch));
    }
  }
  std::vector<std::pair<std::string, std::size_t>> words(freq.begin(), freq.end());
  std::stable_sort(words.begin(), words.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  for (const std::string& c : chars) t.add(c);
  for (const std::string& c : chars) {
    if (!is_punctuation_token(c)) t.add("##" + c);
  }
  std::size_t kept = 0;
  for (const auto& [w, n] : words) {
    if (n < min_freq || kept >= max_words) break;
    if (!t.index_.count(w)) ++kept;
    t.add(w);
  }
  return t;
}

Tokenizer Tokenizer::load(EncoderFamily family, const std::filesystem::path& vocab_file) {
  Tokenizer t;
  t.family_ = family;
  t.specials_ = SpecialTokens::for_family(family);
  std::istringstream in(detail::read_text_file(vocab_file));
  std::string line;
  while (std::getline(in, line)) {
    if (t.index_.count(line)) throw DataError("vocabulary '" + vocab_file.string() + "' repeats '" + line + "'");
    t.index_.emplace(line, static_cast<std::int32_t>(t.vocab_.size()));
    t.vocab_.push_back(line);
  }
  for (const std::string* s : {&t.specials_.pad, &t.specials_.unk, &t.specials_.cls, &t.specials_.eos}) {
    if (!t.index_.count(*s)) throw DataError("vocabulary '" + vocab_file.string() + "' lacks '" + *s + "'");
  }
  return t;
}

void Tokenizer::save(const std::filesystem::path& vocab_file) const {
  std::string body;
  for (const auto& tok : vocab_) body += tok + "\n";
  detail::write_text_file(vocab_file, body);
}

std::int32_t Tokenizer::id(const std::string& token) const {
  auto it = index_.find(token);
  if (it != index_.end()) return it->second;
  auto unk = index_.find(specials_.unk);
  return unk == index_.end() ? 0 : unk->second;
}

std::vector<std::int32_t> Tokenizer::word_pieces(const std::string& word) const {
  if (auto it = index_.find(word); it != index_.end()) return {it->second};
  // Greedy longest-match-first over the remaining suffix.
  std::vector<std::int32_t> out;
  std::size_t start = 0;
  while (start < word.size()) {
    std::size_t end = word.size();
    std::int32_t found = -1;
    while (end > start) {
      std::string piece = word.substr(start, end - start);
      if (start > 0) piece = "##" + piece;
      if (auto it = index_.find(piece); it != index_.end()) {
        found = it->second;
        break;
      }
      --end;
    }
    if (found < 0) return {unk_id()};
    out.push_back(found);
    start = end;
  }
  return out;
}

}  // namespace linkkit
