#pragma once

// Word-level vocabulary with greedy WordPiece fallback for unseen words.
// Special tokens follow the encoder family: RoBERTa uses <s> ... </s></s>
// ... </s>, the BERT-style families use [CLS] ... [SEP] ... [SEP].

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace linkkit {

enum class EncoderFamily { roberta, distilbert, albert };

std::string_view to_string(EncoderFamily f);
EncoderFamily parse_encoder_family(std::string_view s);

struct SpecialTokens {
  std::string pad;
  std::string unk;
  std::string cls;
  /// One or more tokens placed between the two segments.
  std::vector<std::string> pair_sep;
  std::string eos;

  static SpecialTokens for_family(EncoderFamily f);
  /// The separator as it appears in serialized text, e.g. "</s></s>".
  std::string pair_sep_text() const;
};

/// Lower-cased words and single punctuation characters. Multi-byte UTF-8
/// sequences stay inside words.
std::vector<std::string> pre_tokenize(std::string_view text);

/// True for tokens made only of punctuation.
bool is_punctuation_token(std::string_view token);

class Tokenizer {
 public:
  Tokenizer() = default;

  /// Keeps words seen at least `min_freq` times (most frequent first, at
  /// most `max_words`), plus every character seen, in both word-initial and
  /// "##" continuation form.
  static Tokenizer build(EncoderFamily family, std::span<const std::vector<std::string>> documents,
                         std::size_t min_freq = 1, std::size_t max_words = 16000);

  static Tokenizer load(EncoderFamily family, const std::filesystem::path& vocab_file);
  void save(const std::filesystem::path& vocab_file) const;

  /// Sub-word ids of one pre-tokenized word.
  std::vector<std::int32_t> word_pieces(const std::string& word) const;

  std::int32_t id(const std::string& token) const;
  std::int32_t pad_id() const { return id(specials_.pad); }
  std::int32_t unk_id() const { return id(specials_.unk); }
  const std::string& token(std::int32_t id) const { return vocab_.at(static_cast<std::size_t>(id)); }

  std::size_t size() const { return vocab_.size(); }
  EncoderFamily family() const { return family_; }
  const SpecialTokens& specials() const { return specials_; }

 private:
  void add(const std::string& token);

  EncoderFamily family_ = EncoderFamily::roberta;
  SpecialTokens specials_ = SpecialTokens::for_family(EncoderFamily::roberta);
  std::vector<std::string> vocab_;
  std::unordered_map<std::string, std::int32_t> index_;
};

}  // namespace linkkit
