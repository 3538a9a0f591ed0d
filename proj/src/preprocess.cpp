#include "linkkit/preprocess.hpp"

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <sstream>
#include <unordered_set>

#include "json_util.hpp"
#include "linkkit/error.hpp"
#include "linkkit/log.hpp"

namespace linkkit {

const std::vector<std::string>& stop_words() {
  // English list as shipped with NLTK's stopwords corpus.
  static const std::vector<std::string> words = {
      "i", "me", "my", "myself", "we", "our", "ours", "ourselves", "you", "your", "yours",
      "yourself", "yourselves", "he", "him", "his", "himself", "she", "her", "hers", "herself",
      "it", "its", "itself", "they", "them", "their", "theirs", "themselves", "what", "which",
      "who", "whom", "this", "that", "these", "those", "am", "is", "are", "was", "were", "be",
      "been", "being", "have", "has", "had", "having", "do", "does", "did", "doing", "a", "an",
      "the", "and", "but", "if", "or", "because", "as", "until", "while", "of", "at", "by",
      "for", "with", "about", "against", "between", "into", "through", "during", "before",
      "after", "above", "below", "to", "from", "up", "down", "in", "out", "on", "off", "over",
      "under", "again", "further", "then", "once", "here", "there", "when", "where", "why",
      "how", "all", "any", "both", "each", "few", "more", "most", "other", "some", "such", "no",
      "nor", "not", "only", "own", "same", "so", "than", "too", "very", "s", "t", "can", "will",
      "just", "don", "should", "now", "d", "ll", "m", "o", "re", "ve", "y", "ain", "aren",
      "couldn", "didn", "doesn", "hadn", "hasn", "haven", "isn", "ma", "mightn", "mustn",
      "needn", "shan", "shouldn", "wasn", "weren", "won", "wouldn"};
  return words;
}

bool is_stop_word(std::string_view token) {
  static const std::unordered_set<std::string_view> set = [] {
    std::unordered_set<std::string_view> s;
    for (const auto& w : stop_words()) s.insert(w);
    return s;
  }();
  return set.count(token) > 0;
}

namespace {

// Bytes >= 0x80 belong to multi-byte UTF-8 sequences and stay inside words.
bool is_word_byte(unsigned char c) { return std::isalnum(c) || c >= 0x80; }

std::string lower_trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  std::string out(s.substr(b, e - b));
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

std::vector<std::string> word_tokens(std::string_view raw) {
  std::vector<std::string> out;
  std::string cur;
  for (std::size_t k = 0; k < raw.size(); ++k) {
    const auto c = static_cast<unsigned char>(raw[k]);
    if (c == 0xC3 && k + 1 < raw.size()) {
      // Latin-1 capitals U+00C0..U+00DE (minus the multiplication sign) fold like ASCII.
      auto next = static_cast<unsigned char>(raw[k + 1]);
      if (next >= 0x80 && next <= 0x9E && next != 0x97) next = static_cast<unsigned char>(next + 0x20);
      cur.push_back(static_cast<char>(c));
      cur.push_back(static_cast<char>(next));
      ++k;
    } else if (is_word_byte(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::string normalize_text(std::string_view raw) {
  std::string out;
  for (const std::string& tok : word_tokens(raw)) {
    if (is_stop_word(tok)) continue;
    if (!out.empty()) out.push_back(' ');
    out += tok;
  }
  return out;
}

const CategoryMaps& CategoryMaps::defaults() {
  static const CategoryMaps maps = [] {
    CategoryMaps m;
    m.issue_types = {{"bug", IssueType::bug},
                     {"defect", IssueType::bug},
                     {"new feature", IssueType::feature},
                     {"improvement", IssueType::feature},
                     {"enhancement", IssueType::feature},
                     {"feature request", IssueType::feature},
                     {"feature", IssueType::feature},
                     {"task", IssueType::task}};
    m.statuses = {{"closed", CommitStatus::closed},
                  {"fixed", CommitStatus::resolved},
                  {"done", CommitStatus::resolved},
                  {"resolved", CommitStatus::resolved},
                  {"complete", CommitStatus::resolved}};
    return m;
  }();
  return maps;
}

void CategoryMaps::apply_overrides(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string trimmed = lower_trim(line);
    if (trimmed.empty() || trimmed.front() == '#') continue;
    const auto eq = trimmed.rfind('=');
    if (eq == std::string::npos) {
      throw DataError("mapping line " + std::to_string(lineno) + ": expected raw=category");
    }
    const std::string raw = lower_trim(trimmed.substr(0, eq));
    const std::string cat = lower_trim(trimmed.substr(eq + 1));
    if (cat == "task" || cat == "feature" || cat == "bug") {
      issue_types[raw] = parse_issue_type(cat);
    } else if (cat == "closed" || cat == "resolved") {
      statuses[raw] = parse_commit_status(cat);
    } else {
      throw DataError("mapping line " + std::to_string(lineno) + ": unknown category '" + cat + "'");
    }
  }
}

CategoryMaps CategoryMaps::with_overrides(const std::filesystem::path& path) {
  CategoryMaps maps = defaults();
  maps.apply_overrides(detail::read_text_file(path));
  return maps;
}

IssueType normalize_issue_type(std::string_view type_raw, const CategoryMaps& maps) {
  const std::string key = lower_trim(type_raw);
  if (auto it = maps.issue_types.find(key); it != maps.issue_types.end()) return it->second;
  warn("unmapped issue type '" + std::string(type_raw) + "', using 'task'");
  return IssueType::task;
}

CommitStatus normalize_commit_status(std::string_view status_raw, const CategoryMaps& maps) {
  const std::string key = lower_trim(status_raw);
  if (auto it = maps.statuses.find(key); it != maps.statuses.end()) return it->second;
  warn("unmapped commit status '" + std::string(status_raw) + "', using 'closed'");
  return CommitStatus::closed;
}

namespace {

bool digits(std::string_view s, std::size_t pos, std::size_t n, int& out) {
  if (pos + n > s.size()) return false;
  int v = 0;
  for (std::size_t i = pos; i < pos + n; ++i) {
    if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
    v = v * 10 + (s[i] - '0');
  }
  out = v;
  return true;
}

}  // namespace

Date truncate_timestamp(std::string_view ts, std::string_view field) {
  auto fail = [&]() -> DataError {
    return DataError("field '" + std::string(field) + "': unparseable timestamp '" + std::string(ts) + "'");
  };
  Date day;
  try {
    if (ts.size() < 10) throw fail();
    day = Date::parse(ts.substr(0, 10));
  } catch (const DataError&) {
    throw fail();
  }
  if (ts.size() == 10) return day;
  if (ts[10] != 'T' && ts[10] != 't' && ts[10] != ' ') throw fail();

  int hh = 0, mi = 0, ss = 0;
  if (!digits(ts, 11, 2, hh) || ts.size() < 14 || ts[13] != ':' || !digits(ts, 14, 2, mi)) throw fail();
  std::size_t pos = 16;
  if (pos < ts.size() && ts[pos] == ':') {
    if (!digits(ts, pos + 1, 2, ss)) throw fail();
    pos += 3;
    if (pos < ts.size() && (ts[pos] == '.' || ts[pos] == ',')) {
      ++pos;
      const std::size_t start = pos;
      while (pos < ts.size() && std::isdigit(static_cast<unsigned char>(ts[pos]))) ++pos;
      if (pos == start) throw fail();
    }
  }
  if (hh > 24 || mi > 59 || ss > 60) throw fail();

  long offset_minutes = 0;
  if (pos < ts.size()) {
    const char sign = ts[pos];
    if ((sign == 'Z' || sign == 'z') && pos + 1 == ts.size()) {
      offset_minutes = 0;
    } else if (sign == '+' || sign == '-') {
      int oh = 0, om = 0;
      std::string_view rest = ts.substr(pos + 1);
      if (rest.size() == 5 && rest[2] == ':' && digits(rest, 0, 2, oh) && digits(rest, 3, 2, om)) {
      } else if (rest.size() == 4 && digits(rest, 0, 2, oh) && digits(rest, 2, 2, om)) {
      } else if (rest.size() == 2 && digits(rest, 0, 2, oh)) {
      } else {
        throw fail();
      }
      offset_minutes = (sign == '+' ? 1 : -1) * (oh * 60L + om);
    } else {
      throw fail();
    }
  }
  // Local wall time minus the offset gives UTC.
  const long local_minutes = day.day_number() * 1440L + hh * 60L + mi;
  const long utc_minutes = local_minutes - offset_minutes;
  long utc_day = utc_minutes / 1440L;
  if (utc_minutes < 0 && utc_minutes % 1440L != 0) --utc_day;
  return Date::from_day_number(utc_day);
}

void normalize_issue(Issue& issue, const CategoryMaps& maps) {
  issue.type_norm = normalize_issue_type(issue.type_raw, maps);
}

void normalize_commit(Commit& commit, const CategoryMaps& maps) {
  commit.status_norm = normalize_commit_status(commit.status_raw, maps);
}

const std::array<std::string_view, 12>& feature_names() {
  static constexpr std::array<std::string_view, 12> names = {
      "creator", "author", "committer", "closed", "resolved", "bug",
      "feature", "task", "committed_time", "authored_time", "created_date", "updated_date"};
  return names;
}

PairFeatures assemble_features(const Issue& issue, const Commit& commit) {
  PairFeatures f;
  f.creator = issue.creator;
  f.author = commit.author;
  f.committer = commit.committer;
  f.closed = commit.status_norm == CommitStatus::closed;
  f.resolved = commit.status_norm == CommitStatus::resolved;
  f.bug = issue.type_norm == IssueType::bug;
  f.feature = issue.type_norm == IssueType::feature;
  f.task = issue.type_norm == IssueType::task;
  f.committed_time = commit.committed_date;
  f.authored_time = commit.authored_date;
  f.created_date = issue.created_date;
  f.updated_date = issue.updated_date;
  return f;
}

namespace {

// FNV-1a, stable across platforms unlike std::hash.
std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

std::size_t one_hot_length(std::size_t identity_buckets) { return 5 + 3 * identity_buckets; }

std::vector<double> one_hot_encode(const Issue& issue, const Commit& commit, std::size_t identity_buckets) {
  std::vector<double> v(one_hot_length(identity_buckets), 0.0);
  const PairFeatures f = assemble_features(issue, commit);
  v[0] = f.bug;
  v[1] = f.feature;
  v[2] = f.task;
  v[3] = f.closed;
  v[4] = f.resolved;
  if (identity_buckets > 0) {
    const std::string ids[3] = {lower_trim(f.creator), lower_trim(f.author), lower_trim(f.committer)};
    for (std::size_t k = 0; k < 3; ++k) {
      v[5 + k * identity_buckets + fnv1a(ids[k]) % identity_buckets] = 1.0;
    }
  }
  return v;
}

}  // namespace linkkit
