#include "mqud/util/text.hpp"

#include <algorithm>
#include <iterator>
#include <cctype>

namespace mqud::text {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

bool is_token_char(char c) {
  auto u = static_cast<unsigned char>(c);
  return std::isalnum(u) != 0 || u >= 0x80;
}

constexpr std::string_view kStopwordList[] = {
    "a",       "about",   "above",  "after",  "again",   "against", "all",    "also",
    "am",      "an",      "and",    "any",    "are",     "as",      "at",     "be",
    "because", "been",    "before", "being",  "below",   "between", "both",   "but",
    "by",      "can",     "could",  "did",    "do",      "does",    "doing",  "down",
    "during",  "each",    "few",    "for",    "from",    "further", "had",    "has",
    "have",    "having",  "he",     "her",    "here",    "hers",    "him",    "his",
    "how",     "i",       "if",     "in",     "into",    "is",      "it",     "its",
    "itself",  "just",    "may",    "me",     "might",   "more",    "most",   "my",
    "no",      "nor",     "not",    "now",    "of",      "off",     "on",     "once",
    "only",    "or",      "other",  "our",    "ours",    "out",     "over",   "own",
    "same",    "she",     "should", "so",     "some",    "such",    "than",   "that",
    "the",     "their",   "theirs", "them",   "then",    "there",   "these",  "they",
    "this",    "those",   "through", "to",    "too",     "under",   "until",  "up",
    "very",    "was",     "we",     "were",   "what",    "when",    "where",  "which",
    "while",   "who",     "whom",   "why",    "will",    "with",    "within", "would",
    "you",     "your",    "yours",  "yourself", "yourselves", "versus", "vs",
};

const std::vector<std::string_view>& stopwords() {
  static const std::vector<std::string_view> sorted = [] {
    std::vector<std::string_view> v(std::begin(kStopwordList), std::end(kStopwordList));
    std::sort(v.begin(), v.end());
    return v;
  }();
  return sorted;
}

}  // namespace

std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string_view trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return s.substr(b, e - b);
}

std::string collapse_whitespace(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending = false;
  for (char c : s) {
    if (is_space(c)) {
      pending = !out.empty();
    } else {
      if (pending) out.push_back(' ');
      pending = false;
      out.push_back(c);
    }
  }
  return out;
}

std::vector<std::string> split_words(std::string_view s) {
  std::vector<std::string> words;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && is_space(s[i])) ++i;
    std::size_t j = i;
    while (j < s.size() && !is_space(s[j])) ++j;
    if (j > i) words.emplace_back(s.substr(i, j - i));
    i = j;
  }
  return words;
}

std::size_t word_count(std::string_view s) {
  std::size_t n = 0;
  bool in_word = false;
  for (char c : s) {
    if (is_space(c)) {
      in_word = false;
    } else if (!in_word) {
      in_word = true;
      ++n;
    }
  }
  return n;
}

std::vector<std::string> alnum_tokens(std::string_view s) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char c : s) {
    if (is_token_char(c)) {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

std::set<std::string> token_set(std::string_view s) {
  auto tokens = alnum_tokens(s);
  return {tokens.begin(), tokens.end()};
}

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
  if (a.empty() && b.empty()) return 1.0;
  std::size_t inter = 0;
  for (const auto& t : a) inter += b.count(t);
  const std::size_t uni = a.size() + b.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

bool is_stopword(std::string_view lowered_token) {
  const auto& words = stopwords();
  return std::binary_search(words.begin(), words.end(), lowered_token);
}

std::set<std::string> content_tokens(std::string_view s) {
  std::set<std::string> out;
  for (auto& t : alnum_tokens(s)) {
    if (is_stopword(t)) continue;
    if (std::all_of(t.begin(), t.end(), [](unsigned char c) { return std::isdigit(c); })) continue;
    out.insert(std::move(t));
  }
  return out;
}

std::string normalize_question(std::string_view s) { return join(alnum_tokens(s), " "); }

std::vector<std::string> split_sentences(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if ((c == '.' || c == '!' || c == '?') && (i + 1 == s.size() || is_space(s[i + 1]))) {
      auto sentence = trim(s.substr(start, i + 1 - start));
      if (!sentence.empty()) out.emplace_back(sentence);
      start = i + 1;
    }
  }
  auto tail = trim(s.substr(std::min(start, s.size())));
  if (!tail.empty()) out.emplace_back(tail);
  return out;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out.append(sep);
    out.append(parts[i]);
  }
  return out;
}

bool starts_with_icase(std::string_view s, std::string_view prefix) {
  if (prefix.size() > s.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(s[i])) !=
        std::tolower(static_cast<unsigned char>(prefix[i])))
      return false;
  }
  return true;
}

bool contains_icase(std::string_view haystack, std::string_view needle) {
  return to_lower(haystack).find(to_lower(needle)) != std::string::npos;
}

}  // namespace mqud::text
