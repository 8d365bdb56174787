#pragma once

#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace mqud::text {

std::string to_lower(std::string_view s);
std::string_view trim(std::string_view s);
std::string collapse_whitespace(std::string_view s);

/// Whitespace-delimited word count.
std::size_t word_count(std::string_view s);
std::vector<std::string> split_words(std::string_view s);

/// Lowercased runs of ASCII alphanumerics. Bytes >= 0x80 are kept inside
/// tokens so UTF-8 words are not split.
std::vector<std::string> alnum_tokens(std::string_view s);
std::set<std::string> token_set(std::string_view s);

/// |a ∩ b| / |a ∪ b|; two empty sets have similarity 1.
double jaccard(const std::set<std::string>& a, const std::set<std::string>& b);

bool is_stopword(std::string_view lowered_token);

/// Content tokens: alnum tokens that are not stopwords and not pure digits.
std::set<std::string> content_tokens(std::string_view s);

/// Alnum tokens joined by single spaces; the canonical form used for IDs.
std::string normalize_question(std::string_view s);

/// Naive sentence splitter on [.!?] followed by whitespace.
std::vector<std::string> split_sentences(std::string_view s);

std::string join(const std::vector<std::string>& parts, std::string_view sep);
bool starts_with_icase(std::string_view s, std::string_view prefix);
bool contains_icase(std::string_view haystack, std::string_view needle);

}  // namespace mqud::text
