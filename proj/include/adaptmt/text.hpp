#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

// UTF-8 text helpers shared by retrieval, terminology and evaluation.
namespace adaptmt::text {

/// Decodes UTF-8. Invalid bytes decode to U+FFFD.
std::u32string decode_utf8(std::string_view s);
std::string encode_utf8(std::u32string_view s);
void append_utf8(std::string& out, char32_t cp);

/// Trims leading/trailing whitespace and collapses internal runs to one space.
std::string normalize_whitespace(std::string_view s);
std::string trim(std::string_view s);

/// Simple lowercase mapping: ASCII, Latin-1, Latin Extended-A pairs, Greek and
/// Cyrillic capitals. Other scripts are returned unchanged.
char32_t to_lower(char32_t cp);
std::string to_lower(std::string_view s);

bool is_space(char32_t cp);
/// ASCII punctuation, Latin-1 punctuation and the General Punctuation,
/// CJK Symbols and Arabic punctuation blocks.
bool is_punctuation(char32_t cp);

/// Whitespace split; empty tokens are never produced.
std::vector<std::string> split_whitespace(std::string_view s);
std::size_t word_count(std::string_view s);

/// Strips leading and trailing punctuation from a token.
std::string strip_punctuation(std::string_view token);

/// Whitespace tokens, edge punctuation stripped, lowercased. Tokens that were
/// only punctuation are dropped.
std::vector<std::string> match_tokens(std::string_view s);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

/// Splits on '\n', stripping a trailing '\r' from each line.
std::vector<std::string> split_lines(std::string_view s);

}  // namespace adaptmt::text
