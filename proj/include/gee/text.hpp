#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace gee {

/// Strict UTF-8 decode. Throws std::invalid_argument on malformed input
/// (overlong forms, surrogates, truncated sequences).
std::vector<char32_t> decode_utf8(std::string_view text);

std::string encode_utf8(char32_t cp);
std::string encode_utf8(const std::vector<char32_t>& codepoints);

bool is_valid_utf8(std::string_view text);

bool is_unicode_space(char32_t cp);

/// Unicode canonical composition (NFC).
std::string to_nfc(const std::string& text);

std::string trim(std::string_view text);

/// NFC, then internal whitespace runs collapsed to a single space, then
/// trimmed. Equality under this normalization decides erroneous vs correct.
std::string normalize_text(const std::string& text);

}  // namespace gee
