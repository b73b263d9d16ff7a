#include "gee/text.hpp"

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include <stdexcept>

namespace gee {

namespace {

// Returns the number of continuation bytes expected after `lead`, or -1 for
// an invalid lead byte.
int utf8_sequence_length(unsigned char lead) {
  if (lead < 0x80) return 0;
  if ((lead & 0xE0) == 0xC0) return 1;
  if ((lead & 0xF0) == 0xE0) return 2;
  if ((lead & 0xF8) == 0xF0) return 3;
  return -1;
}

}  // namespace

std::vector<char32_t> decode_utf8(std::string_view text) {
  std::vector<char32_t> out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    const auto lead = static_cast<unsigned char>(text[i]);
    const int cont = utf8_sequence_length(lead);
    if (cont < 0) throw std::invalid_argument("invalid UTF-8 lead byte");
    if (i + static_cast<std::size_t>(cont) >= text.size()) {
      throw std::invalid_argument("truncated UTF-8 sequence");
    }
    char32_t cp = 0;
    if (cont == 0) {
      cp = lead;
    } else {
      cp = lead & (0x3F >> cont);
      for (int k = 1; k <= cont; ++k) {
        const auto b = static_cast<unsigned char>(text[i + k]);
        if ((b & 0xC0) != 0x80) throw std::invalid_argument("invalid UTF-8 continuation byte");
        cp = (cp << 6) | (b & 0x3F);
      }
      // Reject overlong encodings and surrogate/out-of-range codepoints.
      static constexpr char32_t kMin[4] = {0, 0x80, 0x800, 0x10000};
      if (cp < kMin[cont]) throw std::invalid_argument("overlong UTF-8 encoding");
      if (cp >= 0xD800 && cp <= 0xDFFF) throw std::invalid_argument("UTF-8 encoded surrogate");
      if (cp > 0x10FFFF) throw std::invalid_argument("codepoint out of range");
    }
    out.push_back(cp);
    i += static_cast<std::size_t>(cont) + 1;
  }
  return out;
}

std::string encode_utf8(char32_t cp) {
  std::string out;
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
  return out;
}

std::string encode_utf8(const std::vector<char32_t>& codepoints) {
  std::string out;
  out.reserve(codepoints.size());
  for (char32_t cp : codepoints) out += encode_utf8(cp);
  return out;
}

bool is_valid_utf8(std::string_view text) {
  try {
    decode_utf8(text);
    return true;
  } catch (const std::invalid_argument&) {
    return false;
  }
}

bool is_unicode_space(char32_t cp) {
  return u_isUWhiteSpace(static_cast<UChar32>(cp)) != 0;
}

std::string to_nfc(const std::string& text) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* nfc = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) throw std::runtime_error("ICU NFC normalizer unavailable");
  icu::UnicodeString source = icu::UnicodeString::fromUTF8(text);
  icu::UnicodeString normalized = nfc->normalize(source, status);
  if (U_FAILURE(status)) throw std::runtime_error("NFC normalization failed");
  std::string out;
  normalized.toUTF8String(out);
  return out;
}

std::string trim(std::string_view text) {
  const auto cps = decode_utf8(text);
  std::size_t begin = 0;
  std::size_t end = cps.size();
  while (begin < end && is_unicode_space(cps[begin])) ++begin;
  while (end > begin && is_unicode_space(cps[end - 1])) --end;
  std::string out;
  for (std::size_t i = begin; i < end; ++i) out += encode_utf8(cps[i]);
  return out;
}

std::string normalize_text(const std::string& text) {
  const auto cps = decode_utf8(to_nfc(text));
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  bool seen_content = false;
  for (char32_t cp : cps) {
    if (is_unicode_space(cp)) {
      pending_space = seen_content;
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    seen_content = true;
    out += encode_utf8(cp);
  }
  return out;
}

}  // namespace gee
