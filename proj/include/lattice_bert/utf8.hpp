#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

namespace lattice_bert {

struct DecodeResult {
  std::u32string text;
  std::size_t invalid_bytes = 0;
};

// Decodes UTF-8, dropping every byte that does not start a well-formed
// sequence (overlongs, surrogates and values above U+10FFFF included).
inline DecodeResult decode_utf8(std::string_view bytes) {
  DecodeResult out;
  out.text.reserve(bytes.size());
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::size_t n = bytes.size();
  std::size_t i = 0;
  while (i < n) {
    const unsigned char b0 = p[i];
    if (b0 < 0x80) {
      out.text.push_back(b0);
      ++i;
      continue;
    }
    std::size_t len = 0;
    char32_t cp = 0;
    char32_t min_cp = 0;
    if ((b0 & 0xE0) == 0xC0) {
      len = 2, cp = b0 & 0x1F, min_cp = 0x80;
    } else if ((b0 & 0xF0) == 0xE0) {
      len = 3, cp = b0 & 0x0F, min_cp = 0x800;
    } else if ((b0 & 0xF8) == 0xF0) {
      len = 4, cp = b0 & 0x07, min_cp = 0x10000;
    }
    bool ok = len != 0 && i + len <= n;
    for (std::size_t k = 1; ok && k < len; ++k) {
      if ((p[i + k] & 0xC0) != 0x80) {
        ok = false;
      } else {
        cp = (cp << 6) | (p[i + k] & 0x3F);
      }
    }
    if (ok && (cp < min_cp || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF))) ok = false;
    if (!ok) {
      ++out.invalid_bytes;
      ++i;
      continue;
    }
    out.text.push_back(cp);
    i += len;
  }
  return out;
}

inline void append_utf8(std::string& out, char32_t cp) {
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
}

inline std::string to_utf8(std::u32string_view text) {
  std::string out;
  out.reserve(text.size() * 3);
  for (char32_t cp : text) append_utf8(out, cp);
  return out;
}

// Throws nothing; invalid bytes are dropped.
inline std::u32string from_utf8(std::string_view bytes) { return decode_utf8(bytes).text; }

// CJK ideographs: unified blocks, extensions A-G and the compatibility blocks.
constexpr bool is_chinese(char32_t c) noexcept {
  return (c >= 0x4E00 && c <= 0x9FFF) || (c >= 0x3400 && c <= 0x4DBF) ||
         (c >= 0xF900 && c <= 0xFAFF) || (c >= 0x20000 && c <= 0x2EBEF) ||
         (c >= 0x2F800 && c <= 0x2FA1F) || (c >= 0x30000 && c <= 0x3134F);
}

// Latin letters (ASCII, Latin-1, Latin Extended-A/B) and ASCII digits.
constexpr bool is_latin_alnum(char32_t c) noexcept {
  if ((c >= U'a' && c <= U'z') || (c >= U'A' && c <= U'Z') || (c >= U'0' && c <= U'9')) return true;
  if (c >= 0xC0 && c <= 0x24F) return c != 0xD7 && c != 0xF7;
  return false;
}

constexpr bool is_whitespace(char32_t c) noexcept {
  return c == U' ' || c == U'\t' || c == U'\n' || c == U'\r' || c == 0x0B || c == 0x0C ||
         c == 0x85 || c == 0xA0 || c == 0x1680 || (c >= 0x2000 && c <= 0x200A) || c == 0x2028 ||
         c == 0x2029 || c == 0x202F || c == 0x205F || c == 0x3000;
}

constexpr bool is_control(char32_t c) noexcept { return c < 0x20 || (c >= 0x7F && c <= 0x9F); }

constexpr char32_t to_lower_latin(char32_t c) noexcept {
  if (c >= U'A' && c <= U'Z') return c + 32;
  if (c >= 0xC0 && c <= 0xDE && c != 0xD7) return c + 32;
  return c;
}

struct NormalizedText {
  std::u32string text;
  std::size_t dropped_bytes = 0;
};

// Decodes, lowercases Latin letters, strips control characters and collapses
// whitespace runs into one space. Leading and trailing whitespace is removed.
inline NormalizedText normalize_text(std::string_view raw) {
  auto decoded = decode_utf8(raw);
  NormalizedText out;
  out.dropped_bytes = decoded.invalid_bytes;
  out.text.reserve(decoded.text.size());
  bool pending_space = false;
  for (char32_t c : decoded.text) {
    if (is_whitespace(c)) {
      pending_space = !out.text.empty();
      continue;
    }
    if (is_control(c) || c == 0xFEFF) continue;
    if (pending_space) {
      out.text.push_back(U' ');
      pending_space = false;
    }
    out.text.push_back(to_lower_latin(c));
  }
  return out;
}

}  // namespace lattice_bert
