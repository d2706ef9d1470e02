#pragma once

#include <cstddef>
#include <string>
#include <string_view>

namespace aicl::unicode {

inline constexpr char32_t kReplacement = 0xFFFD;

/// Decodes one code point starting at `pos`, advancing it. Malformed input yields U+FFFD
/// and consumes a single byte.
char32_t decode(std::string_view s, std::size_t& pos) noexcept;

void append_utf8(std::string& out, char32_t cp);

/// Simple case mapping for ASCII, Latin-1, Latin Extended-A, Greek and Cyrillic.
char32_t to_lower(char32_t cp) noexcept;

/// Letters and digits. Code points outside the covered punctuation/symbol/space blocks count
/// as word characters, so CJK and other scripts are kept rather than dropped.
bool is_word_char(char32_t cp) noexcept;

bool is_space(char32_t cp) noexcept;

}  // namespace aicl::unicode
