#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace framelens::text {

/// Decodes one UTF-8 code point at `pos`, advancing it. Invalid bytes decode
/// as U+FFFD and consume a single byte.
char32_t next_codepoint(std::string_view s, std::size_t& pos);

std::size_t codepoint_count(std::string_view s);

/// ASCII letters and digits, '_', and Latin letters in U+00C0..U+024F.
bool is_word_codepoint(char32_t c);

/// ASCII-only lowercasing; other bytes pass through untouched.
std::string ascii_lower(std::string_view s);

/// True when the whitespace-delimited chunk looks like a link: a
/// `scheme://` form, a `www.` prefix, or a known shortener host.
bool looks_like_url(std::string_view chunk);

/// Offset of the first URL inside `chunk`, or npos.
std::size_t find_url_start(std::string_view chunk);

/// Classifier tokenization: lowercased word runs, `<url>` for links,
/// `<user>` for @-mentions, `#tag` for hashtags.
std::vector<std::string> normalize_text(std::string_view text);

}  // namespace framelens::text
