#include "framelens/text.hpp"

#include <array>
#include <cctype>

namespace framelens::text {

namespace {

constexpr std::array<std::string_view, 12> kShorteners = {
    "t.co/",  "bit.ly/", "goo.gl/",  "ow.ly/",  "tinyurl.com/", "buff.ly/",
    "dlvr.it/", "ift.tt/", "youtu.be/", "fb.me/", "trib.al/",     "wp.me/"};

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

std::vector<std::string_view> split_whitespace(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && is_space(s[i])) ++i;
    const std::size_t start = i;
    while (i < s.size() && !is_space(s[i])) ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

// Length in bytes of the leading run of word code points.
std::size_t word_prefix(std::string_view s) {
  std::size_t pos = 0;
  while (pos < s.size()) {
    std::size_t next = pos;
    if (!is_word_codepoint(next_codepoint(s, next))) break;
    pos = next;
  }
  return pos;
}

void append_word_runs(std::string_view s, std::vector<std::string>& out) {
  std::size_t pos = 0;
  while (pos < s.size()) {
    std::size_t next = pos;
    if (!is_word_codepoint(next_codepoint(s, next))) {
      pos = next;
      continue;
    }
    const std::size_t len = word_prefix(s.substr(pos));
    out.push_back(ascii_lower(s.substr(pos, len)));
    pos += len;
  }
}

void append_chunk(std::string_view chunk, std::vector<std::string>& out) {
  while (!chunk.empty()) {
    const std::size_t url = find_url_start(chunk);
    if (url == 0) {
      out.emplace_back("<url>");
      return;
    }
    if (chunk.front() == '@' || chunk.front() == '#') {
      const std::size_t len = word_prefix(chunk.substr(1));
      if (len > 0) {
        out.push_back(chunk.front() == '@' ? std::string("<user>")
                                           : "#" + ascii_lower(chunk.substr(1, len)));
        chunk.remove_prefix(1 + len);
        continue;
      }
    }
    // Plain text up to the next marker, URL or end of chunk.
    std::size_t stop = chunk.size();
    if (url != std::string_view::npos) stop = url;
    for (std::size_t i = 1; i < stop; ++i) {
      if ((chunk[i] == '@' || chunk[i] == '#') && !is_word_codepoint(static_cast<unsigned char>(chunk[i - 1]))) {
        stop = i;
        break;
      }
    }
    append_word_runs(chunk.substr(0, stop), out);
    chunk.remove_prefix(stop);
  }
}

}  // namespace

char32_t next_codepoint(std::string_view s, std::size_t& pos) {
  const auto b0 = static_cast<unsigned char>(s[pos]);
  if (b0 < 0x80) {
    ++pos;
    return b0;
  }
  int extra = 0;
  char32_t cp = 0;
  if ((b0 & 0xE0) == 0xC0) {
    extra = 1;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    extra = 2;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    extra = 3;
    cp = b0 & 0x07;
  } else {
    ++pos;
    return 0xFFFD;
  }
  if (pos + extra >= s.size()) {
    ++pos;
    return 0xFFFD;
  }
  for (int k = 1; k <= extra; ++k) {
    const auto b = static_cast<unsigned char>(s[pos + k]);
    if ((b & 0xC0) != 0x80) {
      ++pos;
      return 0xFFFD;
    }
    cp = (cp << 6) | (b & 0x3F);
  }
  pos += 1 + extra;
  return cp;
}

std::size_t codepoint_count(std::string_view s) {
  std::size_t n = 0;
  for (std::size_t pos = 0; pos < s.size(); ++n) next_codepoint(s, pos);
  return n;
}

bool is_word_codepoint(char32_t c) {
  if (c < 0x80) return std::isalnum(static_cast<int>(c)) || c == '_';
  return c >= 0xC0 && c <= 0x24F && c != 0xD7 && c != 0xF7;
}

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

std::size_t find_url_start(std::string_view chunk) {
  const std::string lower = ascii_lower(chunk);
  std::size_t best = std::string_view::npos;
  if (const auto scheme = lower.find("://"); scheme != std::string::npos && scheme > 0) {
    std::size_t start = scheme;
    while (start > 0 && (std::isalnum(static_cast<unsigned char>(lower[start - 1])) ||
                         lower[start - 1] == '+' || lower[start - 1] == '.' || lower[start - 1] == '-')) {
      --start;
    }
    if (start < scheme && std::isalpha(static_cast<unsigned char>(lower[start]))) best = start;
  }
  auto consider = [&](std::string_view needle) {
    for (std::size_t at = lower.find(needle); at != std::string::npos; at = lower.find(needle, at + 1)) {
      // Must begin a word so "reddit.com/" does not match "t.co/"-like suffixes.
      if (at == 0 || !std::isalnum(static_cast<unsigned char>(lower[at - 1]))) {
        if (at < best) best = at;
        return;
      }
    }
  };
  consider("www.");
  for (auto s : kShorteners) consider(s);
  return best;
}

bool looks_like_url(std::string_view chunk) { return find_url_start(chunk) != std::string_view::npos; }

std::vector<std::string> normalize_text(std::string_view input) {
  std::vector<std::string> out;
  for (auto chunk : split_whitespace(input)) append_chunk(chunk, out);
  return out;
}

}  // namespace framelens::text
