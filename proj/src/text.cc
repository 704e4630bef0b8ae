// Copyright 2026 The descnet Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "descnet/text.h"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace descnet {

std::size_t utf8_length(std::string_view text, std::size_t pos) {
  const auto c = static_cast<unsigned char>(text[pos]);
  std::size_t len = 1;
  if (c >= 0xF0 && c < 0xF8) {
    len = 4;
  } else if (c >= 0xE0) {
    len = c < 0xF0 ? 3 : 1;
  } else if (c >= 0xC0) {
    len = 2;
  }
  if (pos + len > text.size()) return 1;
  for (std::size_t i = 1; i < len; ++i) {
    if ((static_cast<unsigned char>(text[pos + i]) & 0xC0) != 0x80) return 1;
  }
  return len;
}

namespace {

uint32_t decode(std::string_view unit) {
  const auto b0 = static_cast<unsigned char>(unit[0]);
  switch (unit.size()) {
    case 2:
      return ((b0 & 0x1Fu) << 6) | (unit[1] & 0x3F);
    case 3:
      return ((b0 & 0x0Fu) << 12) | ((unit[1] & 0x3F) << 6) | (unit[2] & 0x3F);
    case 4:
      return ((b0 & 0x07u) << 18) | ((unit[1] & 0x3F) << 12) |
             ((unit[2] & 0x3F) << 6) | (unit[3] & 0x3F);
    default:
      return b0;
  }
}

bool is_combining(uint32_t cp) {
  return (cp >= 0x0300 && cp <= 0x036F) || (cp >= 0x1AB0 && cp <= 0x1AFF) ||
         (cp >= 0x1DC0 && cp <= 0x1DFF) || (cp >= 0x20D0 && cp <= 0x20FF) ||
         (cp >= 0xFE20 && cp <= 0xFE2F) || cp == 0x200D ||
         (cp >= 0xFE00 && cp <= 0xFE0F);
}

}  // namespace

std::vector<std::string> utf8_graphemes(std::string_view text) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t len = utf8_length(text, pos);
    std::string_view unit = text.substr(pos, len);
    if (!out.empty() && len > 1 && is_combining(decode(unit))) {
      out.back().append(unit);
    } else {
      out.emplace_back(unit);
    }
    pos += len;
  }
  return out;
}

bool is_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

std::string_view trim_left(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size() && is_space(s[i])) ++i;
  return s.substr(i);
}

std::string_view trim(std::string_view s) {
  s = trim_left(s);
  std::size_t n = s.size();
  while (n > 0 && is_space(s[n - 1])) --n;
  return s.substr(0, n);
}

std::vector<std::string> whitespace_tokenize(std::string_view text) {
  static constexpr std::string_view kTrailing = ",.;:!?";
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    while (pos < text.size() && is_space(text[pos])) ++pos;
    std::size_t end = pos;
    while (end < text.size() && !is_space(text[end])) ++end;
    if (end == pos) break;
    std::string_view word = text.substr(pos, end - pos);
    std::size_t cut = word.size();
    while (cut > 0 && kTrailing.find(word[cut - 1]) != std::string_view::npos) {
      --cut;
    }
    if (cut > 0) out.emplace_back(word.substr(0, cut));
    for (std::size_t i = cut; i < word.size(); ++i) out.emplace_back(1, word[i]);
    pos = end;
  }
  return out;
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t p = s.find(sep, start);
    if (p == std::string_view::npos) {
      out.emplace_back(s.substr(start));
      return out;
    }
    out.emplace_back(s.substr(start, p - start));
    start = p + 1;
  }
}

uint64_t fnv1a64(std::string_view data, uint64_t h) {
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw Error("write failed: " + path.string());
}

std::string file_digest(const std::filesystem::path& path) {
  // Two independent FNV lanes give a 128-bit digest.
  const std::string data = read_file(path);
  const uint64_t a = fnv1a64(data);
  const uint64_t b = fnv1a64(data, 0x84222325cbf29ce4ULL ^ data.size());
  return hex64(a) + hex64(b);
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string exact(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace descnet
