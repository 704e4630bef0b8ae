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

// Small text, hashing and formatting helpers shared by all modules.

#ifndef DESCNET_TEXT_H_
#define DESCNET_TEXT_H_

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace descnet {

// All library errors are reported with this exception type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Splits UTF-8 text into user-perceived characters: one code point plus any
// following combining marks. Invalid bytes are kept as single units.
std::vector<std::string> utf8_graphemes(std::string_view text);

// Byte length of the UTF-8 sequence starting at text[pos].
std::size_t utf8_length(std::string_view text, std::size_t pos);

std::string_view trim_left(std::string_view s);
std::string_view trim(std::string_view s);
bool is_space(unsigned char c);

// Splits on ASCII whitespace and separates trailing ASCII punctuation
// (",.;:!?") into tokens of their own.
std::vector<std::string> whitespace_tokenize(std::string_view text);

std::vector<std::string> split(std::string_view s, char sep);

uint64_t fnv1a64(std::string_view data, uint64_t h = 0xcbf29ce484222325ULL);
std::string hex64(uint64_t v);

// Hex digest of a file's bytes. Throws if the file cannot be read.
std::string file_digest(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view data);

// Fixed-point rendering used in every report so outputs are byte-stable.
std::string fixed(double v, int digits = 6);
// Round-trip rendering ("%.17g").
std::string exact(double v);

}  // namespace descnet

#endif  // DESCNET_TEXT_H_
