// Copyright 2026 The Fisher Probe Authors
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

#include <cctype>

#include "fisher_probe/datakit.hpp"

namespace fisher_probe::datakit {

namespace {

char lower(char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); }

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

bool is_punct(char c) {
  const auto u = static_cast<unsigned char>(c);
  return u < 0x80 && std::ispunct(u) != 0;
}

// Length of an HTML line break ("<br>", "<br/>", "<br />", any case) at
// position i of lowercased text, or 0.
std::size_t html_break_length(std::string_view s, std::size_t i) {
  if (s.substr(i, 3) != "<br") return 0;
  std::size_t j = i + 3;
  while (j < s.size() && (s[j] == ' ' || s[j] == '/')) ++j;
  return j < s.size() && s[j] == '>' ? j + 1 - i : 0;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::string lowered(text);
  for (char& c : lowered) c = lower(c);

  std::vector<std::string> tokens;
  std::string word;
  auto flush = [&] {
    if (!word.empty()) tokens.push_back(std::move(word));
    word.clear();
  };
  for (std::size_t i = 0; i < lowered.size();) {
    if (const std::size_t skip = html_break_length(lowered, i); skip > 0) {
      flush();
      i += skip;
      continue;
    }
    const char c = lowered[i];
    if (is_space(c)) {
      flush();
    } else if (is_punct(c)) {
      flush();
      tokens.emplace_back(1, c);
    } else {
      word.push_back(c);
    }
    ++i;
  }
  flush();
  return tokens;
}

std::string join_tokens(std::span<const std::string> tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

}  // namespace fisher_probe::datakit
