// Copyright 2026 The gradw Authors
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

#pragma once

#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace gradw {

/// Strict parsers for the textual values used in configs and checkpoint
/// metadata. All throw std::invalid_argument naming the offending text.
std::size_t parse_size(std::string_view text);
double parse_double(std::string_view text);
std::vector<std::size_t> parse_size_list(std::string_view text);
std::vector<double> parse_double_list(std::string_view text);

template <std::size_t N>
std::array<std::size_t, N> parse_size_array(std::string_view text) {
  const auto v = parse_size_list(text);
  if (v.size() != N) {
    throw std::invalid_argument("expected " + std::to_string(N) + " comma-separated values, got '" +
                                std::string(text) + "'");
  }
  std::array<std::size_t, N> out{};
  for (std::size_t i = 0; i < N; ++i) out[i] = v[i];
  return out;
}

/// Shortest text that round-trips the double exactly.
std::string format_double(double v);

template <typename Range>
std::string join_sizes(const Range& r) {
  std::string out;
  for (auto v : r) out += (out.empty() ? "" : ",") + std::to_string(v);
  return out;
}
std::string join_doubles(const std::vector<double>& v);

}  // namespace gradw
