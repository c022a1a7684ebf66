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

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>

namespace gradw {

/// rows x cols grid as CSV, '.' decimal separator, LF line endings.
void write_grid_csv(std::ostream& os, std::size_t rows, std::size_t cols,
                    std::span<const double> values);
void write_grid_csv(const std::filesystem::path& path, std::size_t rows, std::size_t cols,
                    std::span<const double> values);

/// Binary 8-bit PGM (P5), linearly min-max scaled to 0..255. A constant grid
/// maps to mid-grey.
void write_pgm(const std::filesystem::path& path, std::size_t rows, std::size_t cols,
               std::span<const double> values);

}  // namespace gradw
