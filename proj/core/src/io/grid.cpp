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

#include "gradw/io/grid.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <locale>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace gradw {

void write_grid_csv(std::ostream& os, std::size_t rows, std::size_t cols,
                    std::span<const double> values) {
  if (values.size() != rows * cols) throw std::invalid_argument("grid size mismatch");
  std::ostringstream ss;
  ss.imbue(std::locale::classic());
  ss << std::setprecision(9);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      if (c) ss << ',';
      ss << values[r * cols + c];
    }
    ss << '\n';
  }
  os << ss.str();
}

void write_grid_csv(const std::filesystem::path& path, std::size_t rows, std::size_t cols,
                    std::span<const double> values) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_grid_csv(os, rows, cols, values);
}

void write_pgm(const std::filesystem::path& path, std::size_t rows, std::size_t cols,
               std::span<const double> values) {
  if (values.size() != rows * cols) throw std::invalid_argument("grid size mismatch");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os << "P5\n" << cols << ' ' << rows << "\n255\n";
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double range = *hi - *lo;
  std::vector<unsigned char> px(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double u = range > 0.0 ? (values[i] - *lo) / range : 0.5;
    px[i] = static_cast<unsigned char>(std::lround(std::clamp(u, 0.0, 1.0) * 255.0));
  }
  os.write(reinterpret_cast<const char*>(px.data()), static_cast<std::streamsize>(px.size()));
}

}  // namespace gradw
