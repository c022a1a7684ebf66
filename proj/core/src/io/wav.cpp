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

#include "gradw/io/wav.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace gradw {
namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                              static_cast<char>((v >> 16) & 0xff),
                              static_cast<char>((v >> 24) & 0xff)};
  os.write(b.data(), 4);
}

void put_u16(std::ostream& os, std::uint16_t v) {
  const std::array<char, 2> b{static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff)};
  os.write(b.data(), 2);
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t get_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::int16_t to_pcm(float v) {
  const double s = std::clamp(static_cast<double>(v), -1.0, 1.0) * 32767.0;
  return static_cast<std::int16_t>(std::lround(s));
}

}  // namespace

void write_wav(std::ostream& os, const Waveform& w) {
  validate(w);
  const auto data_bytes = static_cast<std::uint32_t>(w.size() * 2);
  os.write("RIFF", 4);
  put_u32(os, 36 + data_bytes);
  os.write("WAVE", 4);
  os.write("fmt ", 4);
  put_u32(os, 16);
  put_u16(os, 1);  // PCM
  put_u16(os, 1);  // mono
  put_u32(os, static_cast<std::uint32_t>(w.sample_rate));
  put_u32(os, static_cast<std::uint32_t>(w.sample_rate) * 2);
  put_u16(os, 2);
  put_u16(os, 16);
  os.write("data", 4);
  put_u32(os, data_bytes);
  for (float v : w.samples) put_u16(os, static_cast<std::uint16_t>(to_pcm(v)));
  if (!os) throw std::runtime_error("failed writing WAV data");
}

void write_wav(const std::filesystem::path& path, const Waveform& w) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_wav(os, w);
}

Waveform read_wav(std::istream& is) {
  std::array<unsigned char, 44> h{};
  if (!is.read(reinterpret_cast<char*>(h.data()), 44)) {
    throw std::runtime_error("WAV: truncated header");
  }
  if (std::memcmp(h.data(), "RIFF", 4) != 0 || std::memcmp(h.data() + 8, "WAVE", 4) != 0 ||
      std::memcmp(h.data() + 12, "fmt ", 4) != 0 || std::memcmp(h.data() + 36, "data", 4) != 0) {
    throw std::runtime_error("WAV: not a canonical 44-byte RIFF/WAVE header");
  }
  if (get_u16(h.data() + 20) != 1 || get_u16(h.data() + 22) != 1 || get_u16(h.data() + 34) != 16) {
    throw std::runtime_error("WAV: only mono 16-bit PCM is supported");
  }
  Waveform w;
  w.sample_rate = static_cast<int>(get_u32(h.data() + 24));
  const std::uint32_t bytes = get_u32(h.data() + 40);
  std::vector<unsigned char> raw(bytes);
  if (!is.read(reinterpret_cast<char*>(raw.data()), bytes)) {
    throw std::runtime_error("WAV: truncated sample data");
  }
  w.samples.resize(bytes / 2);
  for (std::size_t i = 0; i < w.samples.size(); ++i) {
    const auto s = static_cast<std::int16_t>(get_u16(raw.data() + 2 * i));
    w.samples[i] = static_cast<float>(s / 32767.0);
  }
  validate(w);
  return w;
}

Waveform read_wav(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  return read_wav(is);
}

Waveform quantize_pcm16(const Waveform& w) {
  Waveform out = w;
  for (auto& v : out.samples) v = static_cast<float>(to_pcm(v) / 32767.0);
  return out;
}

}  // namespace gradw
