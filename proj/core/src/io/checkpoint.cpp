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

#include "gradw/io/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace gradw {
namespace {

constexpr std::array<char, 8> kMagic{'G', 'W', 'C', 'K', 'P', 'T', '1', '\0'};
constexpr std::string_view kTensorKey = "tensor";

void put_u32(std::ostream& out, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                              static_cast<char>((v >> 16) & 0xff),
                              static_cast<char>((v >> 24) & 0xff)};
  out.write(b.data(), 4);
}

std::uint32_t get_u32(std::istream& in) {
  std::array<unsigned char, 4> b{};
  if (!in.read(reinterpret_cast<char*>(b.data()), 4)) throw CheckpointError("checkpoint truncated");
  return b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::string shape_text(const Shape& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "x" : "") + std::to_string(s[i]);
  return out;
}

Shape parse_shape(const std::string& text) {
  Shape s;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, 'x')) s.push_back(std::stoull(part));
  return s;
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, sep)) out.push_back(part);
  return out;
}

}  // namespace

void Checkpoint::set(const std::string& key, std::string value) {
  if (key.empty() || key == kTensorKey || key.find_first_of("=\n") != std::string::npos ||
      value.find('\n') != std::string::npos) {
    throw CheckpointError("invalid metadata key '" + key + "'");
  }
  for (auto& [k, v] : meta) {
    if (k == key) {
      v = std::move(value);
      return;
    }
  }
  meta.emplace_back(key, std::move(value));
}

std::optional<std::string> Checkpoint::find(const std::string& key) const {
  for (const auto& [k, v] : meta) {
    if (k == key) return v;
  }
  return std::nullopt;
}

const std::string& Checkpoint::get(const std::string& key) const {
  for (const auto& [k, v] : meta) {
    if (k == key) return v;
  }
  throw CheckpointError("checkpoint metadata lacks '" + key + "'");
}

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  std::string text = "format_version=" + std::to_string(kCheckpointVersion) + "\n";
  for (const auto& [k, v] : ckpt.meta) {
    if (k != "format_version") text += k + "=" + v + "\n";
  }
  std::size_t offset = 0;
  for (const auto& t : ckpt.tensors) {
    if (t.values.size() != numel(t.shape)) {
      throw CheckpointError("tensor '" + t.name + "' size does not match its shape");
    }
    text += std::string(kTensorKey) + "=" + t.name + ";" + shape_text(t.shape) + ";" +
            std::to_string(offset) + ";" + std::to_string(t.values.size()) + ";" +
            (t.trainable ? "1" : "0") + "\n";
    offset += t.values.size();
  }
  out.write(kMagic.data(), kMagic.size());
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& t : ckpt.tensors) {
    for (float v : t.values) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  if (!out) throw CheckpointError("checkpoint write failed");
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot open " + path.string() + " for writing");
  write_checkpoint(out, ckpt);
}

Checkpoint read_checkpoint(std::istream& in) {
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
    throw CheckpointError("not a GWCKPT1 checkpoint");
  }
  const std::uint32_t len = get_u32(in);
  std::string text(len, '\0');
  if (!in.read(text.data(), len)) throw CheckpointError("checkpoint truncated");

  Checkpoint ckpt;
  std::vector<std::size_t> offsets;
  for (const auto& line : split(text, '\n')) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw CheckpointError("bad metadata line: " + line);
    const std::string key = line.substr(0, eq), value = line.substr(eq + 1);
    if (key != kTensorKey) {
      ckpt.meta.emplace_back(key, value);
      continue;
    }
    const auto f = split(value, ';');
    if (f.size() != 5) throw CheckpointError("bad tensor entry: " + value);
    CheckpointTensor t{f[0], parse_shape(f[1]), f[4] == "1", {}};
    t.values.resize(std::stoull(f[3]));
    if (t.values.size() != numel(t.shape)) throw CheckpointError("bad tensor entry: " + value);
    offsets.push_back(std::stoull(f[2]));
    ckpt.tensors.push_back(std::move(t));
  }
  if (ckpt.get("format_version") != std::to_string(kCheckpointVersion)) {
    throw CheckpointError("unsupported checkpoint version " + ckpt.get("format_version"));
  }
  std::size_t offset = 0;
  for (std::size_t i = 0; i < ckpt.tensors.size(); ++i) {
    if (offsets[i] != offset) throw CheckpointError("tensor offsets out of order");
    for (float& v : ckpt.tensors[i].values) v = std::bit_cast<float>(get_u32(in));
    offset += ckpt.tensors[i].values.size();
  }
  return ckpt;
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  return read_checkpoint(in);
}

template <typename T>
void store_params(Checkpoint& ckpt, const ParamSet<T>& params) {
  for (const auto& p : params) {
    CheckpointTensor t{p.name, p.value.shape(), p.trainable, {}};
    t.values.reserve(p.value.size());
    for (T v : p.value.values()) t.values.push_back(static_cast<float>(v));
    ckpt.tensors.push_back(std::move(t));
  }
}

template <typename T>
void load_params(const Checkpoint& ckpt, ParamSet<T>& params) {
  if (ckpt.tensors.size() != params.size()) {
    throw CheckpointError("checkpoint holds " + std::to_string(ckpt.tensors.size()) +
                          " tensors, model expects " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& t = ckpt.tensors[i];
    auto& p = params[i];
    if (t.name != p.name || t.shape != p.value.shape()) {
      throw CheckpointError("checkpoint tensor '" + t.name + "' does not match model entry '" +
                            p.name + "'");
    }
    for (std::size_t k = 0; k < t.values.size(); ++k) p.value[k] = static_cast<T>(t.values[k]);
  }
}

template void store_params(Checkpoint&, const ParamSet<float>&);
template void store_params(Checkpoint&, const ParamSet<double>&);
template void load_params(const Checkpoint&, ParamSet<float>&);
template void load_params(const Checkpoint&, ParamSet<double>&);

}  // namespace gradw
