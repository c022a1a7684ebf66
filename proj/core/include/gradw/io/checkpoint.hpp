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
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "gradw/autodiff/params.hpp"

namespace gradw {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CheckpointTensor {
  std::string name;
  Shape shape;
  bool trainable = true;
  std::vector<float> values;

  bool operator==(const CheckpointTensor&) const = default;
};

/// "GWCKPT1\0", u32 LE metadata length, key=value metadata lines, then float32
/// LE tensor payloads in declaration order. Metadata keeps insertion order so
/// identical inputs serialize to identical bytes.
struct Checkpoint {
  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<CheckpointTensor> tensors;

  void set(const std::string& key, std::string value);
  std::optional<std::string> find(const std::string& key) const;
  const std::string& get(const std::string& key) const;  // throws CheckpointError

  bool operator==(const Checkpoint&) const = default;
};

inline constexpr int kCheckpointVersion = 1;

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& in);
Checkpoint read_checkpoint(const std::filesystem::path& path);

template <typename T>
void store_params(Checkpoint& ckpt, const ParamSet<T>& params);

/// Rebuilds values of `params` from the checkpoint. Names, order and shapes
/// must match exactly.
template <typename T>
void load_params(const Checkpoint& ckpt, ParamSet<T>& params);

}  // namespace gradw
