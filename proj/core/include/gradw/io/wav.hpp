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

#include <filesystem>
#include <iosfwd>

#include "gradw/dsp/waveform.hpp"

namespace gradw {

/// Canonical 44-byte-header mono PCM16 little-endian WAV.
void write_wav(std::ostream& os, const Waveform& w);
void write_wav(const std::filesystem::path& path, const Waveform& w);
Waveform read_wav(std::istream& is);
Waveform read_wav(const std::filesystem::path& path);

/// Rounds samples to the PCM16 grid, as a write/read round trip would.
Waveform quantize_pcm16(const Waveform& w);

}  // namespace gradw
