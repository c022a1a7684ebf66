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

#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "gradw/common/config_text.hpp"
#include "gradw/dsp/synth.hpp"
#include "gradw/io/checkpoint.hpp"
#include "gradw/io/grid.hpp"
#include "gradw/io/wav.hpp"

using namespace gradw;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
  auto dir = fs::temp_directory_path() / "gradw_test_io";
  fs::create_directories(dir);
  return dir;
}

Checkpoint sample_checkpoint() {
  Checkpoint c;
  c.set("kind", "test");
  c.set("seed", "17");
  c.tensors.push_back({"a.weight", {2, 3}, true, {1, -2, 3.5f, 0, 1e-30f, -7}});
  c.tensors.push_back({"a.running_mean", {3}, false, {0.25f, 0.5f, 0.75f}});
  return c;
}

}  // namespace

TEST_CASE("wav round trip") {
  Waveform w = synth_utterance(2, 0.3, 9);
  std::stringstream ss;
  write_wav(ss, w);
  CHECK(ss.str().size() == 44 + 2 * w.size());
  CHECK(ss.str().substr(0, 4) == "RIFF");
  auto back = read_wav(ss);
  CHECK(back == quantize_pcm16(w));
  CHECK(back.sample_rate == 16000);
  for (std::size_t i = 0; i < w.size(); ++i) REQUIRE(std::abs(back.samples[i] - w.samples[i]) <= 1.0f / 32767);

  const auto path = scratch_dir() / "rt.wav";
  write_wav(path, back);
  CHECK(read_wav(path) == back);

  std::stringstream junk("RIFX not a wav file at all, padding padding padding");
  CHECK_THROWS(read_wav(junk));
  std::string truncated = ss.str().substr(0, 60);
  std::stringstream t(truncated);
  CHECK_THROWS(read_wav(t));
}

TEST_CASE("wav clips out-of-range samples") {
  Waveform w{{2.0f, -3.0f, 0.5f}, 16000};
  auto q = quantize_pcm16(w);
  CHECK(q.samples[0] == doctest::Approx(1.0f));
  CHECK(q.samples[1] >= -1.0f - 1e-6f);
}

TEST_CASE("grid csv") {
  std::ostringstream os;
  const std::vector<double> v{1.0, 0.5, -2.0, 0.125, 1e-3, 3.0};
  write_grid_csv(os, 2, 3, v);
  std::istringstream in(os.str());
  std::string line;
  std::vector<double> back;
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    CHECK(line.find('\r') == std::string::npos);
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) back.push_back(std::stod(cell));
  }
  CHECK(rows == 2);
  CHECK(back == v);
  CHECK_THROWS(write_grid_csv(os, 2, 2, v));
}

TEST_CASE("pgm") {
  const auto path = scratch_dir() / "g.pgm";
  write_pgm(path, 2, 2, std::vector<double>{0, 1, 2, 3});
  std::ifstream in(path, std::ios::binary);
  std::string magic;
  int w, h, maxv;
  in >> magic >> w >> h >> maxv;
  in.get();
  CHECK(magic == "P5");
  CHECK(w == 2);
  CHECK(h == 2);
  CHECK(maxv == 255);
  std::string px(4, '\0');
  in.read(px.data(), 4);
  CHECK(static_cast<unsigned char>(px[0]) == 0);
  CHECK(static_cast<unsigned char>(px[3]) == 255);
}

TEST_CASE("checkpoint round trip is exact") {
  const auto c = sample_checkpoint();
  std::stringstream ss;
  write_checkpoint(ss, c);
  const std::string bytes = ss.str();
  CHECK(bytes.substr(0, 7) == "GWCKPT1");
  auto back = read_checkpoint(ss);
  CHECK(back.tensors == c.tensors);
  CHECK(back.get("kind") == "test");
  CHECK(back.get("format_version") == "1");
  CHECK_FALSE(back.find("missing").has_value());
  CHECK_THROWS_AS(back.get("missing"), CheckpointError);

  std::stringstream again;
  write_checkpoint(again, c);
  CHECK(again.str() == bytes);

  const auto path = scratch_dir() / "c.ckpt";
  write_checkpoint(path, c);
  CHECK(read_checkpoint(path).tensors == c.tensors);
}

TEST_CASE("checkpoint rejects damage") {
  std::stringstream ss;
  write_checkpoint(ss, sample_checkpoint());
  std::string bytes = ss.str();
  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  std::stringstream a(bad_magic);
  CHECK_THROWS_AS(read_checkpoint(a), CheckpointError);
  std::stringstream b(bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS_AS(read_checkpoint(b), CheckpointError);
  CHECK_THROWS_AS(read_checkpoint(scratch_dir() / "does_not_exist.ckpt"), CheckpointError);
  Checkpoint c;
  CHECK_THROWS_AS(c.set("bad=key", "v"), CheckpointError);
}

TEST_CASE("store_params and load_params") {
  ParamSet<float> p;
  p.add("w", Tensor<float>({2, 2}, std::vector<float>{1, 2, 3, 4}));
  p.add("rm", Tensor<float>({2}, std::vector<float>{5, 6}), false);
  Checkpoint c;
  store_params(c, p);
  CHECK(c.tensors.size() == 2);
  CHECK_FALSE(c.tensors[1].trainable);

  ParamSet<double> q;
  q.add("w", Tensor<double>({2, 2}));
  q.add("rm", Tensor<double>({2}), false);
  load_params(c, q);
  CHECK(q[0].value[3] == 4.0);
  CHECK(q[1].value[1] == 6.0);

  ParamSet<float> wrong_shape;
  wrong_shape.add("w", Tensor<float>({4}));
  wrong_shape.add("rm", Tensor<float>({2}), false);
  CHECK_THROWS_AS(load_params(c, wrong_shape), CheckpointError);
  ParamSet<float> wrong_name;
  wrong_name.add("v", Tensor<float>({2, 2}));
  wrong_name.add("rm", Tensor<float>({2}), false);
  CHECK_THROWS_AS(load_params(c, wrong_name), CheckpointError);
}

TEST_CASE("config text parsing") {
  CHECK(parse_size("42") == 42);
  CHECK_THROWS(parse_size("-1"));
  CHECK_THROWS(parse_size("4x"));
  CHECK(parse_double("-2.5e-3") == -2.5e-3);
  CHECK_THROWS(parse_double(""));
  CHECK(parse_size_list("2,2, 4") == std::vector<std::size_t>{2, 2, 4});
  CHECK(parse_double_list("-10,-5,0") == std::vector<double>{-10, -5, 0});
  CHECK(parse_size_array<3>("1,2,3") == std::array<std::size_t, 3>{1, 2, 3});
  CHECK_THROWS(parse_size_array<3>("1,2"));
  for (double v : {0.1, 1.0 / 3.0, 5e-4, -1e300}) CHECK(parse_double(format_double(v)) == v);
  CHECK(join_sizes(std::vector<std::size_t>{2, 4}) == "2,4");
}
