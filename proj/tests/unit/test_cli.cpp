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

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "doctest.h"
#include "gradw/common/config_text.hpp"
#include "gradw/dsp/mixing.hpp"
#include "gradw/io/wav.hpp"
#include "gradw_cli/commands.hpp"

using namespace gradw;
using namespace gradw::cli;
namespace fs = std::filesystem;

namespace {

const char* kTinyConfig = R"(# small enough for a unit test
[run]
seed = 4

[corpus]
speakers = 4
utterances_per_speaker = 3
utterance_seconds = 0.6
noise_clips = 8
noise_seconds = 1.0

[pretrain]
epochs = 1
batch_size = 4
crop_frames = 32

[train]
epochs = 2
warmup_epochs = 1
batch_size = 2
crop_frames = 32

[eval]
utterances_per_speaker = 3
utterance_seconds = 0.6
target_trials = 4
nontarget_trials = 4
systems = noisy,grad_w
)";

ExperimentConfig tiny_config() {
  std::istringstream in(kTinyConfig);
  auto cfg = parse_experiment_config(in, "tiny");
  cfg.resolve();
  return cfg;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("gradw_test_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::vector<std::vector<double>> read_csv_grid(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<double> row;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) row.push_back(parse_double(cell));
    rows.push_back(row);
  }
  return rows;
}

std::pair<std::size_t, std::size_t> pgm_size(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::string magic;
  std::size_t w = 0, h = 0;
  in >> magic >> w >> h;
  CHECK(magic == "P5");
  return {h, w};
}

struct Run {
  int status = 0;
  std::string err;
};

Run run_exe(const std::string& args, const fs::path& dir) {
  const char* exe = std::getenv("GRADW_EXE");
  REQUIRE(exe != nullptr);
  const fs::path err = dir / "stderr.txt";
  const std::string cmd = std::string("\"") + exe + "\" " + args + " 2> \"" + err.string() + "\" > /dev/null";
  const int raw = std::system(cmd.c_str());
  return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, slurp(err)};
}

// Corpus, speaker and one grad_w enhancer, shared by the pipeline cases.
struct Pipeline {
  RunContext ctx;
  PretrainSummary pretrain;
  TrainSummary grad_w;
};

Pipeline& pipeline() {
  static Pipeline p = [] {
    Pipeline out;
    out.ctx.config = tiny_config();
    out.ctx.out.root = scratch("pipeline");
    cmd_synth_data(out.ctx);
    out.pretrain = cmd_pretrain(out.ctx);
    out.grad_w = cmd_train_enh(out.ctx, LossVariant::grad_w);
    return out;
  }();
  return p;
}

}  // namespace

TEST_CASE("config text round-trips the defaults and edits") {
  ExperimentConfig cfg;
  std::istringstream in(to_text(cfg));
  CHECK(parse_experiment_config(in) == cfg);

  auto tiny = tiny_config();
  tiny.eval.conditions = parse_condition_list("-15,-10,clean");
  tiny.train.variant = LossVariant::no_softmax;
  std::istringstream in2(to_text(tiny));
  auto back = parse_experiment_config(in2);
  back.resolve();
  CHECK(back == tiny);
}

TEST_CASE("config rejects unknown keys, sections, duplicates and bad values") {
  auto parse = [](const std::string& text) {
    std::istringstream in(text);
    return parse_experiment_config(in, "t");
  };
  CHECK_THROWS_WITH_AS(parse("[train]\nlearning_rte = 1\n"), doctest::Contains("t:2"), CliError);
  CHECK_THROWS_AS(parse("[trainer]\n"), CliError);
  CHECK_THROWS_AS(parse("[train]\nepochs = 1\nepochs = 2\n"), CliError);
  CHECK_THROWS_AS(parse("[train]\nepochs = many\n"), CliError);
  CHECK_THROWS_AS(parse("epochs = 1\n"), CliError);
  CHECK_THROWS_AS(parse("[train]\nvariant = best_w\n"), CliError);
  try {
    parse("[mel]\nbinz = 3\n");
  } catch (const CliError& e) {
    CHECK(e.code() == "bad_config");
  }
}

TEST_CASE("resolve copies shared fields and validates") {
  auto cfg = tiny_config();
  CHECK(cfg.speaker.num_speakers == 4);
  CHECK(cfg.speaker.mel_bins == cfg.mel.bins);
  CHECK(cfg.unet.mel_bins == cfg.mel.bins);
  CHECK(cfg.train.seed == 4);
  cfg.eval.systems.clear();
  CHECK_THROWS_AS(cfg.resolve(), CliError);
}

TEST_CASE("synth-data is deterministic and echoes a reparsable config") {
  RunContext ctx;
  ctx.config = tiny_config();
  ctx.out.root = scratch("synth");
  const auto s = cmd_synth_data(ctx);
  CHECK(s.utterances == 12);
  CHECK(s.noises == 8);
  const std::string manifest = slurp(ctx.out.corpus_manifest());
  const std::string wav = slurp(ctx.out.root / "manifests/audio/speech/spk001_utt002.wav");
  CHECK(manifest.rfind("utterance_id\tspeaker_id\tpath\tduration\n", 0) == 0);
  cmd_synth_data(ctx);
  CHECK(slurp(ctx.out.corpus_manifest()) == manifest);
  CHECK(slurp(ctx.out.root / "manifests/audio/speech/spk001_utt002.wav") == wav);

  const Corpus back = load_corpus(ctx.out);
  const Corpus direct = synth_corpus(ctx.config.corpus, ctx.config.seed);
  REQUIRE(back.utterances.size() == direct.utterances.size());
  CHECK(back.num_speakers == 4);
  CHECK(back.utterances[5].id == direct.utterances[5].id);
  CHECK(back.noises[2].kind == direct.noises[2].kind);
  CHECK(back.utterances[5].audio.samples == quantize_pcm16(direct.utterances[5].audio).samples);

  echo_config(ctx, "synth-data");
  auto echoed = load_experiment_config(ctx.out.reports() / "synth-data.config");
  echoed.resolve();
  CHECK(echoed == ctx.config);
}

TEST_CASE("commands report missing upstream artifacts") {
  RunContext ctx;
  ctx.config = tiny_config();
  ctx.out.root = scratch("missing");
  try {
    cmd_pretrain(ctx);
    FAIL("expected CliError");
  } catch (const CliError& e) {
    CHECK(e.code() == "missing_input");
  }
  cmd_synth_data(ctx);
  try {
    cmd_train_enh(ctx, LossVariant::grad_w);
    FAIL("expected CliError");
  } catch (const CliError& e) {
    CHECK(e.code() == "missing_checkpoint");
  }
}

TEST_CASE("a single-speaker corpus is rejected by pretrain") {
  RunContext ctx;
  ctx.config = tiny_config();
  ctx.config.corpus.speakers = 1;
  ctx.config.resolve();
  ctx.out.root = scratch("one_speaker");
  cmd_synth_data(ctx);
  try {
    cmd_pretrain(ctx);
    FAIL("expected CliError");
  } catch (const CliError& e) {
    CHECK(e.code() == "bad_corpus");
  }
}

TEST_CASE("pipeline writes checkpoints and logs") {
  auto& p = pipeline();
  const auto& out = p.ctx.out;
  CHECK(fs::exists(out.speaker_checkpoint()));
  CHECK(fs::exists(out.unet_checkpoint("grad_w")));
  CHECK(fs::exists(out.checkpoints() / "unet_grad_w_epoch01.ckpt"));
  CHECK(fs::exists(out.checkpoints() / "unet_grad_w_epoch02.ckpt"));
  CHECK(p.grad_w.log.epochs.size() == 2);
  CHECK(slurp(out.train_log("grad_w")).rfind("epoch,train_loss,val_loss,lr\n", 0) == 0);
  CHECK(slurp(out.reports() / "pretrain_log.csv").rfind("epoch,train_loss,train_accuracy,lr\n", 0) == 0);
  const auto best = read_checkpoint(out.unet_checkpoint("grad_w"));
  CHECK(best.find("variant") == "grad_w");
  CHECK(best.find("best_epoch") == std::to_string(p.grad_w.best_epoch));
}

TEST_CASE("equal_w and grad_w runs share the lr schedule") {
  auto& p = pipeline();
  const auto equal = cmd_train_enh(p.ctx, LossVariant::equal_w);
  REQUIRE(equal.log.epochs.size() == p.grad_w.log.epochs.size());
  for (std::size_t i = 0; i < equal.log.epochs.size(); ++i) {
    CHECK(equal.log.epochs[i].lr == p.grad_w.log.epochs[i].lr);
  }
}

TEST_CASE("train-enh rerun is byte-identical") {
  auto& p = pipeline();
  const std::string ckpt = slurp(p.ctx.out.unet_checkpoint("grad_w"));
  const std::string log = slurp(p.ctx.out.train_log("grad_w"));
  cmd_train_enh(p.ctx, LossVariant::grad_w);
  CHECK(slurp(p.ctx.out.unet_checkpoint("grad_w")) == ckpt);
  CHECK(slurp(p.ctx.out.train_log("grad_w")) == log);
}

TEST_CASE("evaluate over the full SNR grid gives one row per condition and system") {
  auto ctx = pipeline().ctx;
  ctx.config.eval.conditions = parse_condition_list("-15,-10,-5,0,5,10,15,clean");
  ctx.config.eval.systems = {"noisy"};
  const auto s = cmd_evaluate(ctx);
  CHECK(s.rows.size() == 8);
  CHECK(s.rows.back().condition == "clean");
  std::ifstream in(ctx.out.eval_report());
  std::string line;
  std::size_t lines = 0;
  while (std::getline(in, line)) ++lines;
  CHECK(lines == 9);
  const std::string report = slurp(ctx.out.eval_report());
  cmd_evaluate(ctx);
  CHECK(slurp(ctx.out.eval_report()) == report);
}

TEST_CASE("evaluate needs every listed enhancer") {
  auto ctx = pipeline().ctx;
  ctx.config.eval.systems = {"noisy", "res_w"};
  try {
    cmd_evaluate(ctx);
    FAIL("expected CliError");
  } catch (const CliError& e) {
    CHECK(e.code() == "missing_checkpoint");
  }
}

TEST_CASE("diagnose of identical inputs gives zero distance and uniform weights") {
  auto& p = pipeline();
  const fs::path wav = p.ctx.out.root / "manifests/audio/speech/spk000_utt000.wav";
  DiagnoseRequest req;
  req.clean_wav = wav;
  req.noisy_wav = wav;
  req.system = "noisy";
  cmd_diagnose(p.ctx, req);
  const fs::path dir = p.ctx.out.diagnostics();

  const auto d = read_csv_grid(dir / "D.csv");
  const auto pm = read_csv_grid(dir / "P.csv");
  double max_d = 0, sum = 0, n = 0;
  for (const auto& row : d)
    for (double v : row) max_d = std::max(max_d, std::abs(v));
  for (const auto& row : pm)
    for (double v : row) {
      sum += v;
      n += 1;
    }
  CHECK(max_d < 1e-4);
  CHECK(std::abs(sum - 1.0) < 1e-6);
  for (const auto& row : pm)
    for (double v : row) CHECK(std::abs(v - 1.0 / n) < 1e-3);

  const auto x = read_csv_grid(dir / "X.csv");
  for (const char* name : {"X", "R", "E", "M"}) {
    CHECK(pgm_size(dir / (std::string(name) + ".pgm")) == std::pair{x.size(), x[0].size()});
  }
  const auto a = read_csv_grid(dir / "A_ref.csv");
  CHECK(pgm_size(dir / "A_ref.pgm") == std::pair{a.size(), a[0].size()});
  CHECK(pgm_size(dir / "D.pgm") == std::pair{a.size(), a[0].size()});
  CHECK(pgm_size(dir / "P.pgm") == std::pair{a.size(), a[0].size()});

  const std::string summary = slurp(dir / "summary.txt");
  for (auto v : all_loss_variants()) {
    CHECK(summary.find("loss." + std::string(to_string(v)) + " = ") != std::string::npos);
  }
  CHECK(summary.find("loss.no_softmax = undefined") != std::string::npos);
}

TEST_CASE("diagnose with an enhancer on a noisy pair") {
  auto& p = pipeline();
  const fs::path dir = p.ctx.out.root / "pair";
  fs::create_directories(dir);
  const auto clean = read_wav(p.ctx.out.root / "manifests/audio/speech/spk002_utt001.wav");
  const auto noise = read_wav(p.ctx.out.root / "manifests/audio/noise/noise000_white.wav");
  write_wav(dir / "noisy.wav", mix_at_snr(clean, fit_length(noise, clean.size(), 1), 0.0).mixture);
  DiagnoseRequest req;
  req.clean_wav = p.ctx.out.root / "manifests/audio/speech/spk002_utt001.wav";
  req.noisy_wav = dir / "noisy.wav";
  req.variant = LossVariant::channel;
  req.target = 2;
  cmd_diagnose(p.ctx, req);
  const auto pm = read_csv_grid(p.ctx.out.diagnostics() / "P.csv");
  REQUIRE(pm.size() == 1);
  CHECK(pm[0].size() == p.ctx.config.speaker.activation_channels());
  CHECK(std::accumulate(pm[0].begin(), pm[0].end(), 0.0) == doctest::Approx(1.0).epsilon(1e-6));

  req.variant = LossVariant::equal_w;
  CHECK_THROWS_AS(cmd_diagnose(p.ctx, req), CliError);
  req.variant = LossVariant::grad_w;
  req.target = 99;
  CHECK_THROWS_AS(cmd_diagnose(p.ctx, req), CliError);
}

TEST_CASE("executable: bad variant lists the eight names") {
  const fs::path dir = scratch("exe_variant");
  const auto r = run_exe("--out \"" + dir.string() + "\" train-enh --variant=best_w", dir);
  CHECK(r.status != 0);
  CHECK(r.err.rfind("error: bad_variant: ", 0) == 0);
  CHECK(std::count(r.err.begin(), r.err.end(), '\n') == 1);
  for (auto v : all_loss_variants()) CHECK(r.err.find(std::string(to_string(v))) != std::string::npos);
}

TEST_CASE("executable: errors are one machine-parsable line") {
  const fs::path dir = scratch("exe_errors");
  auto r = run_exe("--out \"" + dir.string() + "\" evaluate", dir);
  CHECK(r.status != 0);
  CHECK(r.err.rfind("error: missing_checkpoint: ", 0) == 0);
  r = run_exe("--out \"" + dir.string() + "\" evaluate --snr-list=-5,loud", dir);
  CHECK(r.status != 0);
  CHECK(r.err.rfind("error: bad_argument: ", 0) == 0);
  r = run_exe("frobnicate", dir);
  CHECK(r.status != 0);
  CHECK(r.err.rfind("error: usage: ", 0) == 0);
  r = run_exe("--config \"" + (dir / "nope.cfg").string() + "\" synth-data", dir);
  CHECK(r.status != 0);
  CHECK(r.err.rfind("error: ", 0) == 0);
}

TEST_CASE("executable: synth-data with --seed override is idempotent") {
  const fs::path dir = scratch("exe_synth");
  {
    std::ofstream cfg(dir / "tiny.cfg");
    cfg << kTinyConfig;
  }
  const std::string args = "--config \"" + (dir / "tiny.cfg").string() + "\" --seed 11 --out \"" +
                           (dir / "out").string() + "\" synth-data";
  REQUIRE(run_exe(args, dir).status == 0);
  const std::string manifest = slurp(dir / "out/manifests/corpus.tsv");
  const std::string noise = slurp(dir / "out/manifests/noise.tsv");
  REQUIRE(run_exe(args, dir).status == 0);
  CHECK(slurp(dir / "out/manifests/corpus.tsv") == manifest);
  CHECK(slurp(dir / "out/manifests/noise.tsv") == noise);
  auto echoed = load_experiment_config(dir / "out/reports/synth-data.config");
  CHECK(echoed.seed == 11);
}
