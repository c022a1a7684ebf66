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

#include "gradw_cli/commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "gradw/common/config_text.hpp"
#include "gradw/io/checkpoint.hpp"
#include "gradw/io/grid.hpp"
#include "gradw/io/wav.hpp"
#include "gradw/loss/gradw_loss.hpp"

namespace gradw::cli {
namespace fs = std::filesystem;

namespace {

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw CliError("unwritable_path", "cannot create " + dir.string() + ": " + ec.message());
}

std::ofstream open_out(const fs::path& path) {
  make_dir(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CliError("unwritable_path", "cannot write " + path.string());
  return out;
}

void require_file(const fs::path& path, const std::string& code, const std::string& hint) {
  if (!fs::is_regular_file(path)) throw CliError(code, path.string() + " not found (" + hint + ")");
}

void say(const RunContext& ctx, const std::string& line) {
  if (ctx.progress) *ctx.progress << line << '\n' << std::flush;
}

std::vector<std::vector<std::string>> read_tsv(const fs::path& path, const std::string& header) {
  require_file(path, "missing_input", "run synth-data first");
  std::ifstream in(path);
  std::string line;
  if (!std::getline(in, line) || line != header) {
    throw CliError("bad_manifest", path.string() + ": expected header '" + header + "'");
  }
  std::vector<std::vector<std::string>> rows;
  for (std::size_t lineno = 2; std::getline(in, line); ++lineno) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, '\t')) cells.push_back(cell);
    if (cells.size() != 4) {
      throw CliError("bad_manifest", path.string() + ":" + std::to_string(lineno) + ": expected 4 columns");
    }
    rows.push_back(std::move(cells));
  }
  return rows;
}

Waveform read_audio(const fs::path& path) {
  try {
    return read_wav(path);
  } catch (const std::exception& e) {
    throw CliError("missing_input", e.what());
  }
}

Checkpoint read_ckpt(const fs::path& path, const std::string& hint) {
  require_file(path, "missing_checkpoint", hint);
  try {
    return read_checkpoint(path);
  } catch (const CheckpointError& e) {
    throw CliError("bad_checkpoint", path.string() + ": " + e.what());
  }
}

void write_ckpt(const fs::path& path, const Checkpoint& ckpt) {
  make_dir(path.parent_path());
  write_checkpoint(path, ckpt);
}

template <typename T>
SpeakerNet<T> load_speaker(const RunContext& ctx) {
  auto net = load_speaker_net<T>(read_ckpt(ctx.out.speaker_checkpoint(), "run pretrain first"));
  if (!net.frozen()) throw CliError("bad_checkpoint", "speaker checkpoint is not frozen");
  if (net.config().mel_bins != ctx.config.mel.bins) {
    throw CliError("bad_checkpoint", "speaker checkpoint expects " + std::to_string(net.config().mel_bins) +
                                         " mel bins, config has " + std::to_string(ctx.config.mel.bins));
  }
  return net;
}

template <typename T>
UNet<T> load_enhancer(const RunContext& ctx, const std::string& variant) {
  return load_unet<T>(read_ckpt(ctx.out.unet_checkpoint(variant), "run train-enh --variant=" + variant + " first"));
}

template <typename T>
PretrainSummary pretrain_impl(const RunContext& ctx) {
  const auto& cfg = ctx.config;
  const Corpus corpus = load_corpus(ctx.out);
  say(ctx, "pretrain: " + std::to_string(corpus.utterances.size()) + " utterances, " +
               std::to_string(cfg.pretrain.epochs) + " epochs");
  PretrainResult<T> r = [&] {
    try {
      return pretrain_speaker<T>(cfg.speaker, corpus, cfg.mel, cfg.augment, cfg.pretrain, cfg.seed);
    } catch (const std::invalid_argument& e) {
      throw CliError("bad_corpus", e.what());
    }
  }();
  write_ckpt(ctx.out.speaker_checkpoint(), speaker_checkpoint(r.model, cfg.seed));
  {
    auto log = open_out(ctx.out.reports() / "pretrain_log.csv");
    write_pretrain_log(log, r.log, false);
  }
  auto timing = open_out(ctx.out.diagnostics() / "timing_pretrain.csv");
  write_pretrain_log(timing, r.log);
  say(ctx, "pretrain: train accuracy " + format_double(r.train_accuracy));
  return {r.train_accuracy, r.log.size()};
}

template <typename T>
TrainSummary train_impl(const RunContext& ctx, LossVariant variant) {
  const auto& cfg = ctx.config;
  const std::string name(to_string(variant));
  auto speaker = load_speaker<T>(ctx);
  const Corpus corpus = load_corpus(ctx.out);
  TrainConfig tc = cfg.train;
  tc.variant = variant;
  UNet<T> unet(cfg.unet, cfg.seed);
  const EpochCallback<T> on_epoch = [&](const EpochRecord& rec, const UNet<T>& model, bool is_best) {
    char file[64];
    std::snprintf(file, sizeof file, "unet_%s_epoch%02zu.ckpt", name.c_str(), rec.epoch);
    write_ckpt(ctx.out.checkpoints() / file, unet_checkpoint(model, cfg.seed));
    say(ctx, "train-enh " + name + ": epoch " + std::to_string(rec.epoch) + " train " +
                 format_double(rec.train_loss) + " val " + format_double(rec.val_loss) +
                 (is_best ? " (best)" : ""));
  };
  TrainResult<T> r = [&] {
    try {
      return train_enhancer(unet, speaker, corpus, cfg.mel, tc, on_epoch, ctx.out.diagnostics() / ("nonfinite_" + name));
    } catch (const NonFiniteLoss& e) {
      throw CliError("nonfinite_loss", e.what());
    } catch (const std::invalid_argument& e) {
      throw CliError("bad_corpus", e.what());
    }
  }();
  Checkpoint best = unet_checkpoint(r.best, cfg.seed);
  best.set("variant", name);
  best.set("best_epoch", std::to_string(r.best_epoch));
  write_ckpt(ctx.out.unet_checkpoint(name), best);
  {
    auto log = open_out(ctx.out.train_log(name));
    write_train_log(log, r.log, false);
  }
  auto timing = open_out(ctx.out.diagnostics() / ("timing_train_" + name + ".csv"));
  write_train_log(timing, r.log);
  return {r.log, r.best_epoch};
}

template <typename T>
EvaluateSummary evaluate_impl(const RunContext& ctx) {
  const auto& cfg = ctx.config;
  auto speaker = load_speaker<T>(ctx);
  std::map<std::string, UNet<T>> unets;
  for (const auto& s : cfg.eval.systems) {
    if (s != "noisy") unets.emplace(s, load_enhancer<T>(ctx, s));
  }
  const auto utts = eval_utterances(cfg.corpus.speakers, cfg.eval.utterances_per_speaker,
                                    cfg.eval.utterance_seconds, cfg.seed, cfg.corpus.sample_rate);
  const auto trials = make_trials(utts, cfg.eval.target_trials, cfg.eval.nontarget_trials, cfg.seed);
  {
    auto out = open_out(ctx.out.manifests() / "trials.txt");
    write_trials(out, trials);
  }
  const EvalSetup setup = cfg.eval_setup();
  EvaluateSummary summary;
  for (const auto& cond : cfg.eval.conditions) {
    for (const auto& s : cfg.eval.systems) {
      std::optional<Enhancer> enh;
      if (s != "noisy") enh = unet_enhancer(unets.at(s));
      summary.rows.push_back(run_trial_eval(trials, utts, speaker, enh ? &*enh : nullptr, cond, setup, s, cfg.seed));
      const auto& row = summary.rows.back();
      say(ctx, "evaluate: " + row.condition + " " + row.variant + " eer " + format_double(row.eer) +
                   " min_dcf " + format_double(row.min_dcf));
    }
  }
  auto report = open_out(ctx.out.eval_report());
  write_eval_report(report, summary.rows);
  return summary;
}

void dump_grid(const fs::path& dir, const std::string& name, std::size_t rows, std::size_t cols,
               const std::vector<double>& values) {
  write_grid_csv(dir / (name + ".csv"), rows, cols, values);
  write_pgm(dir / (name + ".pgm"), rows, cols, values);
}

template <typename V>
std::vector<double> as_doubles(const V& v) {
  return std::vector<double>(v.begin(), v.end());
}

template <typename T>
void diagnose_impl(const RunContext& ctx, const DiagnoseRequest& req) {
  const auto& cfg = ctx.config;
  if (!variant_spec(req.variant).weighted) {
    throw CliError("bad_argument", "variant equal_w has no weight map to dump");
  }
  const Waveform clean = read_audio(req.clean_wav);
  const Waveform noisy = read_audio(req.noisy_wav);
  if (clean.size() != noisy.size() || clean.sample_rate != noisy.sample_rate) {
    throw CliError("bad_argument", "clean and noisy WAVs differ in length or sample rate");
  }
  auto speaker = load_speaker<T>(ctx);
  MelExtractor mel(cfg.mel);
  FeatureMap r, x;
  try {
    r = mel(clean);
    x = mel(noisy);
  } catch (const std::invalid_argument& e) {
    throw CliError("bad_argument", e.what());
  }
  Mask m{x.frames, x.bins, std::vector<float>(x.values.size(), 1.0f)};
  if (req.system != "noisy") {
    parse_loss_variant(req.system);
    auto unet = load_enhancer<T>(ctx, req.system);
    try {
      m = estimate_mask(unet, x);
    } catch (const ShapeError& e) {
      throw CliError("bad_argument", e.what());
    }
  }
  const FeatureMap e = enhance(x, m);

  std::size_t target = 0;
  if (req.target) {
    target = *req.target;
    if (target >= speaker.config().num_speakers) throw CliError("bad_argument", "target speaker out of range");
  } else {
    Tape<T> tape;
    const auto logits = speaker_forward(tape, speaker, r, StatsMode::eval, false).logits.value();
    target = static_cast<std::size_t>(std::max_element(logits.values().begin(), logits.values().end()) -
                                      logits.values().begin());
  }
  const std::array<std::size_t, 1> targets{target};

  const fs::path dir = ctx.out.diagnostics();
  make_dir(dir);
  dump_grid(dir, "X", x.frames, x.bins, as_doubles(x.values));
  dump_grid(dir, "R", r.frames, r.bins, as_doubles(r.values));
  dump_grid(dir, "M", m.frames, m.bins, as_doubles(m.values));
  dump_grid(dir, "E", e.frames, e.bins, as_doubles(e.values));

  Tape<T> tape;
  ComposeTrace<T> trace;
  double loss = 0;
  try {
    loss = compose_loss(speaker, tape.constant(stack_features<T>(r)), tape.constant(stack_features<T>(e)),
                        std::span<const std::size_t>(targets), req.variant, &trace)
               .value()
               .item();
  } catch (const std::domain_error& err) {
    throw CliError("undefined_weights", std::string(to_string(req.variant)) + ": " + err.what());
  }
  const Shape as = trace.a_ref.shape();  // 1 x C x T' x F'
  const std::size_t c = as[1], tp = as[2], fp = as[3];
  auto channel_mean = [&](const Tensor<T>& a) {
    std::vector<double> out(tp * fp, 0.0);
    for (std::size_t ci = 0; ci < c; ++ci) {
      for (std::size_t k = 0; k < tp * fp; ++k) out[k] += a[ci * tp * fp + k] / static_cast<double>(c);
    }
    return out;
  };
  dump_grid(dir, "A_ref", tp, fp, channel_mean(trace.a_ref.value()));
  dump_grid(dir, "A_enh", tp, fp, channel_mean(trace.a_enh.value()));
  const bool channel = trace.weights[0].domain == DistanceDomain::channel;
  const std::size_t rows = channel ? 1 : tp, cols = channel ? c : fp;
  const auto d = as_doubles(trace.d.value().values());
  const auto p = as_doubles(trace.weights[0].values.values());
  dump_grid(dir, "D", rows, cols, d);
  dump_grid(dir, "P", rows, cols, p);

  double max_d = 0, p_sum = 0, max_dev = 0;
  for (double v : d) max_d = std::max(max_d, std::abs(v));
  for (double v : p) {
    p_sum += v;
    max_dev = std::max(max_dev, std::abs(v - 1.0 / static_cast<double>(p.size())));
  }
  auto summary = open_out(dir / "summary.txt");
  summary << "system = " << req.system << "\n"
          << "variant = " << to_string(req.variant) << "\n"
          << "target_speaker = " << target << "\n"
          << "frames = " << x.frames << "\n"
          << "activation_grid = " << tp << "x" << fp << "\n"
          << "max_abs_d = " << format_double(max_d) << "\n"
          << "p_sum = " << format_double(p_sum) << "\n"
          << "p_max_deviation_from_uniform = " << format_double(max_dev) << "\n"
          << "loss." << to_string(req.variant) << " = " << format_double(loss) << "\n";
  for (auto v : all_loss_variants()) {
    if (v == req.variant) continue;
    Tape<T> t;
    summary << "loss." << to_string(v) << " = ";
    try {
      summary << format_double(compose_loss(speaker, t.constant(stack_features<T>(r)), t.constant(stack_features<T>(e)),
                                            std::span<const std::size_t>(targets), v)
                                   .value()
                                   .item());
    } catch (const std::domain_error&) {
      summary << "undefined";  // min-max of a constant distance map
    }
    summary << "\n";
  }
}

}  // namespace

void echo_config(const RunContext& ctx, const std::string& command) {
  auto out = open_out(ctx.out.reports() / (command + ".config"));
  write_experiment_config(out, ctx.config);
}

SynthSummary cmd_synth_data(const RunContext& ctx) {
  const auto& cfg = ctx.config;
  const Corpus corpus = synth_corpus(cfg.corpus, cfg.seed);
  const fs::path audio = ctx.out.manifests() / "audio";
  make_dir(audio / "speech");
  make_dir(audio / "noise");
  auto utt = open_out(ctx.out.corpus_manifest());
  utt << "utterance_id\tspeaker_id\tpath\tduration\n";
  for (const auto& u : corpus.utterances) {
    const fs::path rel = fs::path("manifests") / "audio" / "speech" / (u.id + ".wav");
    write_wav(ctx.out.root / rel, u.audio);
    utt << u.id << '\t' << u.speaker << '\t' << rel.generic_string() << '\t' << format_double(u.audio.duration()) << '\n';
  }
  auto noise = open_out(ctx.out.noise_manifest());
  noise << "noise_id\tkind\tpath\tduration\n";
  for (const auto& n : corpus.noises) {
    const fs::path rel = fs::path("manifests") / "audio" / "noise" / (n.id + ".wav");
    write_wav(ctx.out.root / rel, n.audio);
    noise << n.id << '\t' << to_string(n.kind) << '\t' << rel.generic_string() << '\t' << format_double(n.audio.duration()) << '\n';
  }
  say(ctx, "synth-data: " + std::to_string(corpus.utterances.size()) + " utterances, " +
               std::to_string(corpus.noises.size()) + " noise clips");
  return {corpus.utterances.size(), corpus.noises.size()};
}

Corpus load_corpus(const OutputDirs& out) {
  Corpus corpus;
  for (const auto& row : read_tsv(out.corpus_manifest(), "utterance_id\tspeaker_id\tpath\tduration")) {
    Utterance u;
    u.id = row[0];
    try {
      u.speaker = parse_size(row[1]);
    } catch (const std::invalid_argument& e) {
      throw CliError("bad_manifest", e.what());
    }
    u.audio = read_audio(out.root / row[2]);
    corpus.num_speakers = std::max(corpus.num_speakers, u.speaker + 1);
    corpus.utterances.push_back(std::move(u));
  }
  for (const auto& row : read_tsv(out.noise_manifest(), "noise_id\tkind\tpath\tduration")) {
    NoiseClip n;
    n.id = row[0];
    try {
      n.kind = parse_noise_kind(row[1]);
    } catch (const std::invalid_argument& e) {
      throw CliError("bad_manifest", e.what());
    }
    n.audio = read_audio(out.root / row[2]);
    corpus.noises.push_back(std::move(n));
  }
  return corpus;
}

PretrainSummary cmd_pretrain(const RunContext& ctx) {
  return ctx.f64 ? pretrain_impl<double>(ctx) : pretrain_impl<float>(ctx);
}

TrainSummary cmd_train_enh(const RunContext& ctx, LossVariant variant) {
  return ctx.f64 ? train_impl<double>(ctx, variant) : train_impl<float>(ctx, variant);
}

EvaluateSummary cmd_evaluate(const RunContext& ctx) {
  return ctx.f64 ? evaluate_impl<double>(ctx) : evaluate_impl<float>(ctx);
}

void cmd_diagnose(const RunContext& ctx, const DiagnoseRequest& req) {
  ctx.f64 ? diagnose_impl<double>(ctx, req) : diagnose_impl<float>(ctx, req);
}

}  // namespace gradw::cli
