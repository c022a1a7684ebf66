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

#include "gradw_cli/experiment_config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "gradw/common/config_text.hpp"

namespace gradw::cli {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const auto end = comma == std::string_view::npos ? text.size() : comma;
    auto item = trim(text.substr(start, end - start));
    if (item.empty()) throw std::invalid_argument("empty item in list '" + std::string(text) + "'");
    out.push_back(std::move(item));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

static_assert(std::is_same_v<std::uint64_t, std::size_t>, "seed shares the size codec");

// Value codecs, one overload pair per field type.
std::string format(std::size_t v) { return std::to_string(v); }
std::string format(int v) { return std::to_string(v); }
std::string format(double v) { return format_double(v); }
std::string format(const std::vector<double>& v) { return join_doubles(v); }
template <std::size_t N>
std::string format(const std::array<std::size_t, N>& v) { return join_sizes(v); }
std::string format(LossVariant v) { return std::string(to_string(v)); }
std::string format(const std::vector<Condition>& v) {
  std::string s;
  for (const auto& c : v) s += (s.empty() ? "" : ",") + c.label();
  return s;
}
std::string format(const std::vector<NoiseKind>& v) {
  std::string s;
  for (auto k : v) s += (s.empty() ? "" : ",") + std::string(to_string(k));
  return s;
}
std::string format(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& x : v) s += (s.empty() ? "" : ",") + x;
  return s;
}

void parse(std::string_view t, std::size_t& v) { v = parse_size(t); }
void parse(std::string_view t, int& v) { v = static_cast<int>(parse_size(t)); }
void parse(std::string_view t, double& v) { v = parse_double(t); }
void parse(std::string_view t, std::vector<double>& v) { v = parse_double_list(t); }
template <std::size_t N>
void parse(std::string_view t, std::array<std::size_t, N>& v) { v = parse_size_array<N>(t); }
void parse(std::string_view t, LossVariant& v) { v = parse_loss_variant(t); }
void parse(std::string_view t, std::vector<Condition>& v) { v = parse_condition_list(t); }
void parse(std::string_view t, std::vector<NoiseKind>& v) {
  v.clear();
  for (const auto& s : split_list(t)) v.push_back(parse_noise_kind(s));
}
void parse(std::string_view t, std::vector<std::string>& v) {
  v = split_list(t);
  for (const auto& s : v) {
    if (s != "noisy") parse_loss_variant(s);
  }
}

struct Field {
  std::string section, key;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, std::string_view)> set;
};

template <typename Access>
Field field(std::string section, std::string key, Access access) {
  return Field{std::move(section), std::move(key),
               [access](const ExperimentConfig& c) { return format(access(const_cast<ExperimentConfig&>(c))); },
               [access](ExperimentConfig& c, std::string_view text) { parse(text, access(c)); }};
}

#define GRADW_FIELD(section, key, expr) \
  field(section, key, [](ExperimentConfig& c) -> auto& { return expr; })

const std::vector<Field>& fields() {
  static const std::vector<Field> table{
      GRADW_FIELD("run", "seed", c.seed),

      GRADW_FIELD("corpus", "speakers", c.corpus.speakers),
      GRADW_FIELD("corpus", "utterances_per_speaker", c.corpus.utterances_per_speaker),
      GRADW_FIELD("corpus", "utterance_seconds", c.corpus.utterance_seconds),
      GRADW_FIELD("corpus", "noise_clips", c.corpus.noise_clips),
      GRADW_FIELD("corpus", "noise_seconds", c.corpus.noise_seconds),
      GRADW_FIELD("corpus", "sample_rate", c.corpus.sample_rate),

      GRADW_FIELD("mel", "window", c.mel.window),
      GRADW_FIELD("mel", "hop", c.mel.hop),
      GRADW_FIELD("mel", "fft_size", c.mel.fft_size),
      GRADW_FIELD("mel", "bins", c.mel.bins),
      GRADW_FIELD("mel", "f_min", c.mel.f_min),
      GRADW_FIELD("mel", "f_max", c.mel.f_max),

      GRADW_FIELD("speaker", "first_conv_channels", c.speaker.first_conv_channels),
      GRADW_FIELD("speaker", "block_depths", c.speaker.block_depths),
      GRADW_FIELD("speaker", "embedding_dim", c.speaker.embedding_dim),

      GRADW_FIELD("augment", "clean_ratio", c.augment.clean_ratio),
      GRADW_FIELD("augment", "noise_ratio", c.augment.noise_ratio),
      GRADW_FIELD("augment", "babble_ratio", c.augment.babble_ratio),
      GRADW_FIELD("augment", "noise_snrs", c.augment.noise_snrs),
      GRADW_FIELD("augment", "music_snrs", c.augment.music_snrs),
      GRADW_FIELD("augment", "babble_min_sources", c.augment.babble_min_sources),
      GRADW_FIELD("augment", "babble_max_sources", c.augment.babble_max_sources),
      GRADW_FIELD("augment", "babble_snrs", c.augment.babble_snrs),

      GRADW_FIELD("pretrain", "epochs", c.pretrain.epochs),
      GRADW_FIELD("pretrain", "batch_size", c.pretrain.batch_size),
      GRADW_FIELD("pretrain", "learning_rate", c.pretrain.learning_rate),
      GRADW_FIELD("pretrain", "warmup_epochs", c.pretrain.warmup_epochs),
      GRADW_FIELD("pretrain", "crop_frames", c.pretrain.crop_frames),

      GRADW_FIELD("unet", "first_conv_channels", c.unet.first_conv_channels),
      GRADW_FIELD("unet", "encoder_depths", c.unet.encoder_depths),
      GRADW_FIELD("unet", "decoder_depths", c.unet.decoder_depths),

      GRADW_FIELD("train", "learning_rate", c.train.learning_rate),
      GRADW_FIELD("train", "warmup_epochs", c.train.warmup_epochs),
      GRADW_FIELD("train", "epochs", c.train.epochs),
      GRADW_FIELD("train", "batch_size", c.train.batch_size),
      GRADW_FIELD("train", "adam_beta1", c.train.adam.beta1),
      GRADW_FIELD("train", "adam_beta2", c.train.adam.beta2),
      GRADW_FIELD("train", "adam_epsilon", c.train.adam.epsilon),
      GRADW_FIELD("train", "variant", c.train.variant),
      GRADW_FIELD("train", "crop_frames", c.train.crop_frames),
      GRADW_FIELD("train", "snr_min_db", c.train.snr_min_db),
      GRADW_FIELD("train", "snr_max_db", c.train.snr_max_db),
      GRADW_FIELD("train", "babble_snrs", c.train.babble_snrs),
      GRADW_FIELD("train", "babble_min_sources", c.train.babble_min_sources),
      GRADW_FIELD("train", "babble_max_sources", c.train.babble_max_sources),
      GRADW_FIELD("train", "validation_speakers", c.train.validation_speakers),

      GRADW_FIELD("eval", "conditions", c.eval.conditions),
      GRADW_FIELD("eval", "systems", c.eval.systems),
      GRADW_FIELD("eval", "utterances_per_speaker", c.eval.utterances_per_speaker),
      GRADW_FIELD("eval", "utterance_seconds", c.eval.utterance_seconds),
      GRADW_FIELD("eval", "target_trials", c.eval.target_trials),
      GRADW_FIELD("eval", "nontarget_trials", c.eval.nontarget_trials),
      GRADW_FIELD("eval", "noise_kinds", c.eval.noise_kinds),
      GRADW_FIELD("eval", "babble_sources", c.eval.babble_sources),
      GRADW_FIELD("eval", "p_target", c.eval.p_target),
      GRADW_FIELD("eval", "c_miss", c.eval.c_miss),
      GRADW_FIELD("eval", "c_fa", c.eval.c_fa),
  };
  return table;
}

#undef GRADW_FIELD

}  // namespace

void ExperimentConfig::resolve() {
  mel.sample_rate = corpus.sample_rate;
  speaker.mel_bins = mel.bins;
  speaker.num_speakers = corpus.speakers;
  unet.mel_bins = mel.bins;
  train.seed = seed;
  try {
    mel.validate();
    // a one-speaker corpus still synthesizes; pretrain rejects it
    if (corpus.speakers >= 2) speaker.validate();
    augment.validate();
    pretrain.validate();
    unet.validate();
    train.validate();
  } catch (const std::invalid_argument& e) {
    throw CliError("bad_config", e.what());
  }
  if (corpus.speakers == 0) throw CliError("bad_config", "corpus.speakers must be positive");
  if (eval.conditions.empty() || eval.systems.empty()) {
    throw CliError("bad_config", "eval.conditions and eval.systems must be nonempty");
  }
  if (eval.noise_kinds.empty()) throw CliError("bad_config", "eval.noise_kinds is empty");
  if (!(eval.p_target > 0 && eval.p_target < 1) || !(eval.c_miss > 0) || !(eval.c_fa > 0)) {
    throw CliError("bad_config", "eval.p_target must lie in (0, 1) and costs must be positive");
  }
}

EvalSetup ExperimentConfig::eval_setup() const {
  EvalSetup s;
  s.mel = mel;
  s.noise_kinds = eval.noise_kinds;
  s.babble_sources = eval.babble_sources;
  s.p_target = eval.p_target;
  s.c_miss = eval.c_miss;
  s.c_fa = eval.c_fa;
  return s;
}

ExperimentConfig parse_experiment_config(std::istream& in, const std::string& origin) {
  std::map<std::pair<std::string, std::string>, const Field*> index;
  std::set<std::string> sections;
  for (const auto& f : fields()) {
    index[{f.section, f.key}] = &f;
    sections.insert(f.section);
  }
  ExperimentConfig cfg;
  std::set<std::pair<std::string, std::string>> seen;
  std::string section, line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    const std::string where = origin + ":" + std::to_string(lineno) + ": ";
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string text = trim(line);
    if (text.empty()) continue;
    if (text.front() == '[') {
      if (text.back() != ']') throw CliError("bad_config", where + "malformed section header");
      section = trim(std::string_view(text).substr(1, text.size() - 2));
      if (!sections.count(section)) throw CliError("bad_config", where + "unknown section [" + section + "]");
      continue;
    }
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw CliError("bad_config", where + "expected key = value");
    const std::string key = trim(std::string_view(text).substr(0, eq));
    const std::string value = trim(std::string_view(text).substr(eq + 1));
    if (section.empty()) throw CliError("bad_config", where + "key '" + key + "' outside a section");
    const auto it = index.find({section, key});
    if (it == index.end()) throw CliError("bad_config", where + "unknown key '" + section + "." + key + "'");
    if (!seen.insert({section, key}).second) {
      throw CliError("bad_config", where + "duplicate key '" + section + "." + key + "'");
    }
    try {
      it->second->set(cfg, value);
    } catch (const std::exception& e) {
      throw CliError("bad_config", where + section + "." + key + ": " + e.what());
    }
  }
  return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CliError("missing_input", "cannot open config " + path.string());
  return parse_experiment_config(in, path.string());
}

void write_experiment_config(std::ostream& out, const ExperimentConfig& cfg) {
  std::string section;
  for (const auto& f : fields()) {
    if (f.section != section) {
      out << (section.empty() ? "" : "\n") << "[" << f.section << "]\n";
      section = f.section;
    }
    out << f.key << " = " << f.get(cfg) << "\n";
  }
}

std::string to_text(const ExperimentConfig& cfg) {
  std::ostringstream os;
  write_experiment_config(os, cfg);
  return os.str();
}

}  // namespace gradw::cli
