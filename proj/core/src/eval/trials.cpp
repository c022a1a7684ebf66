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

#include "gradw/eval/trials.hpp"

#include <algorithm>
#include <iomanip>
#include <istream>
#include <locale>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "gradw/common/config_text.hpp"
#include "gradw/common/random.hpp"
#include "gradw/dsp/mixing.hpp"
#include "gradw/eval/metrics.hpp"

namespace gradw {

void write_trials(std::ostream& out, const std::vector<Trial>& trials) {
  for (const auto& t : trials) out << (t.target ? 1 : 0) << ' ' << t.enroll << ' ' << t.test << '\n';
}

std::vector<Trial> read_trials(std::istream& in) {
  std::vector<Trial> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string label, enroll, test, extra;
    if (!(ss >> label >> enroll >> test) || (ss >> extra) || (label != "0" && label != "1")) {
      throw std::invalid_argument("trial list line " + std::to_string(lineno) +
                                  ": expected 'label enroll_id test_id'");
    }
    out.push_back({label == "1", enroll, test});
  }
  return out;
}

std::vector<Utterance> eval_utterances(std::size_t speakers, std::size_t per_speaker,
                                       double seconds, std::uint64_t seed, int sample_rate) {
  std::vector<Utterance> out;
  char buf[64];
  for (std::size_t s = 0; s < speakers; ++s) {
    for (std::size_t u = 0; u < per_speaker; ++u) {
      std::snprintf(buf, sizeof buf, "eval_spk%03zu_utt%03zu", s, u);
      out.push_back({buf, s, synth_utterance(s, seconds, derive_seed(seed, {0xe7a1, s, u}), sample_rate)});
    }
  }
  return out;
}

std::vector<Trial> make_trials(const std::vector<Utterance>& utts, std::size_t n_target,
                               std::size_t n_nontarget, std::uint64_t seed) {
  std::map<std::size_t, std::vector<std::size_t>> by_speaker;
  for (std::size_t i = 0; i < utts.size(); ++i) by_speaker[utts[i].speaker].push_back(i);
  std::vector<std::size_t> multi;
  for (const auto& [s, idx] : by_speaker) {
    if (idx.size() >= 2) multi.push_back(s);
  }
  if (n_target > 0 && multi.empty()) throw std::invalid_argument("trials: no speaker has two utterances");
  if (n_nontarget > 0 && by_speaker.size() < 2) throw std::invalid_argument("trials: need two speakers");

  Rng rng = make_rng(seed, {0x7a1});
  std::set<std::pair<std::size_t, std::size_t>> used;
  auto draw = [&](auto&& pick) {
    for (int attempt = 0;; ++attempt) {
      const auto [a, b] = pick();
      if (used.insert({a, b}).second || attempt > 100) {
        return Trial{utts[a].speaker == utts[b].speaker, utts[a].id, utts[b].id};
      }
    }
  };
  std::vector<Trial> out;
  for (std::size_t k = 0; k < n_target; ++k) {
    out.push_back(draw([&] {
      const auto& idx = by_speaker[multi[uniform_index(rng, multi.size())]];
      const std::size_t a = uniform_index(rng, idx.size());
      const std::size_t b = (a + 1 + uniform_index(rng, idx.size() - 1)) % idx.size();
      return std::pair{idx[a], idx[b]};
    }));
  }
  for (std::size_t k = 0; k < n_nontarget; ++k) {
    out.push_back(draw([&] {
      while (true) {
        const std::size_t a = uniform_index(rng, utts.size()), b = uniform_index(rng, utts.size());
        if (utts[a].speaker != utts[b].speaker) return std::pair{a, b};
      }
    }));
  }
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

std::string Condition::label() const { return snr_db ? format_double(*snr_db) : "clean"; }

Condition parse_condition(std::string_view text) {
  if (text == "clean") return {};
  try {
    return {parse_double(text)};
  } catch (const std::invalid_argument&) {
    throw std::invalid_argument("condition must be 'clean' or an SNR in dB, got '" +
                                std::string(text) + "'");
  }
}

std::vector<Condition> parse_condition_list(std::string_view text) {
  std::vector<Condition> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto comma = std::min(text.find(',', pos), text.size());
    out.push_back(parse_condition(text.substr(pos, comma - pos)));
    pos = comma + 1;
  }
  return out;
}

Waveform corrupt_for_eval(const Waveform& clean, double snr_db, const EvalSetup& setup,
                          std::uint64_t seed, std::size_t index) {
  if (setup.noise_kinds.empty()) throw std::invalid_argument("eval: no noise kinds configured");
  Rng rng = make_rng(seed, {0xe5a1, index});
  const NoiseKind kind = setup.noise_kinds[uniform_index(rng, setup.noise_kinds.size())];
  const double seconds = clean.duration();
  Waveform noise;
  if (kind == NoiseKind::babble_source) {
    std::vector<Waveform> sources;
    for (std::size_t k = 0; k < setup.babble_sources; ++k) {
      sources.push_back(synth_noise(kind, seconds, rng(), clean.sample_rate));
    }
    noise = make_babble(sources, std::vector<double>(sources.size(), 0.0), clean, rng());
  } else {
    noise = synth_noise(kind, seconds, rng(), clean.sample_rate);
  }
  return mix_at_snr(clean, noise, snr_db, rng()).mixture;
}

template <typename T>
EvalRow run_trial_eval(const std::vector<Trial>& trials, const std::vector<Utterance>& utts,
                       SpeakerNet<T>& speaker, const Enhancer* enhancer, const Condition& condition,
                       const EvalSetup& setup, const std::string& variant, std::uint64_t seed) {
  if (trials.empty()) throw std::invalid_argument("eval: empty trial list");
  std::map<std::string, const Utterance*> lookup;
  for (const auto& u : utts) lookup[u.id] = &u;
  auto resolve = [&](const std::string& id) {
    const auto it = lookup.find(id);
    if (it == lookup.end()) throw std::invalid_argument("eval: unknown utterance '" + id + "'");
    return it->second;
  };
  MelExtractor extract(setup.mel);
  auto embedding = [&](const Waveform& w) {
    FeatureMap f = extract(w);
    if (enhancer) f = (*enhancer)(f);
    return embed(speaker, f);
  };

  std::map<std::string, std::vector<T>> enrolled;
  EvalRow row{condition.label(), variant, 0, 0, trials.size(), seed, {}};
  std::vector<int> labels;
  for (std::size_t i = 0; i < trials.size(); ++i) {
    const Trial& t = trials[i];
    const Utterance* e = resolve(t.enroll);
    const Utterance* x = resolve(t.test);
    auto it = enrolled.find(t.enroll);
    if (it == enrolled.end()) it = enrolled.emplace(t.enroll, embedding(e->audio)).first;
    const Waveform test = condition.snr_db
                              ? corrupt_for_eval(x->audio, *condition.snr_db, setup, seed, i)
                              : x->audio;
    const auto te = embedding(test);
    row.scores.push_back(cosine_score(std::span<const T>(it->second), std::span<const T>(te)));
    labels.push_back(t.target ? 1 : 0);
  }
  row.eer = compute_eer(row.scores, labels).eer;
  row.min_dcf = compute_min_dcf(row.scores, labels, setup.p_target, setup.c_miss, setup.c_fa);
  return row;
}

void write_eval_report(std::ostream& out, const std::vector<EvalRow>& rows) {
  out.imbue(std::locale::classic());
  out << "condition,variant,eer,min_dcf,n_trials,seed\n" << std::setprecision(9);
  for (const auto& r : rows) {
    out << r.condition << ',' << r.variant << ',' << r.eer << ',' << r.min_dcf << ','
        << r.n_trials << ',' << r.seed << '\n';
  }
}

template EvalRow run_trial_eval(const std::vector<Trial>&, const std::vector<Utterance>&,
                                SpeakerNet<float>&, const Enhancer*, const Condition&,
                                const EvalSetup&, const std::string&, std::uint64_t);
template EvalRow run_trial_eval(const std::vector<Trial>&, const std::vector<Utterance>&,
                                SpeakerNet<double>&, const Enhancer*, const Condition&,
                                const EvalSetup&, const std::string&, std::uint64_t);

}  // namespace gradw
