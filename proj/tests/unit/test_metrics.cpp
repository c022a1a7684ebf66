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

#include <cmath>
#include <sstream>

#include "doctest.h"
#include "gradw/common/random.hpp"
#include "gradw/dsp/mixing.hpp"
#include "gradw/eval/metrics.hpp"
#include "gradw/eval/trials.hpp"
#include "oracles.hpp"

using namespace gradw;

namespace {

double eer(const std::vector<double>& s, const std::vector<int>& l) { return compute_eer(s, l).eer; }
double dcf(const std::vector<double>& s, const std::vector<int>& l) { return compute_min_dcf(s, l); }

struct ScoreSet {
  std::vector<double> scores;
  std::vector<int> labels;
};

ScoreSet random_set(Rng& rng) {
  const std::size_t n = 2 + uniform_index(rng, 199);
  const bool coarse = uniform_index(rng, 3) == 0;  // forces ties
  const double shift = uniform(rng, -1.0, 2.0);
  ScoreSet s;
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(uniform_index(rng, 2));
    double v = gaussian(rng, label ? shift : 0.0);
    if (coarse) v = std::round(v * 4) / 4;
    s.scores.push_back(v);
    s.labels.push_back(label);
  }
  s.labels[0] = 1;
  s.labels[1] = 0;
  return s;
}

}  // namespace

TEST_CASE("cosine score") {
  const std::vector<double> a{1, 2, 3}, b{-2, 1, 0}, c{-1, -2, -3};
  CHECK(cosine_score(a, a) == doctest::Approx(1.0));
  CHECK(cosine_score(a, b) == 0.0);
  CHECK(cosine_score(a, c) == doctest::Approx(-1.0));
  const std::vector<float> f{1, 0}, g{1, 1};
  CHECK(cosine_score(f, g) == doctest::Approx(std::sqrt(0.5)));
  CHECK_THROWS(cosine_score(a, std::vector<double>{0, 0, 0}));
  CHECK_THROWS(cosine_score(a, std::vector<double>{1, 2}));
}

TEST_CASE("eer examples") {
  CHECK(eer({0.9, 0.8, 0.1, 0.2}, {1, 1, 0, 0}) == 0.0);
  CHECK(eer({0.1, 0.2, 0.9, 0.8}, {1, 1, 0, 0}) == 1.0);
  CHECK(eer({0.8, 0.4, 0.6, 0.2}, {1, 1, 0, 0}) == 0.5);
  const auto r = compute_eer(std::vector<double>{0.8, 0.4, 0.6, 0.2}, std::vector<int>{1, 1, 0, 0});
  CHECK(r.threshold > 0.4 - 1e-12);
  CHECK(r.threshold <= 0.6);
  CHECK_THROWS(eer({0.1, 0.2}, {1, 1}));
  CHECK_THROWS(eer({0.1, NAN}, {1, 0}));
  CHECK_THROWS(eer({0.1, 0.2}, {1}));
}

TEST_CASE("min dcf examples") {
  CHECK(dcf({0.9, 0.8, 0.1, 0.2}, {1, 1, 0, 0}) == 0.0);
  CHECK(dcf({0.1, 0.2, 0.9, 0.8}, {1, 1, 0, 0}) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS(dcf({0.1, 0.2}, {0, 0}));
  CHECK_THROWS(compute_min_dcf(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 0}, 0.0));
  CHECK_THROWS(compute_min_dcf(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 0}, 0.01, -1.0));
}

TEST_CASE("metrics agree with a brute-force sweep on 1000 random sets") {
  Rng rng(77);
  double worst_eer = 0, worst_dcf = 0;
  for (int rep = 0; rep < 1000; ++rep) {
    const auto s = random_set(rng);
    const double e = eer(s.scores, s.labels);
    const double d = dcf(s.scores, s.labels);
    worst_eer = std::max(worst_eer, std::abs(e - testing::brute_force_eer(s.scores, s.labels)));
    worst_dcf = std::max(worst_dcf, std::abs(d - testing::brute_force_min_dcf(s.scores, s.labels, 0.01, 1, 1)));
    CHECK(e >= 0.0);
    CHECK(e <= 1.0);
    CHECK(d >= 0.0);
    CHECK(d <= 1.0 + 1e-12);
  }
  CHECK(worst_eer <= 1e-9);
  CHECK(worst_dcf <= 1e-9);
}

TEST_CASE("metrics are invariant under increasing score transforms") {
  Rng rng(5);
  for (int rep = 0; rep < 200; ++rep) {
    const auto s = random_set(rng);
    const double e = eer(s.scores, s.labels), d = dcf(s.scores, s.labels);
    for (int kind = 0; kind < 3; ++kind) {
      std::vector<double> t = s.scores;
      for (auto& v : t) v = kind == 0 ? 3.5 * v + 1 : kind == 1 ? std::exp(v) : v * v * v + v;
      CHECK(std::abs(eer(t, s.labels) - e) <= 1e-12);
      CHECK(std::abs(dcf(t, s.labels) - d) <= 1e-12);
    }
  }
}

TEST_CASE("trial lists") {
  const auto utts = eval_utterances(4, 3, 0.3, 11);
  CHECK(utts.size() == 12);
  CHECK(utts[4].id == "eval_spk001_utt001");
  CHECK(utts[4].speaker == 1);
  const auto trials = make_trials(utts, 10, 15, 2);
  CHECK(trials.size() == 25);
  std::size_t targets = 0;
  for (const auto& t : trials) {
    const auto& e = *std::find_if(utts.begin(), utts.end(), [&](const Utterance& u) { return u.id == t.enroll; });
    const auto& x = *std::find_if(utts.begin(), utts.end(), [&](const Utterance& u) { return u.id == t.test; });
    CHECK(t.enroll != t.test);
    CHECK(t.target == (e.speaker == x.speaker));
    targets += t.target;
  }
  CHECK(targets == 10);
  CHECK(make_trials(utts, 10, 15, 2) == trials);
  std::stringstream ss;
  write_trials(ss, trials);
  CHECK(ss.str().rfind(trials[0].target ? "1 " : "0 ", 0) == 0);
  CHECK(read_trials(ss) == trials);
}

TEST_CASE("conditions") {
  CHECK_FALSE(parse_condition("clean").snr_db.has_value());
  CHECK(*parse_condition("-5").snr_db == -5.0);
  const auto list = parse_condition_list("-15,-10,-5,0,5,10,15,clean");
  CHECK(list.size() == 8);
  CHECK(list.back().label() == "clean");
  CHECK(list[2].label() == "-5");
  CHECK_THROWS(parse_condition("loud"));
}

TEST_CASE("evaluation corruption is paired and hits the SNR") {
  const auto utts = eval_utterances(2, 1, 0.5, 3);
  const EvalSetup setup;
  for (std::size_t i = 0; i < 6; ++i) {
    auto a = corrupt_for_eval(utts[0].audio, -5.0, setup, 9, i);
    CHECK(a == corrupt_for_eval(utts[0].audio, -5.0, setup, 9, i));
    std::vector<float> noise(a.size());
    for (std::size_t k = 0; k < a.size(); ++k) noise[k] = a.samples[k] - utts[0].audio.samples[k];
    CHECK(std::abs(measure_snr_db(utts[0].audio.samples, noise) - (-5.0)) < 0.05);
  }
}

TEST_CASE("trial evaluation: bypass and identity mask") {
  SpeakerNetConfig cfg;
  cfg.num_speakers = 4;
  SpeakerNet<float> net(cfg, 3);
  net.freeze();
  const auto utts = eval_utterances(4, 2, 0.4, 1);
  const auto trials = make_trials(utts, 6, 6, 1);
  const EvalSetup setup;
  const Enhancer identity = [](const FeatureMap& x) { return enhance(x, Mask{x.frames, x.bins, std::vector<float>(x.values.size(), 1.0f)}); };
  const auto plain = run_trial_eval(trials, utts, net, nullptr, Condition{}, setup, "noisy", 4);
  const auto masked = run_trial_eval(trials, utts, net, &identity, Condition{}, setup, "identity", 4);
  CHECK(plain.scores == masked.scores);
  CHECK(plain.n_trials == 12);
  CHECK(plain.eer >= 0.0);
  const auto noisy = run_trial_eval(trials, utts, net, nullptr, Condition{-5.0}, setup, "noisy", 4);
  CHECK(noisy.scores != plain.scores);
  CHECK(run_trial_eval(trials, utts, net, nullptr, Condition{-5.0}, setup, "noisy", 4) == noisy);
  std::vector<Trial> bad{{true, "missing", utts[0].id}};
  CHECK_THROWS(run_trial_eval(bad, utts, net, nullptr, Condition{}, setup, "noisy", 4));
  std::ostringstream os;
  write_eval_report(os, {plain, noisy});
  std::istringstream in(os.str());
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  CHECK(header == "condition,variant,eer,min_dcf,n_trials,seed");
  CHECK(row.rfind("clean,noisy,", 0) == 0);
}
