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

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "gradw/common/config_text.hpp"
#include "gradw_cli/commands.hpp"

using namespace gradw;
using namespace gradw::cli;

namespace {

std::string one_line(std::string s) {
  for (char& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

int fail(const std::string& code, const std::string& message) {
  std::cerr << "error: " << code << ": " << one_line(message) << '\n';
  return code == "usage" ? 2 : 1;
}

LossVariant variant_arg(const std::string& name) {
  try {
    return parse_loss_variant(name);
  } catch (const std::invalid_argument& e) {
    throw CliError("bad_variant", e.what());
  }
}

std::vector<std::string> system_list(const std::string& text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = std::min(text.find(',', start), text.size());
    std::string name = text.substr(start, comma - start);
    if (name != "noisy") variant_arg(name);
    out.push_back(std::move(name));
    start = comma + 1;
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gradw: gradient-weighted feature loss for speech enhancement"};
  app.require_subcommand(1);
  std::string config_path, out_dir = "gradw_out";
  std::optional<std::uint64_t> seed;
  bool f64 = false;
  app.add_option("--config", config_path, "Experiment config file");
  app.add_option("--seed", seed, "Overrides the config seed");
  app.add_option("--out", out_dir, "Output directory")->capture_default_str();
  app.add_flag("--f64", f64, "Run in 64-bit precision");

  auto* synth = app.add_subcommand("synth-data", "Synthesize the corpus and noise pool");
  auto* pretrain = app.add_subcommand("pretrain", "Train and freeze the speaker network");

  auto* train = app.add_subcommand("train-enh", "Train an enhancer against the frozen speaker network");
  std::string variant_name;
  train->add_option("--variant", variant_name, "Loss variant")->required();

  auto* evaluate = app.add_subcommand("evaluate", "Verification trials per condition and system");
  std::string snr_list, systems;
  evaluate->add_option("--snr-list", snr_list, "Comma-separated dB values, 'clean' allowed");
  evaluate->add_option("--systems", systems, "Comma-separated: noisy and/or variant names");

  auto* diagnose = app.add_subcommand("diagnose", "Dump feature, gradient and weight maps for one pair");
  DiagnoseRequest req;
  std::string diag_variant = "grad_w";
  std::optional<std::size_t> target;
  diagnose->add_option("--clean", req.clean_wav, "Clean WAV")->required();
  diagnose->add_option("--noisy", req.noisy_wav, "Noisy WAV")->required();
  diagnose->add_option("--system", req.system, "Enhancer checkpoint variant, or noisy")->capture_default_str();
  diagnose->add_option("--variant", diag_variant, "Variant whose D and P are dumped")->capture_default_str();
  diagnose->add_option("--target", target, "Target speaker (default: argmax on clean)");

  for (auto* sub : {synth, pretrain, train, evaluate, diagnose}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what());
  }

  try {
    RunContext ctx;
    ctx.config = config_path.empty() ? ExperimentConfig{} : load_experiment_config(config_path);
    if (seed) ctx.config.seed = *seed;
    if (!snr_list.empty()) {
      try {
        ctx.config.eval.conditions = parse_condition_list(snr_list);
      } catch (const std::invalid_argument& e) {
        throw CliError("bad_argument", e.what());
      }
    }
    if (!systems.empty()) ctx.config.eval.systems = system_list(systems);
    ctx.config.resolve();
    ctx.out.root = out_dir;
    ctx.f64 = f64;
    ctx.progress = &std::cerr;

    const std::string command = app.get_subcommands().front()->get_name();
    if (synth->parsed()) {
      echo_config(ctx, command);
      cmd_synth_data(ctx);
    } else if (pretrain->parsed()) {
      echo_config(ctx, command);
      cmd_pretrain(ctx);
    } else if (train->parsed()) {
      const LossVariant v = variant_arg(variant_name);
      echo_config(ctx, command + "_" + std::string(to_string(v)));
      cmd_train_enh(ctx, v);
    } else if (evaluate->parsed()) {
      echo_config(ctx, command);
      const auto summary = cmd_evaluate(ctx);
      std::cout << "condition,variant,eer,min_dcf\n";
      for (const auto& row : summary.rows) {
        std::cout << row.condition << ',' << row.variant << ',' << format_double(row.eer) << ','
                  << format_double(row.min_dcf) << '\n';
      }
    } else if (diagnose->parsed()) {
      req.variant = variant_arg(diag_variant);
      if (req.system != "noisy") variant_arg(req.system);
      req.target = target;
      echo_config(ctx, command);
      cmd_diagnose(ctx, req);
    }
  } catch (const CliError& e) {
    return fail(e.code(), e.what());
  } catch (const ShapeError& e) {
    return fail("shape_error", e.what());
  } catch (const FrozenError& e) {
    return fail("frozen_error", e.what());
  } catch (const std::invalid_argument& e) {
    return fail("invalid_argument", e.what());
  } catch (const std::exception& e) {
    return fail("internal", e.what());
  }
  return 0;
}
