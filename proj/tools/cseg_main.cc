/* Copyright 2026 The cseg Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
// Command-line entry point: generate datasets, run methods, compare runs.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cseg/checkpoint.h"
#include "cseg/eval.h"
#include "cseg/experiment.h"
#include "cseg/trainer.h"

namespace fs = std::filesystem;

namespace {

// Exit codes, one per failure class.
enum ExitCode {
  kOk = 0,
  kInternal = 1,
  kUsage = 2,  // bad flags, config schema errors, invalid arguments
  kIo = 3,
  kInfeasibleSplit = 4,
  kDiverged = 5,
  kOutputExists = 6,
  kInconsistent = 7,  // shape or layout mismatch between data and model
  kUndefinedMetric = 8,
};

class OutputExists : public cseg::Error {
 public:
  using Error::Error;
};

void prepare_output(const fs::path& dir, bool force) {
  if (fs::exists(dir) && !fs::is_empty(dir)) {
    if (!force) throw OutputExists(dir.string() + " exists and is not empty (use --force)");
    fs::remove_all(dir);
  }
  fs::create_directories(dir);
}

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string method;
  bool force = false;

  cseg::ConfigOverrides overrides() const {
    cseg::ConfigOverrides o;
    o.seed = seed;
    if (!method.empty()) o.method = method;
    if (!out.empty()) o.output_dir = out;
    return o;
  }
};

int cmd_generate(const CommonFlags& flags) {
  auto overrides = flags.overrides();
  overrides.output_dir.reset();
  const cseg::ExperimentConfig config = cseg::load_experiment_config(flags.config, overrides);
  const fs::path dir = flags.out.empty() ? config.output_dir / "data" : fs::path(flags.out);
  const cseg::ExperimentData data = cseg::build_experiment_data(config);
  prepare_output(dir, flags.force);
  cseg::write_experiment_data(data, config, dir);
  std::size_t images = 0;
  for (const auto& d : data.train_sets) images += d.samples.size();
  for (const auto& d : data.eval_sets) images += d.samples.size();
  std::cout << "wrote " << images << " images and manifest.txt to " << dir.string() << "\n";
  return kOk;
}

int cmd_run(const CommonFlags& flags) {
  const cseg::ExperimentConfig config = cseg::load_experiment_config(flags.config, flags.overrides());
  const fs::path dir = config.output_dir / cseg::method_name(config.method);
  if (fs::exists(dir) && !fs::is_empty(dir) && !flags.force) {
    throw OutputExists(dir.string() + " exists and is not empty (use --force)");
  }
  const cseg::ExperimentData data = cseg::build_experiment_data(config);
  prepare_output(dir, flags.force);
  std::cerr << "running " << cseg::method_name(config.method) << " on "
            << data.sequence.tasks.size() << " task(s), output " << dir.string() << "\n";
  const cseg::SequenceRun run = cseg::run_experiment(config, data, dir);
  std::cout << cseg::build_report(run.results).text;
  return kOk;
}

int cmd_report(const std::vector<std::string>& inputs, const std::string& out) {
  std::vector<cseg::ResultsMatrix> runs;
  for (const auto& input : inputs) {
    fs::path p = input;
    if (fs::is_directory(p)) p /= "results.json";
    runs.push_back(cseg::results_from_json(cseg::read_text_file(p)));
  }
  const std::string table = cseg::comparison_table(runs);
  if (!out.empty()) cseg::write_text_file(out, table);
  std::cout << table;
  return kOk;
}

int cmd_list_methods() {
  for (cseg::Method m : cseg::all_methods()) std::cout << cseg::method_name(m) << "\n";
  return kOk;
}

void add_common(CLI::App* cmd, CommonFlags& flags, bool with_method) {
  cmd->add_option("--config", flags.config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", flags.seed, "Override the config seed");
  cmd->add_option("--out", flags.out, "Output directory (default: config output_dir, else $CSEG_OUTPUT_ROOT/<config name>)");
  if (with_method) cmd->add_option("--method", flags.method, "Override the config method (see list-methods)");
  cmd->add_flag("--force", flags.force, "Replace an existing non-empty output directory");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Continual semantic segmentation experiments"};
  app.require_subcommand(1);
  app.footer(
      "Exit codes: 0 success, 1 internal error, 2 usage or config error, 3 I/O error,\n"
      "4 infeasible class split, 5 training diverged, 6 output exists, 7 data/model\n"
      "inconsistency, 8 undefined metric.\n"
      "Flags take precedence over config keys, which take precedence over defaults.");

  CommonFlags gen_flags, run_flags;
  auto* generate = app.add_subcommand("generate", "Write the configured datasets and split manifest");
  add_common(generate, gen_flags, false);
  auto* run = app.add_subcommand("run", "Train and evaluate one method over the task sequence");
  add_common(run, run_flags, true);
  std::vector<std::string> report_inputs;
  std::string report_out;
  auto* report = app.add_subcommand("report", "Compare results of several runs side by side");
  report->add_option("results", report_inputs, "Run directories or results.json files")->required();
  report->add_option("--out", report_out, "Also write the table to this file");
  auto* list = app.add_subcommand("list-methods", "Print the available methods");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*generate) return cmd_generate(gen_flags);
    if (*run) return cmd_run(run_flags);
    if (*report) return cmd_report(report_inputs, report_out);
    if (*list) return cmd_list_methods();
  } catch (const cseg::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kUsage;
  } catch (const cseg::InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const cseg::IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kIo;
  } catch (const cseg::InfeasibleSplit& e) {
    std::cerr << "infeasible split: " << e.what() << "\n";
    return kInfeasibleSplit;
  } catch (const cseg::TrainingDiverged& e) {
    std::cerr << "training diverged: " << e.what() << "\n";
    return kDiverged;
  } catch (const OutputExists& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kOutputExists;
  } catch (const cseg::ShapeMismatch& e) {
    std::cerr << "inconsistent data: " << e.what() << "\n";
    return kInconsistent;
  } catch (const cseg::LayoutMismatch& e) {
    std::cerr << "inconsistent data: " << e.what() << "\n";
    return kInconsistent;
  } catch (const cseg::UndefinedMetric& e) {
    std::cerr << "undefined metric: " << e.what() << "\n";
    return kUndefinedMetric;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kInternal;
  }
  return kInternal;
}
