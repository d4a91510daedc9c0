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
#ifndef CSEG_EXPERIMENT_H_
#define CSEG_EXPERIMENT_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cseg/taskbench/shapeworld.h"
#include "cseg/taskbench/splits.h"
#include "cseg/trainer.h"

namespace cseg {

inline constexpr const char* kExperimentSchema = "cseg.experiment/1";

// Either a generated ShapeWorld set or a directory in the images/labels
// layout (relative paths resolve against the config file's directory).
struct DatasetSource {
  std::optional<ShapeWorldConfig> shapeworld;
  std::filesystem::path directory;
};

struct DomainSource {
  std::string name;
  DatasetSource train;
  DatasetSource eval;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::filesystem::path output_dir;
  Method method = Method::kFT;

  Protocol protocol = Protocol::kClassIncremental;
  int num_classes = 0;
  int ignore_id = kDefaultIgnoreId;
  SplitOptions split;
  // class-incremental
  DatasetSource train;
  DatasetSource eval;
  ClassPartition partition;
  // domain-incremental
  std::vector<DomainSource> domains;
  ClassSet shared_classes;

  ModelCapacity capacity;
  // Fully resolved training settings for every method: the shared
  // "training" section with that method's "methods" overrides applied.
  std::map<Method, MethodConfig> method_configs;

  // Canonical JSON of the effective configuration and its FNV-1a hash.
  std::string resolved_json;
  std::string fingerprint;

  const MethodConfig& method_config() const { return method_configs.at(method); }
};

// Command-line values that take precedence over the file.
struct ConfigOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> method;
  std::optional<std::filesystem::path> output_dir;
};

// Validates the whole document before returning; unknown keys and bad
// values raise ConfigError naming the offending key path. A missing
// output_dir defaults to $CSEG_OUTPUT_ROOT (or "runs") / `default_name`.
ExperimentConfig parse_experiment_config(const std::string& text,
                                         const ConfigOverrides& overrides = {},
                                         const std::string& default_name = "experiment",
                                         const std::filesystem::path& base_dir = {});
ExperimentConfig load_experiment_config(const std::filesystem::path& path,
                                        const ConfigOverrides& overrides = {});

struct ExperimentData {
  TaskSequence sequence;
  // Original fully labeled training sets, one per source.
  std::vector<Dataset> train_sets;
  std::vector<Dataset> eval_sets;
};

ExperimentData build_experiment_data(const ExperimentConfig& config);

// Writes every dataset under `dir` (train/ and eval/ per source) plus the
// split manifest.
void write_experiment_data(const ExperimentData& data, const ExperimentConfig& config,
                           const std::filesystem::path& dir);

// Runs the configured method (joint training for Non-Incremental). When
// `run_dir` is non-empty, checkpoints, logs, importance maps and buffer
// manifests are written per increment, followed by the results and report.
SequenceRun run_experiment(const ExperimentConfig& config, const ExperimentData& data,
                           const std::filesystem::path& run_dir = {});

}  // namespace cseg

#endif  // CSEG_EXPERIMENT_H_
