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
#include "cseg/experiment.h"

#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "cseg/checkpoint.h"
#include "cseg/eval.h"
#include "test_util.h"
#include "json.hpp"

namespace cseg {
namespace {

using Json = nlohmann::json;

Json tiny_class_config() {
  return Json::parse(R"({
    "schema": "cseg.experiment/1",
    "seed": 3,
    "method": "FT",
    "sequence": {
      "protocol": "class-incremental",
      "num_classes": 4,
      "holdout_fraction": 0.2,
      "train": {"shapeworld": {"height": 16, "width": 16, "num_images": 24}},
      "eval": {"shapeworld": {"height": 16, "width": 16, "num_images": 6}},
      "partition": {"subsets": [[0, 1], [2, 3]]}
    },
    "model": {"widths": [4, 8], "dilations": [1]},
    "training": {"max_epochs": 1, "batch_size": 4, "lr": 0.01, "lowered_lr": 0.001}
  })");
}

Json tiny_domain_config() {
  return Json::parse(R"({
    "schema": "cseg.experiment/1",
    "sequence": {
      "protocol": "domain-incremental",
      "num_classes": 3,
      "domains": [
        {"name": "plain",
         "train": {"shapeworld": {"height": 16, "width": 16, "num_images": 8}},
         "eval": {"shapeworld": {"height": 16, "width": 16, "num_images": 4}}},
        {"name": "rotated",
         "train": {"shapeworld": {"height": 16, "width": 16, "num_images": 8,
                                  "domain": {"palette_rotation": 2}}},
         "eval": {"shapeworld": {"height": 16, "width": 16, "num_images": 4,
                                 "domain": {"palette_rotation": 2}}}}
      ]
    }
  })");
}

std::string config_error_key(const Json& doc) {
  try {
    parse_experiment_config(doc.dump());
  } catch (const ConfigError& e) {
    return e.key();
  }
  return "<accepted>";
}

TEST(ExperimentTest, ParsesClassIncrementalConfig) {
  const ExperimentConfig c = parse_experiment_config(tiny_class_config().dump());
  EXPECT_EQ(c.protocol, Protocol::kClassIncremental);
  EXPECT_EQ(c.num_classes, 4);
  EXPECT_EQ(c.seed, 3u);
  ASSERT_EQ(c.partition.subsets.size(), 2u);
  EXPECT_EQ(c.partition.subsets[1], (ClassSet{2, 3}));
  EXPECT_EQ(c.capacity.widths, (std::vector<int>{4, 8}));
  EXPECT_EQ(c.method_configs.size(), all_methods().size());
  EXPECT_EQ(c.method_config().schedule.max_epochs, 1);
  EXPECT_DOUBLE_EQ(c.method_config().post_first_task.lowered_lr, 0.001);
}

TEST(ExperimentTest, ParsesDomainIncrementalConfig) {
  const ExperimentConfig c = parse_experiment_config(tiny_domain_config().dump());
  ASSERT_EQ(c.domains.size(), 2u);
  EXPECT_EQ(c.domains[1].name, "rotated");
  EXPECT_EQ(c.domains[1].train.shapeworld->domain.palette_rotation, 2);
  EXPECT_EQ(c.shared_classes, (ClassSet{0, 1, 2}));
  const ExperimentData data = build_experiment_data(c);
  ASSERT_EQ(data.sequence.tasks.size(), 2u);
  for (const auto& t : data.sequence.tasks) EXPECT_EQ(t.labeled_classes, c.shared_classes);
}

TEST(ExperimentTest, UnknownKeysNameTheirPath) {
  Json doc = tiny_class_config();
  doc["training"]["learning_rate"] = 1.0;
  EXPECT_EQ(config_error_key(doc), "training.learning_rate");

  doc = tiny_class_config();
  doc["sequence"]["train"]["shapeworld"]["colour"] = 1;
  EXPECT_EQ(config_error_key(doc), "sequence.train.shapeworld.colour");

  doc = tiny_class_config();
  doc["extra"] = true;
  EXPECT_EQ(config_error_key(doc), "extra");

  doc = tiny_domain_config();
  doc["sequence"]["domains"][1]["eval"]["shapeworld"]["domain"]["hue"] = 0.1;
  EXPECT_EQ(config_error_key(doc), "sequence.domains[1].eval.shapeworld.domain.hue");
}

TEST(ExperimentTest, BadValuesNameTheirPath) {
  Json doc = tiny_class_config();
  doc["schema"] = "cseg.experiment/2";
  EXPECT_EQ(config_error_key(doc), "schema");

  doc = tiny_class_config();
  doc["training"]["lr"] = -1.0;
  EXPECT_EQ(config_error_key(doc), "training.lr");

  doc = tiny_class_config();
  doc["sequence"]["protocol"] = "task-incremental";
  EXPECT_EQ(config_error_key(doc), "sequence.protocol");

  doc = tiny_class_config();
  doc["sequence"]["ignore_id"] = 2;
  EXPECT_EQ(config_error_key(doc), "sequence.ignore_id");

  doc = tiny_class_config();
  doc["methods"] = {{"EWCC", {{"lambda", 1.0}}}};
  EXPECT_EQ(config_error_key(doc), "methods.EWCC");

  doc = tiny_class_config();
  doc["methods"] = {{"MAS", {{"lambda", -2.0}}}};
  EXPECT_EQ(config_error_key(doc), "methods.MAS.lambda");

  doc = tiny_class_config();
  doc["method"] = "SGD";
  EXPECT_EQ(config_error_key(doc), "method");

  EXPECT_THROW(parse_experiment_config("{not json"), ConfigError);
  EXPECT_THROW(parse_experiment_config("[]"), ConfigError);
}

TEST(ExperimentTest, LambdaDefaultsPerMethodUnlessShared) {
  const ExperimentConfig c = parse_experiment_config(tiny_class_config().dump());
  for (Method m : all_methods()) {
    EXPECT_DOUBLE_EQ(c.method_configs.at(m).loss.lambda, default_lambda(m)) << method_name(m);
  }
  Json doc = tiny_class_config();
  doc["training"]["lambda"] = 7.0;
  doc["methods"] = {{"EWC", {{"lambda", 2.5}}}};
  const ExperimentConfig shared = parse_experiment_config(doc.dump());
  for (Method m : all_methods()) {
    EXPECT_DOUBLE_EQ(shared.method_configs.at(m).loss.lambda, m == Method::kEWC ? 2.5 : 7.0);
  }
}

TEST(ExperimentTest, OverridesWinOverTheFile) {
  ConfigOverrides o;
  o.seed = 99;
  o.method = "Replay";
  o.output_dir = "/tmp/somewhere";
  const ExperimentConfig c = parse_experiment_config(tiny_class_config().dump(), o);
  EXPECT_EQ(c.seed, 99u);
  EXPECT_EQ(c.method, Method::kReplay);
  EXPECT_EQ(c.output_dir, std::filesystem::path("/tmp/somewhere"));
  EXPECT_EQ(c.method_config().seed, 99u);
}

TEST(ExperimentTest, FingerprintTracksEffectiveSettingsOnly) {
  const Json doc = tiny_class_config();
  const ExperimentConfig a = parse_experiment_config(doc.dump());
  const ExperimentConfig b = parse_experiment_config(doc.dump(4));
  EXPECT_EQ(a.fingerprint, b.fingerprint);
  EXPECT_EQ(a.resolved_json, b.resolved_json);
  ConfigOverrides other_dir;
  other_dir.output_dir = "/tmp/elsewhere";
  EXPECT_EQ(parse_experiment_config(doc.dump(), other_dir).fingerprint, a.fingerprint);
  ConfigOverrides other_seed;
  other_seed.seed = 4;
  EXPECT_NE(parse_experiment_config(doc.dump(), other_seed).fingerprint, a.fingerprint);
}

TEST(ExperimentTest, DataIsDeterministicInTheSeed) {
  const ExperimentConfig c = parse_experiment_config(tiny_class_config().dump());
  const ExperimentData a = build_experiment_data(c);
  const ExperimentData b = build_experiment_data(c);
  ASSERT_EQ(a.sequence.tasks.size(), 2u);
  for (std::size_t t = 0; t < 2; ++t) {
    ASSERT_EQ(a.sequence.tasks[t].samples.size(), b.sequence.tasks[t].samples.size());
    for (std::size_t i = 0; i < a.sequence.tasks[t].samples.size(); ++i) {
      const auto& x = a.sequence.tasks[t].samples[i];
      const auto& y = b.sequence.tasks[t].samples[i];
      EXPECT_EQ(x.source_id, y.source_id);
      EXPECT_EQ(x.label.values(), y.label.values());
      EXPECT_EQ(x.image.values(), y.image.values());
    }
  }
}

TEST(ExperimentTest, RunWritesArtifactsPerIncrement) {
  testing::TempDir dir("experiment_run");
  ConfigOverrides o;
  o.method = "EWC";
  const ExperimentConfig c = parse_experiment_config(tiny_class_config().dump(), o);
  const ExperimentData data = build_experiment_data(c);
  const SequenceRun run = run_experiment(c, data, dir.path());
  for (const char* f : {"config.json", "results.json", "manifest.txt"}) {
    EXPECT_TRUE(std::filesystem::exists(dir.path() / f)) << f;
  }
  const ResultsMatrix back = results_from_json(read_text_file(dir.path() / "results.json"));
  EXPECT_EQ(results_to_json(back), results_to_json(run.results));
  // Each increment leaves a checkpoint that reproduces the live model's head layout.
  int checkpoints = 0;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir.path())) {
    if (e.path().filename() == "checkpoint.json") ++checkpoints;
    if (e.path().filename() == "importance.json") {
      EXPECT_EQ(importance_from_json(read_text_file(e.path())).method, "ewc");
    }
  }
  EXPECT_EQ(checkpoints, 2);
  EXPECT_EQ(checkpoint_from_json(checkpoint_to_json(run.model)).output_classes(),
            run.model.output_classes());
}

TEST(ExperimentTest, ShippedConfigsParse) {
  for (const char* name : {"class_incremental.json", "domain_incremental.json"}) {
    const auto path = std::filesystem::path(CSEG_CONFIG_DIR) / name;
    const ExperimentConfig c = load_experiment_config(path);
    EXPECT_EQ(c.output_dir.filename(), path.stem()) << name;
    EXPECT_EQ(c.method_configs.size(), all_methods().size()) << name;
  }
}

// ---- command-line behaviour ----

struct Invocation {
  int exit_code = -1;
  std::string out;
};

Invocation run_cli(const std::string& args, const std::filesystem::path& scratch) {
  const auto out_file = scratch / "stdout.txt";
  const std::string cmd = std::string("\"") + CSEG_CLI_PATH + "\" " + args + " > \"" +
                          out_file.string() + "\" 2> \"" + (scratch / "stderr.txt").string() + "\"";
  const int status = std::system(cmd.c_str());
  Invocation inv;
  inv.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(out_file);
  std::ostringstream ss;
  ss << in.rdbuf();
  inv.out = ss.str();
  return inv;
}

std::filesystem::path write_config(const std::filesystem::path& dir, const Json& doc,
                                   const std::string& name = "cfg.json") {
  const auto path = dir / name;
  std::ofstream(path) << doc.dump(2);
  return path;
}

std::string file_bytes(const std::filesystem::path& p) { return read_text_file(p); }

TEST(CliTest, ListMethodsPrintsEveryMethod) {
  testing::TempDir dir("cli_list");
  const Invocation inv = run_cli("list-methods", dir.path());
  EXPECT_EQ(inv.exit_code, 0);
  std::istringstream lines(inv.out);
  std::vector<std::string> names;
  for (std::string l; std::getline(lines, l);) names.push_back(l);
  ASSERT_EQ(names.size(), all_methods().size());
  for (std::size_t i = 0; i < names.size(); ++i) EXPECT_EQ(names[i], method_name(all_methods()[i]));
}

TEST(CliTest, UsageAndConfigErrorsExitWithTwo) {
  testing::TempDir dir("cli_usage");
  EXPECT_EQ(run_cli("frobnicate", dir.path()).exit_code, 2);
  EXPECT_EQ(run_cli("run", dir.path()).exit_code, 2);
  Json doc = tiny_class_config();
  doc["training"]["momentum"] = 0.9;
  const auto cfg = write_config(dir.path(), doc);
  EXPECT_EQ(run_cli("generate --config \"" + cfg.string() + "\" --out \"" +
                        (dir.path() / "g").string() + "\"",
                    dir.path())
                .exit_code,
            2);
  EXPECT_NE(file_bytes(dir.path() / "stderr.txt").find("training.momentum"), std::string::npos);
  EXPECT_FALSE(std::filesystem::exists(dir.path() / "g"));
}

TEST(CliTest, MissingDataDirectoryIsAnIoError) {
  testing::TempDir dir("cli_io");
  Json doc = tiny_class_config();
  doc["sequence"]["train"] = {{"directory", "does_not_exist"}};
  const auto cfg = write_config(dir.path(), doc);
  EXPECT_EQ(run_cli("generate --config \"" + cfg.string() + "\" --out \"" +
                        (dir.path() / "g").string() + "\"",
                    dir.path())
                .exit_code,
            3);
}

TEST(CliTest, GenerateIsByteIdenticalAndRefusesToOverwrite) {
  testing::TempDir dir("cli_generate");
  const auto cfg = write_config(dir.path(), tiny_class_config());
  const auto a = dir.path() / "a";
  const auto b = dir.path() / "b";
  ASSERT_EQ(run_cli("generate --config \"" + cfg.string() + "\" --out \"" + a.string() + "\"", dir.path()).exit_code, 0);
  ASSERT_EQ(run_cli("generate --config \"" + cfg.string() + "\" --out \"" + b.string() + "\"", dir.path()).exit_code, 0);
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::recursive_directory_iterator(a)) {
    if (e.is_regular_file()) files.push_back(std::filesystem::relative(e.path(), a));
  }
  EXPECT_GT(files.size(), 30u);
  for (const auto& f : files) {
    ASSERT_TRUE(std::filesystem::exists(b / f)) << f;
    EXPECT_EQ(file_bytes(a / f), file_bytes(b / f)) << f;
  }
  EXPECT_EQ(run_cli("generate --config \"" + cfg.string() + "\" --out \"" + a.string() + "\"", dir.path()).exit_code, 6);
  EXPECT_EQ(run_cli("generate --force --config \"" + cfg.string() + "\" --out \"" + a.string() + "\"", dir.path()).exit_code, 0);
}

TEST(CliTest, RunThenReport) {
  testing::TempDir dir("cli_run");
  const auto cfg = write_config(dir.path(), tiny_class_config());
  const auto out = dir.path() / "runs";
  const std::string base = "run --config \"" + cfg.string() + "\" --out \"" + out.string() + "\"";
  ASSERT_EQ(run_cli(base + " --method FT", dir.path()).exit_code, 0);
  ASSERT_EQ(run_cli(base + " --method LwF", dir.path()).exit_code, 0);
  EXPECT_EQ(run_cli(base + " --method FT", dir.path()).exit_code, 6);
  EXPECT_EQ(run_cli(base + " --method Nope", dir.path()).exit_code, 2);
  const Invocation report = run_cli("report \"" + (out / "FT").string() + "\" \"" + (out / "LwF").string() + "\"", dir.path());
  ASSERT_EQ(report.exit_code, 0);
  EXPECT_NE(report.out.find("FT"), std::string::npos);
  EXPECT_NE(report.out.find("LwF"), std::string::npos);
  EXPECT_EQ(run_cli("report \"" + (dir.path() / "nothing").string() + "\"", dir.path()).exit_code, 3);
}

}  // namespace
}  // namespace cseg
