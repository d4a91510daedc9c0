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

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "cseg/checkpoint.h"
#include "cseg/eval.h"
#include "cseg/taskbench/dataset_io.h"
#include "json.hpp"

namespace cseg {

namespace {

using Json = nlohmann::json;

// Typed access to one JSON object; remembers which keys were read so
// leftovers can be reported as unknown.
class Section {
 public:
  Section(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "must be an object");
  }

  std::string key_path(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }
  bool has(const std::string& key) const { return j_.contains(key); }

  const Json& raw(const std::string& key) {
    used_.insert(key);
    if (!j_.contains(key)) throw ConfigError(key_path(key), "is required");
    return j_.at(key);
  }

  template <typename T>
  T get(const std::string& key) {
    const Json& v = raw(key);
    try {
      return v.get<T>();
    } catch (const Json::exception&) {
      throw ConfigError(key_path(key), "has the wrong type");
    }
  }

  template <typename T>
  T get(const std::string& key, T fallback) {
    if (!j_.contains(key)) {
      used_.insert(key);
      return fallback;
    }
    return get<T>(key);
  }

  Section child(const std::string& key) { return Section(raw(key), key_path(key)); }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!used_.count(it.key())) throw ConfigError(key_path(it.key()), "unknown key");
    }
  }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> used_;
};

double positive(Section& s, const std::string& key, double fallback) {
  const double v = s.get<double>(key, fallback);
  if (!(v > 0.0)) throw ConfigError(s.key_path(key), "must be positive");
  return v;
}

int at_least(Section& s, const std::string& key, int fallback, int lo) {
  const int v = s.get<int>(key, fallback);
  if (v < lo) throw ConfigError(s.key_path(key), "must be at least " + std::to_string(lo));
  return v;
}

ClassSet class_set(Section& s, const std::string& key, int num_classes) {
  const auto ids = s.get<std::vector<int>>(key);
  ClassSet out;
  for (int c : ids) {
    if (c < 0 || c >= num_classes) throw ConfigError(s.key_path(key), "class " + std::to_string(c) + " out of range");
    if (!out.insert(c).second) throw ConfigError(s.key_path(key), "repeats class " + std::to_string(c));
  }
  return out;
}

DomainParams parse_domain(Section s, const std::string& default_name) {
  DomainParams d;
  d.name = s.get<std::string>("name", default_name);
  const auto bg = s.get<std::vector<double>>("background", {d.background[0], d.background[1], d.background[2]});
  if (bg.size() != 3) throw ConfigError(s.key_path("background"), "needs three values");
  for (int i = 0; i < 3; ++i) d.background[i] = bg[i];
  d.texture_amplitude = s.get<double>("texture_amplitude", d.texture_amplitude);
  d.texture_frequency = s.get<double>("texture_frequency", d.texture_frequency);
  d.noise_std = s.get<double>("noise_std", d.noise_std);
  d.color_jitter = s.get<double>("color_jitter", d.color_jitter);
  d.palette_rotation = s.get<int>("palette_rotation", d.palette_rotation);
  d.brightness = s.get<double>("brightness", d.brightness);
  s.finish();
  return d;
}

DatasetSource parse_source(Section s, int num_classes, std::uint64_t seed, const std::string& name,
                           const std::filesystem::path& base_dir) {
  DatasetSource src;
  const bool synthetic = s.has("shapeworld");
  const bool directory = s.has("directory");
  if (synthetic == directory) {
    throw ConfigError(s.key_path("shapeworld"), "exactly one of 'shapeworld' or 'directory' is required");
  }
  if (directory) {
    std::filesystem::path p = s.get<std::string>("directory");
    src.directory = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
  } else {
    Section w = s.child("shapeworld");
    ShapeWorldConfig c;
    c.num_classes = num_classes;
    c.height = at_least(w, "height", c.height, 1);
    c.width = at_least(w, "width", c.width, 1);
    c.num_images = at_least(w, "num_images", c.num_images, 1);
    c.min_shapes = at_least(w, "min_shapes", c.min_shapes, 0);
    c.max_shapes = at_least(w, "max_shapes", c.max_shapes, 0);
    c.min_size = at_least(w, "min_size", c.min_size, 1);
    c.max_size = at_least(w, "max_size", c.max_size, 1);
    c.class_weights = w.get<std::vector<double>>("class_weights", {});
    c.seed = w.get<std::uint64_t>("seed", derive_seed(seed, "data/" + name));
    c.id_prefix = w.get<std::string>("id_prefix", name);
    c.domain = w.has("domain") ? parse_domain(w.child("domain"), name) : DomainParams{};
    if (!w.has("domain")) c.domain.name = name;
    w.finish();
    try {
      validate_shapeworld_config(c);
    } catch (const Error& e) {
      throw ConfigError(s.key_path("shapeworld"), e.what());
    }
    src.shapeworld = c;
  }
  s.finish();
  return src;
}

void apply_training(Section s, MethodConfig& c) {
  c.loss.lambda = s.get<double>("lambda", c.loss.lambda);
  if (!(c.loss.lambda >= 0.0)) throw ConfigError(s.key_path("lambda"), "must be nonnegative");
  c.optimizer.lr = positive(s, "lr", c.optimizer.lr);
  c.optimizer.beta1 = s.get<double>("beta1", c.optimizer.beta1);
  c.optimizer.beta2 = s.get<double>("beta2", c.optimizer.beta2);
  c.optimizer.eps = positive(s, "eps", c.optimizer.eps);
  c.optimizer.weight_decay = s.get<double>("weight_decay", c.optimizer.weight_decay);
  c.schedule.power = s.get<double>("power", c.schedule.power);
  c.schedule.max_epochs = at_least(s, "max_epochs", c.schedule.max_epochs, 1);
  c.patience = at_least(s, "patience", c.patience, 1);
  c.post_first_task.lowered_lr = positive(s, "lowered_lr", c.post_first_task.lowered_lr);
  c.post_first_task.freeze_norm = s.get<bool>("freeze_norm", c.post_first_task.freeze_norm);
  c.batch_size = at_least(s, "batch_size", c.batch_size, 1);
  c.buffer_capacity = at_least(s, "buffer_capacity", c.buffer_capacity, 1);
  c.importance_samples = at_least(s, "importance_samples", c.importance_samples, 0);
  const std::string mode = s.get<std::string>(
      "importance_accumulate", c.importance_accumulate == AccumulateMode::kMean ? "mean" : "sum");
  if (mode != "mean" && mode != "sum") throw ConfigError(s.key_path("importance_accumulate"), "must be 'mean' or 'sum'");
  c.importance_accumulate = mode == "mean" ? AccumulateMode::kMean : AccumulateMode::kSum;
  c.cil_class_weighting = s.get<bool>("cil_class_weighting", c.cil_class_weighting);
  c.eval_batch_size = at_least(s, "eval_batch_size", c.eval_batch_size, 1);
  if (s.has("augment")) {
    Section a = s.child("augment");
    c.augment.crop_ratio = a.get<double>("crop_ratio", c.augment.crop_ratio);
    c.augment.scale_min = positive(a, "scale_min", c.augment.scale_min);
    c.augment.scale_max = positive(a, "scale_max", c.augment.scale_max);
    c.augment.crop_height = at_least(a, "crop_height", c.augment.crop_height, 0);
    c.augment.crop_width = at_least(a, "crop_width", c.augment.crop_width, 0);
    if (c.augment.scale_max < c.augment.scale_min) throw ConfigError(a.key_path("scale_max"), "must not be below scale_min");
    if (c.augment.crop_ratio < 0.0) throw ConfigError(a.key_path("crop_ratio"), "must be nonnegative");
    a.finish();
  }
  s.finish();
}

std::filesystem::path default_output(const std::string& name) {
  const char* root = std::getenv("CSEG_OUTPUT_ROOT");
  return std::filesystem::path(root && *root ? root : "runs") / name;
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& text, const ConfigOverrides& overrides,
                                         const std::string& default_name,
                                         const std::filesystem::path& base_dir) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::exception& e) {
    throw ConfigError("<root>", std::string("not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("<root>", "must be an object");
  if (overrides.seed) doc["seed"] = *overrides.seed;
  if (overrides.method) doc["method"] = *overrides.method;
  if (overrides.output_dir) doc["output_dir"] = overrides.output_dir->string();

  Section root(doc, "");
  if (root.get<std::string>("schema") != kExperimentSchema) {
    throw ConfigError("schema", std::string("must be \"") + kExperimentSchema + "\"");
  }
  ExperimentConfig config;
  config.seed = root.get<std::uint64_t>("seed", 0);
  config.output_dir = root.has("output_dir") ? std::filesystem::path(root.get<std::string>("output_dir"))
                                             : default_output(default_name);
  try {
    config.method = parse_method(root.get<std::string>("method", "FT"));
  } catch (const InvalidArgument& e) {
    throw ConfigError("method", e.what());
  }

  Section seq = root.child("sequence");
  try {
    config.protocol = parse_protocol(seq.get<std::string>("protocol"));
  } catch (const InvalidArgument& e) {
    throw ConfigError("sequence.protocol", e.what());
  }
  config.num_classes = at_least(seq, "num_classes", 0, 1);
  config.ignore_id = seq.get<int>("ignore_id", kDefaultIgnoreId);
  if (config.ignore_id >= 0 && config.ignore_id < config.num_classes) {
    throw ConfigError("sequence.ignore_id", "collides with a class id");
  }
  config.split.holdout_fraction = seq.get<double>("holdout_fraction", config.split.holdout_fraction);
  if (!(config.split.holdout_fraction >= 0.0 && config.split.holdout_fraction < 1.0)) {
    throw ConfigError("sequence.holdout_fraction", "must lie in [0, 1)");
  }
  if (config.protocol == Protocol::kClassIncremental) {
    config.train = parse_source(seq.child("train"), config.num_classes, config.seed, "train", base_dir);
    config.eval = parse_source(seq.child("eval"), config.num_classes, config.seed, "eval", base_dir);
    Section part = seq.child("partition");
    const Json& subsets = part.raw("subsets");
    if (!subsets.is_array()) throw ConfigError("sequence.partition.subsets", "must be an array");
    for (std::size_t i = 0; i < subsets.size(); ++i) {
      Json wrapper = {{"s", subsets[i]}};
      Section one(wrapper, "sequence.partition.subsets[" + std::to_string(i) + "]");
      config.partition.subsets.push_back(class_set(one, "s", config.num_classes));
    }
    config.partition.exclusive_classes =
        part.has("exclusive") ? class_set(part, "exclusive", config.num_classes) : ClassSet{};
    part.finish();
    try {
      validate_partition(config.partition, config.num_classes);
    } catch (const Error& e) {
      throw ConfigError("sequence.partition", e.what());
    }
  } else {
    const Json& domains = seq.raw("domains");
    if (!domains.is_array() || domains.empty()) throw ConfigError("sequence.domains", "must be a nonempty array");
    std::set<std::string> names;
    for (std::size_t i = 0; i < domains.size(); ++i) {
      Section d(domains[i], "sequence.domains[" + std::to_string(i) + "]");
      DomainSource src;
      src.name = d.get<std::string>("name");
      if (!names.insert(src.name).second) throw ConfigError(d.key_path("name"), "repeats domain '" + src.name + "'");
      src.train = parse_source(d.child("train"), config.num_classes, config.seed, src.name + "/train", base_dir);
      src.eval = parse_source(d.child("eval"), config.num_classes, config.seed, src.name + "/eval", base_dir);
      for (DatasetSource* s : {&src.train, &src.eval}) {
        if (s->shapeworld) {
          s->shapeworld->domain.name = src.name;
          std::string prefix = s->shapeworld->id_prefix;
          for (char& ch : prefix) if (ch == '/') ch = '_';
          s->shapeworld->id_prefix = prefix;
        }
      }
      d.finish();
      config.domains.push_back(std::move(src));
    }
    if (seq.has("classes")) {
      config.shared_classes = class_set(seq, "classes", config.num_classes);
    } else {
      for (int c = 0; c < config.num_classes; ++c) config.shared_classes.insert(c);
    }
  }
  seq.finish();

  if (root.has("model")) {
    Section m = root.child("model");
    config.capacity.widths = m.get<std::vector<int>>("widths", config.capacity.widths);
    config.capacity.dilations = m.get<std::vector<int>>("dilations", config.capacity.dilations);
    if (config.capacity.widths.empty()) throw ConfigError("model.widths", "needs at least one stage");
    for (int w : config.capacity.widths)
      if (w < 1) throw ConfigError("model.widths", "must be positive");
    for (int d : config.capacity.dilations)
      if (d < 1) throw ConfigError("model.dilations", "must be positive");
    m.finish();
  }

  MethodConfig base;
  base.seed = config.seed;
  bool shared_lambda = false;
  if (root.has("training")) {
    shared_lambda = root.raw("training").is_object() && root.raw("training").contains("lambda");
    apply_training(root.child("training"), base);
  }
  std::map<Method, const Json*> per_method;
  if (root.has("methods")) {
    const Json& methods = root.raw("methods");
    if (!methods.is_object()) throw ConfigError("methods", "must be an object");
    for (auto it = methods.begin(); it != methods.end(); ++it) {
      try {
        per_method[parse_method(it.key())] = &it.value();
      } catch (const InvalidArgument&) {
        throw ConfigError("methods." + it.key(), "unknown method");
      }
    }
  }
  for (Method m : all_methods()) {
    MethodConfig c = base;
    c.method = m;
    if (!shared_lambda) c.loss.lambda = default_lambda(m);
    const std::string path = "methods." + method_name(m);
    if (per_method.count(m)) apply_training(Section(*per_method[m], path), c);
    try {
      validate_method_config(c);
    } catch (const Error& e) {
      throw ConfigError(per_method.count(m) ? path : "training", e.what());
    }
    config.method_configs[m] = c;
  }
  root.finish();

  Json canonical = doc;
  canonical.erase("output_dir");
  config.resolved_json = canonical.dump(2) + "\n";
  config.fingerprint = hex64(fnv1a(canonical.dump()));
  return config;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path,
                                        const ConfigOverrides& overrides) {
  return parse_experiment_config(read_text_file(path), overrides, path.stem().string(),
                                 path.parent_path());
}

namespace {

Dataset load_source(const DatasetSource& src, const ExperimentConfig& config, const std::string& name) {
  if (src.shapeworld) {
    Dataset d = generate_shapeworld(*src.shapeworld);
    d.name = name;
    d.ignore_id = config.ignore_id;
    for (auto& s : d.samples) s.ignore_id = config.ignore_id;
    return d;
  }
  return read_dataset_split(src.directory, config.num_classes, name, config.ignore_id);
}

}  // namespace

ExperimentData build_experiment_data(const ExperimentConfig& config) {
  ExperimentData data;
  const std::uint64_t split_seed = derive_seed(config.seed, "split");
  if (config.protocol == Protocol::kClassIncremental) {
    data.train_sets.push_back(load_source(config.train, config, "train"));
    data.eval_sets.push_back(load_source(config.eval, config, "eval"));
    data.sequence = build_class_incremental_split(data.train_sets[0], config.partition, split_seed, config.split);
    attach_eval_set(data.sequence, data.eval_sets[0]);
  } else {
    for (const auto& d : config.domains) {
      data.train_sets.push_back(load_source(d.train, config, d.name));
      data.eval_sets.push_back(load_source(d.eval, config, d.name));
    }
    data.sequence = build_domain_incremental_sequence(data.train_sets, config.shared_classes, split_seed,
                                                      config.split);
    attach_eval_sets(data.sequence, data.eval_sets);
  }
  return data;
}

void write_experiment_data(const ExperimentData& data, const ExperimentConfig& config,
                           const std::filesystem::path& dir) {
  if (config.protocol == Protocol::kClassIncremental) {
    write_dataset_split(data.train_sets[0], dir / "train");
    write_dataset_split(data.eval_sets[0], dir / "eval");
  } else {
    for (std::size_t i = 0; i < data.train_sets.size(); ++i) {
      write_dataset_split(data.train_sets[i], dir / config.domains[i].name / "train");
      write_dataset_split(data.eval_sets[i], dir / config.domains[i].name / "eval");
    }
  }
  std::ostringstream manifest;
  write_manifest(manifest, split_manifest(data.sequence));
  write_text_file(dir / "manifest.txt", manifest.str());
}

namespace {

void write_increment(const std::filesystem::path& dir, int k, const SequenceRun& run) {
  const std::filesystem::path task_dir = dir / ("task_" + std::to_string(k));
  write_text_file(task_dir / "checkpoint.json", checkpoint_to_json(run.model));
  write_text_file(task_dir / "trainlog.json", train_log_to_json(run.logs.back()));
  if (run.state.importance) write_text_file(task_dir / "importance.json", importance_to_json(*run.state.importance));
  if (run.state.buffer) write_text_file(task_dir / "buffer.json", buffer_to_json(*run.state.buffer));
}

}  // namespace

SequenceRun run_experiment(const ExperimentConfig& config, const ExperimentData& data,
                           const std::filesystem::path& run_dir) {
  const MethodConfig& mc = config.method_config();
  SequenceRun run = [&] {
    if (config.method == Method::kJoint) {
      const Dataset* full = config.protocol == Protocol::kClassIncremental ? &data.train_sets[0] : nullptr;
      SequenceRun r = run_joint(data.sequence, make_joint_task(data.sequence, full), mc, config.capacity);
      if (!run_dir.empty()) write_increment(run_dir, 0, r);
      return r;
    }
    IncrementObserver observer;
    if (!run_dir.empty()) observer = [&](int k, const SequenceRun& r) { write_increment(run_dir, k, r); };
    return run_sequence(data.sequence, mc, config.capacity, observer);
  }();
  run.results.config_fingerprint = config.fingerprint;
  if (!run_dir.empty()) {
    const Report report = build_report(run.results);
    write_text_file(run_dir / "config.json", config.resolved_json);
    std::ostringstream manifest;
    write_manifest(manifest, split_manifest(data.sequence));
    write_text_file(run_dir / "manifest.txt", manifest.str());
    write_text_file(run_dir / "results.json", results_to_json(run.results));
    write_text_file(run_dir / "report.txt", report.text);
    write_text_file(run_dir / "report.csv", report.csv);
    write_text_file(run_dir / "forgetting.svg", forgetting_svg(run.results));
  }
  return run;
}

}  // namespace cseg
