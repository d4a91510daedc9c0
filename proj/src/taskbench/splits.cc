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
#include "cseg/taskbench/splits.h"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <unordered_set>

namespace cseg {

std::string protocol_name(Protocol protocol) {
  return protocol == Protocol::kClassIncremental ? "class-incremental"
                                                 : "domain-incremental";
}

Protocol parse_protocol(const std::string& name) {
  if (name == "class-incremental") return Protocol::kClassIncremental;
  if (name == "domain-incremental") return Protocol::kDomainIncremental;
  throw InvalidArgument("unknown protocol '" + name + "'");
}

ClassSet TaskSequence::all_classes() const {
  ClassSet out;
  for (const auto& task : tasks) out.insert(task.labeled_classes.begin(), task.labeled_classes.end());
  return out;
}

void validate_partition(const ClassPartition& partition, int num_classes) {
  if (partition.subsets.empty()) throw InvalidArgument("partition has no subsets");
  std::map<ClassId, int> owner;
  for (std::size_t s = 0; s < partition.subsets.size(); ++s) {
    if (partition.subsets[s].empty()) {
      throw InvalidArgument("partition subset " + std::to_string(s) + " is empty");
    }
    for (ClassId c : partition.subsets[s]) {
      if (c < 0 || c >= num_classes) {
        throw InvalidArgument("partition class " + std::to_string(c) + " outside [0, " +
                              std::to_string(num_classes) + ")");
      }
      if (!owner.emplace(c, static_cast<int>(s)).second) {
        throw InvalidArgument("partition class " + std::to_string(c) +
                              " appears in more than one subset");
      }
    }
  }
  if (static_cast<int>(owner.size()) != num_classes) {
    throw InvalidArgument("partition does not cover all " + std::to_string(num_classes) +
                          " classes");
  }
  int home = -1;
  for (ClassId c : partition.exclusive_classes) {
    auto it = owner.find(c);
    if (it == owner.end()) {
      throw InvalidArgument("exclusive class " + std::to_string(c) + " is in no subset");
    }
    if (home >= 0 && it->second != home) {
      throw InvalidArgument("exclusive classes span more than one subset");
    }
    home = it->second;
  }
}

int exclusive_home(const ClassPartition& partition) {
  if (partition.exclusive_classes.empty()) return -1;
  const ClassId probe = *partition.exclusive_classes.begin();
  for (std::size_t s = 0; s < partition.subsets.size(); ++s) {
    if (partition.subsets[s].contains(probe)) return static_cast<int>(s);
  }
  return -1;
}

const std::vector<std::string>& cityscapes_class_names() {
  static const std::vector<std::string> names = {
      "road",   "sidewalk",      "building",     "wall",       "fence",
      "pole",   "traffic light", "traffic sign", "vegetation", "terrain",
      "sky",    "person",        "rider",        "car",        "truck",
      "bus",    "train",         "motorcycle",   "bicycle"};
  return names;
}

ClassPartition cityscapes_default_partition() {
  ClassPartition p;
  p.subsets = {{0, 1, 2, 3, 4, 8, 9, 10},  // flat, construction, nature, sky
               {12, 13, 14, 15, 17},       // rider, car, truck, bus, motorcycle
               {5, 6, 7, 11, 16, 18}};     // objects, person, train, bicycle
  p.exclusive_classes = {14, 15, 17};
  return p;
}

int holdout_count(int count, double fraction) {
  if (count < 2 || fraction <= 0.0) return 0;
  const int rounded = static_cast<int>(std::floor(fraction * count + 0.5));
  return std::clamp(rounded, 1, count - 1);
}

namespace {

// Splits one task's images into train and holdout by seeded draw; train keeps
// the incoming order.
void carve_holdout(TaskSpec& task, std::vector<LabeledSample> images, Rng& rng,
                   double fraction) {
  const int h = holdout_count(static_cast<int>(images.size()), fraction);
  std::vector<std::size_t> order(images.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);
  std::vector<bool> is_holdout(images.size(), false);
  for (int i = 0; i < h; ++i) is_holdout[order[i]] = true;
  for (std::size_t i = 0; i < images.size(); ++i) {
    (is_holdout[i] ? task.holdout : task.samples).push_back(std::move(images[i]));
  }
}

}  // namespace

TaskSequence build_class_incremental_split(const Dataset& dataset,
                                           const ClassPartition& partition,
                                           std::uint64_t rng_seed,
                                           const SplitOptions& options) {
  validate_dataset(dataset);
  validate_partition(partition, dataset.num_classes);
  const int num_tasks = static_cast<int>(partition.subsets.size());
  const int home = exclusive_home(partition);

  std::vector<int> assignment(dataset.samples.size(), -1);
  std::map<ClassId, int> exclusive_images;
  std::vector<std::size_t> pool;
  std::vector<int> sizes(num_tasks, 0);
  for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
    const ClassSet present = present_classes(dataset.samples[i].label, dataset.ignore_id);
    bool exclusive = false;
    for (ClassId c : partition.exclusive_classes) {
      if (present.contains(c)) {
        ++exclusive_images[c];
        exclusive = true;
      }
    }
    if (exclusive) {
      assignment[i] = home;
      ++sizes[home];
    } else {
      pool.push_back(i);
    }
  }

  int needed = 0;
  for (int t = 0; t < num_tasks; ++t) needed += (sizes[t] == 0) ? 1 : 0;
  if (static_cast<int>(pool.size()) < needed) {
    std::vector<ClassId> offending;
    for (const auto& [c, n] : exclusive_images) offending.push_back(c);
    std::ostringstream msg;
    msg << "exclusive classes appear in too many images: only " << pool.size()
        << " of " << dataset.samples.size() << " images are free of classes";
    for (ClassId c : offending) msg << ' ' << c << " (" << exclusive_images[c] << " images)";
    msg << ", " << needed << " needed for the other tasks";
    throw InfeasibleSplit(msg.str(), offending);
  }

  Rng rng(rng_seed);
  rng.shuffle(pool);
  for (std::size_t i : pool) {
    const int smallest = static_cast<int>(
        std::min_element(sizes.begin(), sizes.end()) - sizes.begin());
    assignment[i] = smallest;
    ++sizes[smallest];
  }

  TaskSequence sequence;
  sequence.protocol = Protocol::kClassIncremental;
  sequence.num_classes = dataset.num_classes;
  sequence.ignore_id = dataset.ignore_id;
  for (int t = 0; t < num_tasks; ++t) {
    TaskSpec task;
    task.task_id = t;
    task.labeled_classes = partition.subsets[t];
    task.domain_tag = dataset.name;
    std::vector<LabeledSample> images;
    for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
      if (assignment[i] != t) continue;
      LabeledSample s = dataset.samples[i];
      s.label = mask_labels(s.label, task.labeled_classes, dataset.ignore_id);
      s.task_id = t;
      images.push_back(std::move(s));
    }
    carve_holdout(task, std::move(images), rng, options.holdout_fraction);
    sequence.tasks.push_back(std::move(task));
  }
  return sequence;
}

TaskSequence build_domain_incremental_sequence(const std::vector<Dataset>& datasets,
                                               const ClassSet& shared_classes,
                                               std::uint64_t rng_seed,
                                               const SplitOptions& options) {
  if (datasets.empty()) throw InvalidArgument("domain-incremental sequence needs a dataset");
  TaskSequence sequence;
  sequence.protocol = Protocol::kDomainIncremental;
  sequence.ignore_id = datasets.front().ignore_id;
  std::unordered_set<std::string> tags;
  Rng rng(rng_seed);
  for (std::size_t d = 0; d < datasets.size(); ++d) {
    const Dataset& dataset = datasets[d];
    validate_dataset(dataset);
    if (dataset.ignore_id != sequence.ignore_id) {
      throw InvalidArgument("datasets use different ignore ids");
    }
    if (!tags.insert(dataset.name).second) {
      throw InvalidArgument("duplicate domain tag '" + dataset.name + "'");
    }
    sequence.num_classes = std::max(sequence.num_classes, dataset.num_classes);
    for (const auto& s : dataset.samples) {
      for (ClassId c : present_classes(s.label, dataset.ignore_id)) {
        if (!shared_classes.contains(c)) {
          throw InvalidArgument("dataset '" + dataset.name + "' sample '" + s.source_id +
                                "' has class " + std::to_string(c) +
                                " outside the shared class set");
        }
      }
    }
    TaskSpec task;
    task.task_id = static_cast<int>(d);
    task.labeled_classes = shared_classes;
    task.domain_tag = dataset.name;
    std::vector<LabeledSample> images = dataset.samples;
    for (auto& s : images) s.task_id = task.task_id;
    carve_holdout(task, std::move(images), rng, options.holdout_fraction);
    sequence.tasks.push_back(std::move(task));
  }
  return sequence;
}

void attach_eval_set(TaskSequence& sequence, const Dataset& eval) {
  validate_dataset(eval);
  for (auto& task : sequence.tasks) task.eval = eval.samples;
}

void attach_eval_sets(TaskSequence& sequence, const std::vector<Dataset>& evals) {
  if (evals.size() != sequence.tasks.size()) {
    throw InvalidArgument("need one evaluation dataset per task");
  }
  for (std::size_t t = 0; t < evals.size(); ++t) {
    validate_dataset(evals[t]);
    sequence.tasks[t].eval = evals[t].samples;
  }
}

std::vector<ManifestEntry> split_manifest(const TaskSequence& sequence) {
  std::vector<ManifestEntry> entries;
  for (const auto& task : sequence.tasks) {
    for (const auto& s : task.samples) entries.push_back({s.source_id, task.task_id, "train"});
    for (const auto& s : task.holdout) entries.push_back({s.source_id, task.task_id, "holdout"});
  }
  return entries;
}

void write_manifest(std::ostream& out, const std::vector<ManifestEntry>& entries) {
  out << "# source_id task_id role\n";
  for (const auto& e : entries) out << e.source_id << ' ' << e.task_id << ' ' << e.role << '\n';
}

std::vector<ManifestEntry> read_manifest(std::istream& in) {
  std::vector<ManifestEntry> entries;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    ManifestEntry e;
    if (!(fields >> e.source_id >> e.task_id)) {
      throw IoError("manifest line " + std::to_string(line_no) + " is malformed");
    }
    if (!(fields >> e.role)) e.role = "train";
    entries.push_back(std::move(e));
  }
  return entries;
}

void validate_task(const TaskSpec& task) {
  std::unordered_set<std::string> train_ids;
  for (const auto& s : task.samples) {
    train_ids.insert(s.source_id);
    for (ClassId c : present_classes(s.label, s.ignore_id)) {
      if (!task.labeled_classes.contains(c)) {
        throw InvalidArgument("task " + std::to_string(task.task_id) + " sample '" +
                              s.source_id + "' carries unlabeled class " + std::to_string(c));
      }
    }
  }
  for (const auto& s : task.holdout) {
    if (train_ids.contains(s.source_id)) {
      throw InvalidArgument("task " + std::to_string(task.task_id) + " sample '" +
                            s.source_id + "' is in both train and holdout");
    }
  }
}

}  // namespace cseg
