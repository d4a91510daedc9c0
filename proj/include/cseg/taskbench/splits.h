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
#ifndef CSEG_TASKBENCH_SPLITS_H_
#define CSEG_TASKBENCH_SPLITS_H_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "cseg/common.h"
#include "cseg/taskbench/sample.h"

namespace cseg {

enum class Protocol { kClassIncremental, kDomainIncremental };

std::string protocol_name(Protocol protocol);
Protocol parse_protocol(const std::string& name);

struct ClassPartition {
  std::vector<ClassSet> subsets;
  // Classes whose pixels may only appear in images of their own subset.
  ClassSet exclusive_classes;
};

// Throws InvalidArgument unless subsets are disjoint, cover [0, num_classes)
// and the exclusive classes all live in exactly one subset.
void validate_partition(const ClassPartition& partition, int num_classes);
// Index of the subset owning the exclusive classes, or -1 when there are none.
int exclusive_home(const ClassPartition& partition);

// Cityscapes trainId names (19 classes).
const std::vector<std::string>& cityscapes_class_names();

// A guess at the three-subset Cityscapes partition: only truck, bus and
// motorcycle in S2 are documented, the remaining assignment is ours.
ClassPartition cityscapes_default_partition();

struct TaskSpec {
  int task_id = 0;
  std::vector<LabeledSample> samples;
  ClassSet labeled_classes;
  std::string domain_tag;
  std::vector<LabeledSample> holdout;
  // Fully labeled evaluation images for this task; mIoU on them is restricted
  // to labeled_classes.
  std::vector<LabeledSample> eval;
};

struct TaskSequence {
  Protocol protocol = Protocol::kClassIncremental;
  int num_classes = 0;
  int ignore_id = kDefaultIgnoreId;
  std::vector<TaskSpec> tasks;

  ClassSet all_classes() const;
};

struct SplitOptions {
  double holdout_fraction = 0.1;
};

// Number of holdout images carved from a task of `count` images.
int holdout_count(int count, double fraction);

TaskSequence build_class_incremental_split(const Dataset& dataset,
                                           const ClassPartition& partition,
                                           std::uint64_t rng_seed,
                                           const SplitOptions& options = {});

TaskSequence build_domain_incremental_sequence(const std::vector<Dataset>& datasets,
                                               const ClassSet& shared_classes,
                                               std::uint64_t rng_seed,
                                               const SplitOptions& options = {});

// Attaches evaluation images. Class-incremental sequences share one fully
// labeled set; domain-incremental sequences take one dataset per task.
void attach_eval_set(TaskSequence& sequence, const Dataset& eval);
void attach_eval_sets(TaskSequence& sequence, const std::vector<Dataset>& evals);

// Line-oriented "source_id task_id role" manifest, role in {train, holdout}.
struct ManifestEntry {
  std::string source_id;
  int task_id = 0;
  std::string role;
  bool operator==(const ManifestEntry&) const = default;
};
std::vector<ManifestEntry> split_manifest(const TaskSequence& sequence);
void write_manifest(std::ostream& out, const std::vector<ManifestEntry>& entries);
std::vector<ManifestEntry> read_manifest(std::istream& in);

// Checks the TaskSpec invariants: labels inside labeled_classes and disjoint
// train/holdout source ids.
void validate_task(const TaskSpec& task);

}  // namespace cseg

#endif  // CSEG_TASKBENCH_SPLITS_H_
