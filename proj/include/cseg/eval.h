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
#ifndef CSEG_EVAL_H_
#define CSEG_EVAL_H_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cseg/common.h"
#include "cseg/model/seg_model.h"
#include "cseg/taskbench/sample.h"

namespace cseg {

// Rows are ground truth, columns predictions; ignore pixels are skipped.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int num_classes = 0);

  int num_classes() const { return num_classes_; }
  std::uint64_t at(int truth, int predicted) const {
    return counts_[static_cast<std::size_t>(truth) * num_classes_ + predicted];
  }
  std::uint64_t total() const;

  void add(const LabelMap& predicted, const LabelMap& truth, int ignore_id);
  // Elementwise sum; shards merge in any order to the same result.
  void merge(const ConfusionMatrix& other);
  // Drops the rows of ground-truth classes outside `classes`; equivalent to
  // having marked those pixels as ignore.
  ConfusionMatrix restricted_to_truth(const ClassSet& classes) const;

  bool operator==(const ConfusionMatrix&) const = default;

 private:
  int num_classes_;
  std::vector<std::uint64_t> counts_;
};

ConfusionMatrix accumulate_confusion(const LabelMap& predicted, const LabelMap& truth,
                                     int num_classes, int ignore_id);

struct MiouResult {
  double miou = 0.0;
  std::map<ClassId, double> per_class;
  // Subset classes absent from both prediction and ground truth; not averaged.
  std::vector<ClassId> excluded;
};

// Mean of TP / (TP + FP + FN) over the subset. Throws UndefinedMetric when
// every subset class has a zero denominator.
MiouResult miou(const ConfusionMatrix& confusion, const ClassSet& class_subset);

// mIoU of a task's classes on fully labeled images: pixels whose ground
// truth lies outside the subset are ignored, predictions are not restricted.
MiouResult subset_miou(const ConfusionMatrix& confusion, const ClassSet& class_subset);

// Runs inference at the samples' own resolution and accumulates.
ConfusionMatrix evaluate_confusion(const SegModel& model, const std::vector<LabeledSample>& samples,
                                   int num_classes, int batch_size = 8);

struct ResultsMatrix {
  static constexpr const char* kSchema = "cseg.results/1";

  std::string method;
  std::string protocol;
  std::string config_fingerprint;
  std::vector<std::string> task_tags;
  std::vector<ClassSet> task_classes;
  // Increment in which each task was trained (its diagonal row).
  std::vector<int> learned_at;
  // [increment][task]; empty optional = undefined metric.
  std::vector<std::vector<std::optional<double>>> miou;
  std::vector<std::vector<std::map<ClassId, double>>> per_class_iou;
  std::optional<double> final_all_class_miou;
  std::map<ClassId, double> final_per_class_iou;
  std::vector<ClassId> final_excluded_classes;

  bool operator==(const ResultsMatrix&) const = default;
};

// Stable, versioned JSON text.
std::string results_to_json(const ResultsMatrix& results);
ResultsMatrix results_from_json(const std::string& text);

struct Report {
  std::string text;
  std::string csv;
  std::vector<double> forgetting;
  std::optional<double> average_miou;
};

// Per-increment table, per-task forgetting (mIoU right after learning a task
// minus the final value), final-row average and final all-class mIoU.
Report build_report(const ResultsMatrix& results);

// Side-by-side comparison of several runs of one protocol; marks the best
// ('*') and second best ('^') value per column.
std::string comparison_table(const std::vector<ResultsMatrix>& runs);

// Small SVG line chart of per-task mIoU after each increment.
std::string forgetting_svg(const ResultsMatrix& results);

}  // namespace cseg

#endif  // CSEG_EVAL_H_
