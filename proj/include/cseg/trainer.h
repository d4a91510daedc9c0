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
#ifndef CSEG_TRAINER_H_
#define CSEG_TRAINER_H_

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cseg/eval.h"
#include "cseg/importance.h"
#include "cseg/losses.h"
#include "cseg/model/seg_model.h"
#include "cseg/replay.h"
#include "cseg/taskbench/augment.h"
#include "cseg/taskbench/splits.h"

namespace cseg {

enum class Method { kFT, kFE, kL2, kEWC, kMAS, kLwF, kCIL, kReplay, kCILReplay, kJoint };

std::string method_name(Method method);
// Accepts the display names ("CIL+R", "Non-Incremental", ...) case-insensitively.
Method parse_method(const std::string& name);
// The nine continual methods followed by Non-Incremental.
const std::vector<Method>& all_methods();

bool uses_teacher(Method method);
bool uses_importance(Method method);
bool uses_replay(Method method);
// FT and the prior-regularization methods switch to the lowered learning
// rate and frozen norm layers once the first task is done.
bool lowers_lr_after_first_task(Method method);

struct OptimizerConfig {
  double lr = 4e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 3e-4;
};

struct ScheduleConfig {
  double power = 0.9;
  int max_epochs = 250;
};

struct PostFirstTaskConfig {
  double lowered_lr = 1e-5;
  bool freeze_norm = true;
};

struct MethodConfig {
  Method method = Method::kFT;
  LossConfig loss;
  OptimizerConfig optimizer;
  ScheduleConfig schedule;
  int patience = 20;
  PostFirstTaskConfig post_first_task;
  int batch_size = 6;
  AugmentPolicy augment;
  int buffer_capacity = 32;
  // 0 picks min(200, task size).
  int importance_samples = 0;
  AccumulateMode importance_accumulate = AccumulateMode::kMean;
  // CIL / CIL+R: inverse log-frequency pixel weights (off = weight 1).
  bool cil_class_weighting = true;
  int eval_batch_size = 8;
  std::uint64_t seed = 0;
};

// Distillation weight 1 for LwF/CIL/CIL+R, penalty weight 100 for L2/EWC/MAS.
double default_lambda(Method method);
MethodConfig default_method_config(Method method);

void validate_method_config(const MethodConfig& config);

double poly_lr(long step, long total_steps, double base_lr, double power);

// Adam with L2-style weight decay (added to the gradient). Entries whose
// mask is 0 are left untouched, moments included.
class Adam {
 public:
  Adam() = default;
  explicit Adam(const OptimizerConfig& config) : config_(config) {}

  void step(std::span<double> params, std::span<const double> grad,
            std::span<const std::uint8_t> trainable, double lr);
  long steps() const { return t_; }

 private:
  OptimizerConfig config_;
  std::vector<double> m_;
  std::vector<double> v_;
  long t_ = 0;
};

// Everything a method carries from one task to the next.
struct ContinualState {
  int tasks_seen = 0;
  std::optional<TeacherSnapshot> teacher;
  std::optional<ImportanceMap> importance;
  std::vector<double> old_params;
  std::optional<ReplayBuffer> buffer;
};

struct EpochLog {
  int epoch = 0;
  double loss = 0.0;
  double ce = 0.0;
  double kd = 0.0;
  double reg = 0.0;
  std::optional<double> holdout_miou;
};

struct TrainLog {
  int task_id = 0;
  double base_lr = 0.0;
  double power = 0.0;
  long total_steps = 0;
  std::vector<double> lr_trace;
  std::vector<EpochLog> epochs;
  int stop_epoch = 0;
  int best_epoch = 0;
  double best_holdout_miou = 0.0;
  double wall_seconds = 0.0;
};

struct StepEvent {
  long step = 0;
  int epoch = 0;
  double lr = 0.0;
  const SegModel* model = nullptr;  // after the update
  const std::vector<double>* gradient = nullptr;
};
using StepObserver = std::function<void(const StepEvent&)>;

struct TaskOutcome {
  SegModel model;
  ContinualState state;
  TrainLog log;
};

// Trains one increment. The returned model is the best-holdout checkpoint;
// the state is refreshed for the next task (teacher, accumulated importance,
// replay buffer). Throws TrainingDiverged on a non-finite loss.
TaskOutcome train_task(SegModel model, const TaskSpec& task, const ContinualState& state,
                       const MethodConfig& config, int num_classes, int ignore_id,
                       const StepObserver& observer = {});

// Model with the default head layout for a sequence and its seed.
SegModel initial_model(const ModelCapacity& capacity, std::uint64_t seed);

struct SequenceRun {
  ResultsMatrix results;
  std::vector<TrainLog> logs;
  SegModel model;
  ContinualState state;
};

// Called after each increment with the increment index and the run so far.
using IncrementObserver = std::function<void(int, const SequenceRun&)>;

SequenceRun run_sequence(const TaskSequence& sequence, const MethodConfig& config,
                         const ModelCapacity& capacity,
                         const IncrementObserver& on_increment = {});

// Union of every task's training and holdout images for the non-incremental
// upper bound. `full_labels` maps images back to labels covering all
// classes; pass nullptr when the task labels already do.
TaskSpec make_joint_task(const TaskSequence& sequence, const Dataset* full_labels);

// Trains the joint task once and evaluates it on every task of the sequence,
// giving a single-row matrix.
SequenceRun run_joint(const TaskSequence& sequence, const TaskSpec& joint,
                      const MethodConfig& config, const ModelCapacity& capacity);

}  // namespace cseg

#endif  // CSEG_TRAINER_H_
