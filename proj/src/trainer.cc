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
#include "cseg/trainer.h"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <map>

namespace cseg {

namespace {

struct MethodInfo {
  Method method;
  const char* name;
};

constexpr MethodInfo kMethods[] = {
    {Method::kFT, "FT"},         {Method::kFE, "FE"},       {Method::kL2, "L2"},
    {Method::kEWC, "EWC"},       {Method::kMAS, "MAS"},     {Method::kLwF, "LwF"},
    {Method::kCIL, "CIL"},       {Method::kReplay, "Replay"}, {Method::kCILReplay, "CIL+R"},
    {Method::kJoint, "Non-Incremental"},
};

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace

std::string method_name(Method method) {
  for (const auto& m : kMethods)
    if (m.method == method) return m.name;
  throw InvalidArgument("unknown method");
}

Method parse_method(const std::string& name) {
  const std::string key = lower(name);
  for (const auto& m : kMethods)
    if (lower(m.name) == key) return m.method;
  if (key == "joint" || key == "non_incremental") return Method::kJoint;
  throw InvalidArgument("unknown method '" + name + "'");
}

const std::vector<Method>& all_methods() {
  static const std::vector<Method> methods = [] {
    std::vector<Method> out;
    for (const auto& m : kMethods) out.push_back(m.method);
    return out;
  }();
  return methods;
}

bool uses_teacher(Method m) {
  return m == Method::kLwF || m == Method::kCIL || m == Method::kCILReplay;
}
bool uses_importance(Method m) {
  return m == Method::kL2 || m == Method::kEWC || m == Method::kMAS;
}
bool uses_replay(Method m) { return m == Method::kReplay || m == Method::kCILReplay; }
bool lowers_lr_after_first_task(Method m) { return m == Method::kFT || uses_importance(m); }

double default_lambda(Method method) {
  switch (method) {
    case Method::kL2:
    case Method::kEWC:
    case Method::kMAS:
      return 100.0;
    default:
      return 1.0;
  }
}

MethodConfig default_method_config(Method method) {
  MethodConfig c;
  c.method = method;
  c.loss.lambda = default_lambda(method);
  return c;
}

void validate_method_config(const MethodConfig& c) {
  validate_loss_config(c.loss);
  const auto& o = c.optimizer;
  if (!(o.lr > 0.0)) throw InvalidArgument("optimizer.lr must be positive");
  if (!(o.beta1 >= 0.0 && o.beta1 < 1.0) || !(o.beta2 >= 0.0 && o.beta2 < 1.0)) {
    throw InvalidArgument("Adam betas must lie in [0, 1)");
  }
  if (!(o.eps > 0.0)) throw InvalidArgument("optimizer.eps must be positive");
  if (!(o.weight_decay >= 0.0)) throw InvalidArgument("weight decay must be nonnegative");
  if (!(c.schedule.power >= 0.0)) throw InvalidArgument("schedule.power must be nonnegative");
  if (c.schedule.max_epochs < 1) throw InvalidArgument("schedule.max_epochs must be at least 1");
  if (c.patience < 1) throw InvalidArgument("early-stop patience must be at least 1");
  if (!(c.post_first_task.lowered_lr > 0.0)) throw InvalidArgument("lowered_lr must be positive");
  if (c.batch_size < 1) throw InvalidArgument("batch_size must be at least 1");
  if (uses_replay(c.method)) {
    if (c.buffer_capacity < 1) throw InvalidArgument("replay methods need a buffer capacity");
    if (c.batch_size < 2) throw InvalidArgument("replay methods need batch_size >= 2");
  }
  if (c.importance_samples < 0) throw InvalidArgument("importance_samples must be nonnegative");
  if (c.eval_batch_size < 1) throw InvalidArgument("eval_batch_size must be at least 1");
}

double poly_lr(long step, long total_steps, double base_lr, double power) {
  if (total_steps <= 0) throw InvalidArgument("poly_lr needs total_steps > 0");
  if (step < 0 || step > total_steps) throw InvalidArgument("poly_lr step out of range");
  return base_lr * std::pow(1.0 - static_cast<double>(step) / static_cast<double>(total_steps),
                            power);
}

void Adam::step(std::span<double> params, std::span<const double> grad,
                std::span<const std::uint8_t> trainable, double lr) {
  if (grad.size() != params.size() || trainable.size() != params.size()) {
    throw LayoutMismatch("Adam step: parameter, gradient and mask lengths differ");
  }
  // Newly added heads extend the moment vectors with zeros.
  if (m_.size() < params.size()) {
    m_.resize(params.size(), 0.0);
    v_.resize(params.size(), 0.0);
  }
  ++t_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!trainable[i]) continue;
    const double g = grad[i] + config_.weight_decay * params[i];
    m_[i] = b1 * m_[i] + (1.0 - b1) * g;
    v_[i] = b2 * v_[i] + (1.0 - b2) * g * g;
    params[i] -= lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + config_.eps);
  }
}

namespace {

std::optional<double> holdout_miou(const ConfusionMatrix& conf, const ClassSet& classes) {
  try {
    return subset_miou(conf, classes).miou;
  } catch (const UndefinedMetric&) {
    return std::nullopt;
  }
}

struct StepLoss {
  double total = 0.0, ce = 0.0, kd = 0.0, reg = 0.0;
};

}  // namespace

TaskOutcome train_task(SegModel model, const TaskSpec& task, const ContinualState& state,
                       const MethodConfig& config, int num_classes, int ignore_id,
                       const StepObserver& observer) {
  validate_method_config(config);
  if (task.samples.empty()) throw InvalidArgument("task " + std::to_string(task.task_id) + " has no training images");
  const auto wall_start = std::chrono::steady_clock::now();
  const Method method = config.method;
  const bool after_first = state.tasks_seen > 0;

  if (after_first && uses_teacher(method) && !state.teacher) {
    throw InvalidArgument(method_name(method) + " needs a teacher after the first task");
  }
  if (after_first && uses_importance(method)) {
    if (!state.importance || state.old_params.empty()) {
      throw InvalidArgument(method_name(method) + " needs importance and old parameters after the first task");
    }
    if (state.importance->size() != state.old_params.size()) {
      throw LayoutMismatch("importance map and old parameters differ in length");
    }
    if (state.old_params.size() > model.parameter_count()) {
      throw LayoutMismatch("old parameters are longer than the model");
    }
  }
  if (after_first && uses_replay(method) && !state.buffer) {
    throw InvalidArgument(method_name(method) + " needs a replay buffer after the first task");
  }
  if (!after_first && (state.teacher || state.importance || state.buffer)) {
    throw InvalidArgument("continual state present before the first task");
  }

  // Heads for classes the model cannot output yet.
  std::vector<int> old_heads;
  for (const auto& h : model.heads()) old_heads.push_back(h.id);
  ClassSet uncovered;
  for (ClassId c : task.labeled_classes) {
    const auto& out = model.output_classes();
    if (!std::binary_search(out.begin(), out.end(), c)) uncovered.insert(c);
  }
  const bool new_head = !uncovered.empty();
  if (new_head) model.add_decoder_head(uncovered);

  if (method == Method::kFE && after_first) {
    model.freeze_encoder(true);
    model.set_frozen_heads(new_head ? old_heads : std::vector<int>{});
  }
  const bool lowered = after_first && lowers_lr_after_first_task(method);
  if (lowered && config.post_first_task.freeze_norm) model.freeze_norm_layers(true);
  const double base_lr = lowered ? config.post_first_task.lowered_lr : config.optimizer.lr;

  LossConfig loss_config = config.loss;
  const bool distill = after_first && uses_teacher(method);
  if (distill) {
    loss_config.distill_class_set = ClassSet(state.teacher->classes().begin(), state.teacher->classes().end());
  }
  const bool cil = method == Method::kCIL || method == Method::kCILReplay;
  if (cil && config.cil_class_weighting) {
    std::vector<LabeledSample> pool = task.samples;
    if (state.buffer)
      for (const auto& slot : state.buffer->slots()) pool.push_back(slot.sample);
    loss_config.cil_pixel_weights = cil_class_weights(pool, num_classes);
  }
  const bool regularize = after_first && uses_importance(method) && loss_config.lambda != 0.0;

  const ReplayBuffer* buffer =
      uses_replay(method) && state.buffer && !state.buffer->empty() ? &*state.buffer : nullptr;
  const int batch = config.batch_size;
  const int per_step = buffer ? new_samples_per_batch(batch, *buffer) : batch;
  const long n = static_cast<long>(task.samples.size());
  const long steps_per_epoch = (n + per_step - 1) / per_step;
  const long total_steps = steps_per_epoch * config.schedule.max_epochs;

  Rng rng(derive_seed(config.seed, "train/" + std::to_string(task.task_id)));
  Adam adam(config.optimizer);
  TrainLog log;
  log.task_id = task.task_id;
  log.base_lr = base_lr;
  log.power = config.schedule.power;
  log.total_steps = total_steps;
  log.lr_trace.reserve(static_cast<std::size_t>(total_steps));

  std::optional<SegModel> best;
  double best_miou = -1.0;
  long step = 0;
  std::vector<std::size_t> order(task.samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 1; epoch <= config.schedule.max_epochs; ++epoch) {
    rng.shuffle(order);
    StepLoss sum;
    long epoch_steps = 0;
    for (long start = 0; start < n; start += per_step, ++step) {
      const double lr = poly_lr(step, total_steps, base_lr, config.schedule.power);
      log.lr_trace.push_back(lr);

      std::vector<const LabeledSample*> picked;
      for (long i = start; i < std::min(n, start + per_step); ++i) picked.push_back(&task.samples[order[i]]);
      std::vector<LabeledSample> samples;
      if (buffer) {
        samples = compose_batch(picked, *buffer, batch, rng).samples;
      } else {
        for (const auto* s : picked) samples.push_back(*s);
      }
      if (!config.augment.is_identity()) {
        for (auto& s : samples) s = augment(s, config.augment, rng);
      }
      for (const auto& s : samples) {
        if (s.image.height() != samples[0].image.height() || s.image.width() != samples[0].image.width()) {
          throw ShapeMismatch("training batch mixes image sizes; configure a fixed crop");
        }
      }
      const Tensor x = images_to_tensor(samples);
      LabelBatch labels;
      for (const auto& s : samples) labels.push_back(s.label);

      SegModel::Tape tape = model.forward_train(x);
      const Posteriors post = model.posteriors(tape);
      Tensor grad_logits(tape.logits.batch(), tape.logits.channels(), tape.logits.height(),
                         tape.logits.width());
      StepLoss loss;
      if (distill) {
        const Posteriors teacher = state.teacher->forward(x);
        const CompositeLoss c =
            method == Method::kLwF
                ? lwf_loss(post, labels, teacher, loss_config, ignore_id, &grad_logits)
                : cil_loss(post, labels, teacher, loss_config, ignore_id, &grad_logits);
        loss.ce = c.ce.value;
        loss.kd = c.kd.value;
        loss.total = c.total;
      } else if (cil) {
        loss.ce = weighted_cross_entropy(post, labels, ignore_id, loss_config.cil_pixel_weights,
                                         &grad_logits)
                      .value;
        loss.total = loss.ce;
      } else {
        loss.ce = cross_entropy(post, labels, ignore_id, &grad_logits).value;
        loss.total = loss.ce;
      }
      const std::span<const double> prefix = model.parameters().first(state.old_params.size());
      if (regularize) {
        loss.reg = reg_penalty(prefix, state.old_params, *state.importance);
        loss.total += loss_config.lambda * loss.reg;
      }
      if (!std::isfinite(loss.total)) {
        throw TrainingDiverged("non-finite loss in task " + std::to_string(task.task_id) +
                               " epoch " + std::to_string(epoch) + " step " + std::to_string(step) +
                               " (ce " + std::to_string(loss.ce) + ", kd " + std::to_string(loss.kd) +
                               ", reg " + std::to_string(loss.reg) + ", lr " + std::to_string(lr) + ")");
      }
      std::vector<double> grad = model.backward(tape, grad_logits, !model.encoder_frozen());
      if (regularize) {
        reg_penalty_gradient(prefix, state.old_params, *state.importance, loss_config.lambda,
                             std::span<double>(grad).first(state.old_params.size()));
      }
      adam.step(model.mutable_parameters(), grad, model.trainable_mask(), lr);
      if (observer) observer(StepEvent{step, epoch, lr, &model, &grad});

      sum.total += loss.total;
      sum.ce += loss.ce;
      sum.kd += loss.kd;
      sum.reg += loss.reg;
      ++epoch_steps;
    }

    EpochLog entry;
    entry.epoch = epoch;
    entry.loss = sum.total / epoch_steps;
    entry.ce = sum.ce / epoch_steps;
    entry.kd = sum.kd / epoch_steps;
    entry.reg = sum.reg / epoch_steps;
    if (!task.holdout.empty()) {
      entry.holdout_miou = holdout_miou(
          evaluate_confusion(model, task.holdout, num_classes, config.eval_batch_size),
          task.labeled_classes);
    }
    log.epochs.push_back(entry);
    log.stop_epoch = epoch;

    const double score = entry.holdout_miou.value_or(0.0);
    if (!best || score > best_miou || task.holdout.empty()) {
      best = model;
      best_miou = score;
      log.best_epoch = epoch;
    }
    if (epoch - log.best_epoch >= config.patience) break;
  }
  log.best_holdout_miou = std::max(best_miou, 0.0);

  ContinualState next = state;
  next.tasks_seen = state.tasks_seen + 1;
  if (uses_teacher(method)) next.teacher = best->snapshot();
  if (uses_importance(method)) {
    ImportanceMap fresh;
    if (method == Method::kL2) {
      fresh = uniform_importance(*best);
    } else {
      SegModelProbe probe(*best, task.samples);
      ImportanceOptions options;
      options.n_samples = config.importance_samples;
      options.seed = derive_seed(config.seed, "importance/" + std::to_string(task.task_id));
      options.task_id = task.task_id;
      fresh = method == Method::kEWC ? estimate_ewc(probe, options) : estimate_mas(probe, options);
      if (state.importance) {
        fresh = accumulate(extend(*state.importance, fresh.size()), fresh,
                           config.importance_accumulate);
      }
    }
    fresh.task_id = task.task_id;
    next.importance = std::move(fresh);
    next.old_params.assign(best->parameters().begin(), best->parameters().end());
  }
  if (uses_replay(method)) {
    Rng buffer_rng(derive_seed(config.seed, "buffer/" + std::to_string(task.task_id)));
    next.buffer = update_buffer(state.buffer ? *state.buffer : ReplayBuffer(config.buffer_capacity),
                                task, buffer_rng);
  }
  log.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
  return TaskOutcome{std::move(*best), std::move(next), std::move(log)};
}

SegModel initial_model(const ModelCapacity& capacity, std::uint64_t seed) {
  return SegModel(capacity, derive_seed(seed, "model"));
}

namespace {

// Evaluates `model` on every task; tasks sharing an evaluation set share
// one confusion matrix.
void evaluate_increment(const SegModel& model, const TaskSequence& sequence, int eval_batch,
                        ResultsMatrix& results, bool final_row) {
  std::map<std::uint64_t, ConfusionMatrix> cache;
  std::vector<std::optional<double>> row;
  std::vector<std::map<ClassId, double>> per_class;
  for (const auto& task : sequence.tasks) {
    std::uint64_t key = 0xcbf29ce484222325ULL;
    for (const auto& s : task.eval) key = fnv1a(s.source_id + "\n", key);
    auto it = cache.find(key);
    if (it == cache.end()) {
      it = cache.emplace(key, evaluate_confusion(model, task.eval, sequence.num_classes, eval_batch)).first;
    }
    try {
      const MiouResult r = subset_miou(it->second, task.labeled_classes);
      row.push_back(r.miou);
      per_class.push_back(r.per_class);
    } catch (const UndefinedMetric&) {
      row.push_back(std::nullopt);
      per_class.emplace_back();
    }
  }
  results.miou.push_back(std::move(row));
  results.per_class_iou.push_back(std::move(per_class));
  if (!final_row) return;
  ConfusionMatrix all(sequence.num_classes);
  for (const auto& [key, conf] : cache) all.merge(conf);
  try {
    const MiouResult r = miou(all, sequence.all_classes());
    results.final_all_class_miou = r.miou;
    results.final_per_class_iou = r.per_class;
    results.final_excluded_classes = r.excluded;
  } catch (const UndefinedMetric&) {
    results.final_all_class_miou.reset();
  }
}

ResultsMatrix empty_results(const TaskSequence& sequence, const MethodConfig& config) {
  ResultsMatrix r;
  r.method = method_name(config.method);
  r.protocol = protocol_name(sequence.protocol);
  for (const auto& task : sequence.tasks) {
    const bool by_subset =
        sequence.protocol == Protocol::kClassIncremental || task.domain_tag.empty();
    r.task_tags.push_back(by_subset ? "S" + std::to_string(task.task_id + 1) : task.domain_tag);
    r.task_classes.push_back(task.labeled_classes);
  }
  return r;
}

void check_sequence(const TaskSequence& sequence) {
  if (sequence.tasks.empty()) throw InvalidArgument("empty task sequence");
  for (const auto& task : sequence.tasks) {
    if (task.eval.empty()) {
      throw InvalidArgument("task " + std::to_string(task.task_id) + " has no evaluation images");
    }
  }
}

}  // namespace

SequenceRun run_sequence(const TaskSequence& sequence, const MethodConfig& config,
                         const ModelCapacity& capacity, const IncrementObserver& on_increment) {
  check_sequence(sequence);
  if (config.method == Method::kJoint) {
    throw InvalidArgument("Non-Incremental runs train on the joint task; use run_joint");
  }
  validate_method_config(config);
  SequenceRun run{empty_results(sequence, config), {}, initial_model(capacity, config.seed), {}};
  for (std::size_t k = 0; k < sequence.tasks.size(); ++k) {
    TaskOutcome outcome = train_task(std::move(run.model), sequence.tasks[k], run.state, config,
                                     sequence.num_classes, sequence.ignore_id);
    run.model = std::move(outcome.model);
    run.state = std::move(outcome.state);
    run.logs.push_back(std::move(outcome.log));
    run.results.learned_at.push_back(static_cast<int>(k));
    evaluate_increment(run.model, sequence, config.eval_batch_size, run.results,
                       k + 1 == sequence.tasks.size());
    if (on_increment) on_increment(static_cast<int>(k), run);
  }
  return run;
}

TaskSpec make_joint_task(const TaskSequence& sequence, const Dataset* full_labels) {
  std::map<std::string, const LabeledSample*> originals;
  if (full_labels) {
    for (const auto& s : full_labels->samples) originals[s.source_id] = &s;
  }
  TaskSpec joint;
  joint.task_id = 0;
  joint.domain_tag = "joint";
  auto take = [&](const LabeledSample& s) {
    LabeledSample copy = s;
    if (full_labels) {
      const auto it = originals.find(s.source_id);
      if (it == originals.end()) throw InvalidArgument("no full labels for image " + s.source_id);
      copy.label = it->second->label;
    }
    copy.task_id = 0;
    return copy;
  };
  for (const auto& task : sequence.tasks) {
    for (const auto& s : task.samples) joint.samples.push_back(take(s));
    for (const auto& s : task.holdout) joint.holdout.push_back(take(s));
    joint.labeled_classes.insert(task.labeled_classes.begin(), task.labeled_classes.end());
  }
  for (const auto& s : joint.samples) {
    for (ClassId c : present_classes(s.label, s.ignore_id)) joint.labeled_classes.insert(c);
  }
  joint.eval = sequence.tasks.front().eval;
  return joint;
}

SequenceRun run_joint(const TaskSequence& sequence, const TaskSpec& joint,
                      const MethodConfig& config, const ModelCapacity& capacity) {
  check_sequence(sequence);
  MethodConfig joint_config = config;
  joint_config.method = Method::kJoint;
  validate_method_config(joint_config);
  SequenceRun run{empty_results(sequence, joint_config), {}, initial_model(capacity, config.seed), {}};
  TaskOutcome outcome = train_task(std::move(run.model), joint, {}, joint_config,
                                   sequence.num_classes, sequence.ignore_id);
  run.model = std::move(outcome.model);
  run.state = std::move(outcome.state);
  run.logs.push_back(std::move(outcome.log));
  run.results.learned_at.assign(sequence.tasks.size(), 0);
  evaluate_increment(run.model, sequence, config.eval_batch_size, run.results, true);
  return run;
}

}  // namespace cseg
