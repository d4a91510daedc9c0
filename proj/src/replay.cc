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
#include "cseg/replay.h"

#include <algorithm>

namespace cseg {
namespace {

// k indices drawn without replacement from [0, n), returned ascending so the
// survivors keep their stored order.
std::vector<std::size_t> draw_without_replacement(std::size_t n, std::size_t k, Rng& rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  rng.shuffle(idx);
  idx.resize(std::min(k, n));
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

ReplayBuffer::ReplayBuffer(int capacity) : capacity_(capacity) {
  if (capacity < 1) throw InvalidArgument("replay capacity must be positive");
}

std::map<int, int> ReplayBuffer::counts_per_task() const {
  std::map<int, int> counts;
  for (int t : observed_) counts[t] = 0;
  for (const auto& slot : slots_) ++counts[slot.task_id];
  return counts;
}

std::vector<int> ReplayBuffer::quotas(int tasks) const {
  if (tasks < 1) return {};
  std::vector<int> q(tasks, capacity_ / tasks);
  for (int i = 0; i < capacity_ % tasks; ++i) ++q[i];
  return q;
}

ReplayBuffer update_buffer(const ReplayBuffer& buffer, const TaskSpec& task, Rng& rng) {
  if (std::find(buffer.observed_.begin(), buffer.observed_.end(), task.task_id) !=
      buffer.observed_.end()) {
    throw InvalidArgument("task " + std::to_string(task.task_id) + " is already in the buffer");
  }
  ReplayBuffer out(buffer.capacity_);
  out.observed_ = buffer.observed_;
  out.observed_.push_back(task.task_id);
  const std::vector<int> quota = out.quotas(static_cast<int>(out.observed_.size()));

  for (std::size_t t = 0; t + 1 < out.observed_.size(); ++t) {
    std::vector<const ReplaySlot*> mine;
    for (const auto& slot : buffer.slots_) {
      if (slot.task_id == out.observed_[t]) mine.push_back(&slot);
    }
    for (std::size_t i : draw_without_replacement(mine.size(), quota[t], rng)) {
      out.slots_.push_back(*mine[i]);
    }
  }
  for (std::size_t i : draw_without_replacement(task.samples.size(), quota.back(), rng)) {
    out.slots_.push_back({task.samples[i], task.task_id});
  }
  return out;
}

int new_samples_per_batch(int batch_size, const ReplayBuffer& buffer) {
  return buffer.empty() ? batch_size : (batch_size + 1) / 2;
}

ComposedBatch compose_batch(std::span<const LabeledSample* const> new_samples,
                            const ReplayBuffer& buffer, int batch_size, Rng& rng) {
  if (batch_size < 2) throw InvalidArgument("compose_batch needs batch_size >= 2");
  ComposedBatch batch;
  if (buffer.empty()) {
    if (static_cast<int>(new_samples.size()) > batch_size) {
      throw InvalidArgument("more new samples than the batch holds");
    }
    for (const auto* s : new_samples) batch.samples.push_back(*s);
    batch.new_count = static_cast<int>(new_samples.size());
    batch.replay_unavailable = true;
    return batch;
  }
  const int new_quota = (batch_size + 1) / 2;
  const int replay_quota = batch_size / 2;
  if (static_cast<int>(new_samples.size()) > new_quota) {
    throw InvalidArgument("compose_batch takes at most ceil(batch_size/2) new samples");
  }
  batch.new_count = static_cast<int>(new_samples.size());
  batch.replay_count = batch.new_count == new_quota ? replay_quota : batch.new_count;
  for (const auto* s : new_samples) batch.samples.push_back(*s);
  for (int i = 0; i < batch.replay_count; ++i) {
    batch.samples.push_back(buffer.slots()[rng.below(buffer.size())].sample);
  }
  rng.shuffle(batch.samples);
  return batch;
}

std::vector<std::pair<std::string, int>> buffer_manifest(const ReplayBuffer& buffer) {
  std::vector<std::pair<std::string, int>> out;
  for (const auto& slot : buffer.slots()) out.emplace_back(slot.sample.source_id, slot.task_id);
  return out;
}

ReplayBuffer restore_buffer(int capacity, const std::vector<std::pair<std::string, int>>& manifest,
                            const TaskSequence& sequence) {
  ReplayBuffer out(capacity);
  if (manifest.size() > static_cast<std::size_t>(capacity)) {
    throw InvalidArgument("manifest holds more slots than the capacity");
  }
  for (const auto& [id, task_id] : manifest) {
    const TaskSpec* task = nullptr;
    for (const auto& t : sequence.tasks) {
      if (t.task_id == task_id) task = &t;
    }
    if (!task) throw InvalidArgument("manifest names unknown task " + std::to_string(task_id));
    auto it = std::find_if(task->samples.begin(), task->samples.end(),
                           [&](const LabeledSample& s) { return s.source_id == id; });
    if (it == task->samples.end()) {
      throw InvalidArgument("manifest sample '" + id + "' not found in task " +
                            std::to_string(task_id));
    }
    if (std::find(out.observed_.begin(), out.observed_.end(), task_id) == out.observed_.end()) {
      out.observed_.push_back(task_id);
    }
    out.slots_.push_back({*it, task_id});
  }
  return out;
}

}  // namespace cseg
