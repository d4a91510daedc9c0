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
#ifndef CSEG_REPLAY_H_
#define CSEG_REPLAY_H_

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "cseg/common.h"
#include "cseg/taskbench/splits.h"

namespace cseg {

struct ReplaySlot {
  LabeledSample sample;
  int task_id = 0;
};

// Fixed-capacity episodic memory shared evenly between observed tasks.
// Samples are stored as given (original resolution, their task's labels).
class ReplayBuffer {
 public:
  explicit ReplayBuffer(int capacity = 32);

  int capacity() const { return capacity_; }
  bool empty() const { return slots_.empty(); }
  std::size_t size() const { return slots_.size(); }
  const std::vector<ReplaySlot>& slots() const { return slots_; }
  // Task ids in observation order.
  const std::vector<int>& observed_tasks() const { return observed_; }
  std::map<int, int> counts_per_task() const;

  // Per-task quota after `tasks` tasks: floor(capacity / tasks), with the
  // remainder going one slot each to the earliest tasks.
  std::vector<int> quotas(int tasks) const;

 private:
  friend ReplayBuffer update_buffer(const ReplayBuffer&, const TaskSpec&, Rng&);
  friend ReplayBuffer restore_buffer(int, const std::vector<std::pair<std::string, int>>&,
                                     const TaskSequence&);
  int capacity_;
  std::vector<ReplaySlot> slots_;
  std::vector<int> observed_;
};

// Adds a task: existing tasks are down-sampled to their new quota and the new
// task fills its quota, both by seeded draws without replacement. A task with
// fewer images than its quota is stored whole.
ReplayBuffer update_buffer(const ReplayBuffer& buffer, const TaskSpec& task, Rng& rng);

struct ComposedBatch {
  std::vector<LabeledSample> samples;
  int new_count = 0;
  int replay_count = 0;
  // The buffer was empty, so the batch holds only new data.
  bool replay_unavailable = false;
};

// New samples a training step should draw for a batch of `batch_size`.
int new_samples_per_batch(int batch_size, const ReplayBuffer& buffer);

// ceil(B/2) new samples joined by floor(B/2) replay samples drawn uniformly
// with replacement, then shuffled. A short final chunk of new data is matched
// by an equal number of replay samples. With an empty buffer the new samples
// are returned as they are.
ComposedBatch compose_batch(std::span<const LabeledSample* const> new_samples,
                            const ReplayBuffer& buffer, int batch_size, Rng& rng);

// (source_id, task_id) per slot, in slot order.
std::vector<std::pair<std::string, int>> buffer_manifest(const ReplayBuffer& buffer);
// Rebuilds a buffer from its manifest by looking samples up in the sequence.
ReplayBuffer restore_buffer(int capacity, const std::vector<std::pair<std::string, int>>& manifest,
                            const TaskSequence& sequence);

}  // namespace cseg

#endif  // CSEG_REPLAY_H_
