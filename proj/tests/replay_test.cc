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

#include <gtest/gtest.h>

#include <set>

#include "test_util.h"

namespace cseg {
namespace {

TaskSpec make_task(int task_id, int count, int height = 4) {
  Rng rng(100 + task_id);
  TaskSpec t;
  t.task_id = task_id;
  for (int i = 0; i < count; ++i) {
    LabeledSample s = testing::random_sample(height, 4, 3, rng,
                                             "t" + std::to_string(task_id) + "_" + std::to_string(i));
    s.task_id = task_id;
    t.samples.push_back(std::move(s));
  }
  return t;
}

std::vector<int> counts(const ReplayBuffer& buffer) {
  std::vector<int> out;
  for (const auto& [task, n] : buffer.counts_per_task()) out.push_back(n);
  return out;
}

TEST(ReplayTest, QuotasSplitEvenly) {
  ReplayBuffer buffer(32);
  EXPECT_EQ(buffer.quotas(1), (std::vector<int>{32}));
  EXPECT_EQ(buffer.quotas(2), (std::vector<int>{16, 16}));
  EXPECT_EQ(buffer.quotas(3), (std::vector<int>{11, 11, 10}));
}

TEST(ReplayTest, SlotCountsAfterEachTask) {
  Rng rng(1);
  ReplayBuffer buffer(32);
  buffer = update_buffer(buffer, make_task(0, 50), rng);
  EXPECT_EQ(counts(buffer), (std::vector<int>{32}));
  buffer = update_buffer(buffer, make_task(1, 40), rng);
  EXPECT_EQ(counts(buffer), (std::vector<int>{16, 16}));
  buffer = update_buffer(buffer, make_task(2, 40), rng);
  EXPECT_EQ(counts(buffer), (std::vector<int>{11, 11, 10}));
  EXPECT_EQ(buffer.size(), 32u);
  EXPECT_EQ(buffer.observed_tasks(), (std::vector<int>{0, 1, 2}));
}

TEST(ReplayTest, DownsamplingKeepsOnlyEarlierSlots) {
  Rng rng(2);
  ReplayBuffer one = update_buffer(ReplayBuffer(32), make_task(0, 50), rng);
  std::set<std::string> first;
  for (const auto& s : one.slots()) first.insert(s.sample.source_id);
  ReplayBuffer two = update_buffer(one, make_task(1, 50), rng);
  std::set<std::string> seen;
  for (const auto& s : two.slots()) {
    EXPECT_TRUE(seen.insert(s.sample.source_id).second) << "duplicate slot";
    if (s.task_id == 0) {
      EXPECT_TRUE(first.count(s.sample.source_id));
    }
  }
}

TEST(ReplayTest, SmallTaskIsStoredWhole) {
  Rng rng(3);
  ReplayBuffer buffer = update_buffer(ReplayBuffer(32), make_task(0, 5), rng);
  EXPECT_EQ(buffer.size(), 5u);
  buffer = update_buffer(buffer, make_task(1, 40), rng);
  EXPECT_EQ(counts(buffer), (std::vector<int>{5, 16}));
}

TEST(ReplayTest, UpdateIsDeterministic) {
  Rng a(9), b(9);
  const ReplayBuffer x = update_buffer(ReplayBuffer(8), make_task(0, 30), a);
  const ReplayBuffer y = update_buffer(ReplayBuffer(8), make_task(0, 30), b);
  EXPECT_EQ(buffer_manifest(x), buffer_manifest(y));
}

TEST(ReplayTest, DuplicateTaskAndBadCapacity) {
  Rng rng(4);
  const ReplayBuffer buffer = update_buffer(ReplayBuffer(4), make_task(0, 10), rng);
  EXPECT_THROW(update_buffer(buffer, make_task(0, 10), rng), InvalidArgument);
  EXPECT_THROW(ReplayBuffer(0), InvalidArgument);
}

std::vector<const LabeledSample*> pointers(const TaskSpec& task, int count) {
  std::vector<const LabeledSample*> out;
  for (int i = 0; i < count; ++i) out.push_back(&task.samples[i]);
  return out;
}

TEST(ReplayTest, ComposedBatchesSplitHalfAndHalf) {
  Rng rng(5);
  const TaskSpec old_task = make_task(0, 40);
  const TaskSpec new_task = make_task(1, 40);
  const ReplayBuffer buffer = update_buffer(ReplayBuffer(32), old_task, rng);
  for (const auto& [batch, expect_new, expect_replay] :
       std::vector<std::tuple<int, int, int>>{{6, 3, 3}, {16, 8, 8}, {5, 3, 2}}) {
    EXPECT_EQ(new_samples_per_batch(batch, buffer), expect_new);
    const auto news = pointers(new_task, expect_new);
    const ComposedBatch b = compose_batch(news, buffer, batch, rng);
    EXPECT_EQ(b.new_count, expect_new);
    EXPECT_EQ(b.replay_count, expect_replay);
    EXPECT_EQ(static_cast<int>(b.samples.size()), batch);
    int from_new = 0, from_old = 0;
    for (const auto& s : b.samples) (s.task_id == 1 ? from_new : from_old)++;
    EXPECT_EQ(from_new, expect_new);
    EXPECT_EQ(from_old, expect_replay);
    EXPECT_FALSE(b.replay_unavailable);
  }
}

TEST(ReplayTest, ShortFinalChunkIsMatched) {
  Rng rng(6);
  const ReplayBuffer buffer = update_buffer(ReplayBuffer(32), make_task(0, 40), rng);
  const TaskSpec new_task = make_task(1, 2);
  const ComposedBatch b = compose_batch(pointers(new_task, 2), buffer, 6, rng);
  EXPECT_EQ(b.new_count, 2);
  EXPECT_EQ(b.replay_count, 2);
}

TEST(ReplayTest, EmptyBufferGivesNewDataOnly) {
  Rng rng(7);
  const ReplayBuffer empty(32);
  EXPECT_EQ(new_samples_per_batch(6, empty), 6);
  const TaskSpec task = make_task(0, 6);
  const ComposedBatch b = compose_batch(pointers(task, 6), empty, 6, rng);
  EXPECT_TRUE(b.replay_unavailable);
  EXPECT_EQ(b.new_count, 6);
  EXPECT_EQ(b.replay_count, 0);
}

TEST(ReplayTest, ComposeRejectsOversizedInput) {
  Rng rng(8);
  const ReplayBuffer buffer = update_buffer(ReplayBuffer(32), make_task(0, 40), rng);
  const TaskSpec task = make_task(1, 8);
  EXPECT_THROW(compose_batch(pointers(task, 4), buffer, 6, rng), InvalidArgument);
  EXPECT_THROW(compose_batch(pointers(task, 1), buffer, 1, rng), InvalidArgument);
}

TEST(ReplayTest, ReplayKeepsOriginalResolution) {
  Rng rng(9);
  const ReplayBuffer buffer = update_buffer(ReplayBuffer(4), make_task(0, 10, 6), rng);
  for (const auto& s : buffer.slots()) EXPECT_EQ(s.sample.image.height(), 6);
}

TEST(ReplayTest, ManifestRoundTrip) {
  Rng rng(10);
  TaskSequence seq;
  seq.tasks = {make_task(0, 30), make_task(1, 30)};
  ReplayBuffer buffer = update_buffer(ReplayBuffer(10), seq.tasks[0], rng);
  buffer = update_buffer(buffer, seq.tasks[1], rng);
  const auto manifest = buffer_manifest(buffer);
  const ReplayBuffer restored = restore_buffer(10, manifest, seq);
  EXPECT_EQ(buffer_manifest(restored), manifest);
  EXPECT_EQ(restored.observed_tasks(), buffer.observed_tasks());
  for (std::size_t i = 0; i < buffer.size(); ++i) {
    EXPECT_EQ(restored.slots()[i].sample, buffer.slots()[i].sample);
  }
  auto bad = manifest;
  bad[0].first = "missing";
  EXPECT_THROW(restore_buffer(10, bad, seq), InvalidArgument);
  EXPECT_THROW(restore_buffer(3, manifest, seq), InvalidArgument);
}

}  // namespace
}  // namespace cseg
