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
#ifndef CSEG_CHECKPOINT_H_
#define CSEG_CHECKPOINT_H_

#include <filesystem>
#include <string>

#include "cseg/importance_map.h"
#include "cseg/model/seg_model.h"
#include "cseg/replay.h"
#include "cseg/trainer.h"

namespace cseg {

inline constexpr const char* kCheckpointSchema = "cseg.checkpoint/1";
inline constexpr const char* kImportanceSchema = "cseg.importance/1";
inline constexpr const char* kTrainLogSchema = "cseg.trainlog/1";
inline constexpr const char* kBufferSchema = "cseg.buffer/1";

// Architecture, head layout, freezing flags, parameters and norm statistics.
// Doubles are written in shortest round-trip form, so a load reproduces the
// model bit for bit.
std::string checkpoint_to_json(const SegModel& model);
SegModel checkpoint_from_json(const std::string& text);

std::string importance_to_json(const ImportanceMap& map);
ImportanceMap importance_from_json(const std::string& text);

std::string train_log_to_json(const TrainLog& log);

std::string buffer_to_json(const ReplayBuffer& buffer);
// Slots are looked up by source id in the sequence.
ReplayBuffer buffer_from_json(const std::string& text, const TaskSequence& sequence);

std::string read_text_file(const std::filesystem::path& path);
// Writes through a temporary file and renames, so readers never see a
// partial document.
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace cseg

#endif  // CSEG_CHECKPOINT_H_
