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
#include "cseg/checkpoint.h"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace cseg {

using Json = nlohmann::ordered_json;

namespace {

Json parse(const std::string& text, const char* schema) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::exception& e) {
    throw IoError(std::string("not valid JSON: ") + e.what());
  }
  if (!j.is_object() || j.value("schema", "") != schema) {
    throw IoError(std::string("expected a document with schema ") + schema);
  }
  return j;
}

template <typename F>
auto guarded(const char* what, F&& f) {
  try {
    return f();
  } catch (const Json::exception& e) {
    throw IoError(std::string("malformed ") + what + ": " + e.what());
  }
}

}  // namespace

std::string checkpoint_to_json(const SegModel& model) {
  Json j;
  j["schema"] = kCheckpointSchema;
  j["capacity"] = {{"widths", model.capacity().widths},
                   {"dilations", model.capacity().dilations}};
  j["seed"] = model.seed();
  Json heads = Json::array();
  for (const auto& h : model.heads()) {
    heads.push_back({{"id", h.id}, {"classes", std::vector<int>(h.classes.begin(), h.classes.end())}});
  }
  j["heads"] = heads;
  j["flags"] = {{"encoder_frozen", model.encoder_frozen()},
                {"norm_frozen", model.norm_layers_frozen()},
                {"frozen_heads", model.frozen_heads()}};
  j["parameters"] = std::vector<double>(model.parameters().begin(), model.parameters().end());
  j["buffers"] = std::vector<double>(model.buffers().begin(), model.buffers().end());
  return j.dump() + "\n";
}

SegModel checkpoint_from_json(const std::string& text) {
  const Json j = parse(text, kCheckpointSchema);
  return guarded("checkpoint", [&] {
    ModelCapacity capacity;
    capacity.widths = j.at("capacity").at("widths").get<std::vector<int>>();
    capacity.dilations = j.at("capacity").at("dilations").get<std::vector<int>>();
    SegModel model(capacity, j.at("seed").get<std::uint64_t>());
    for (const auto& h : j.at("heads")) {
      const auto classes = h.at("classes").get<std::vector<int>>();
      model.add_decoder_head(ClassSet(classes.begin(), classes.end()));
    }
    const auto params = j.at("parameters").get<std::vector<double>>();
    const auto buffers = j.at("buffers").get<std::vector<double>>();
    if (params.size() != model.parameter_count() || buffers.size() != model.buffers().size()) {
      throw LayoutMismatch("checkpoint vectors do not match its architecture");
    }
    std::copy(params.begin(), params.end(), model.mutable_parameters().begin());
    std::copy(buffers.begin(), buffers.end(), model.mutable_buffers().begin());
    const auto& flags = j.at("flags");
    model.freeze_encoder(flags.at("encoder_frozen").get<bool>());
    model.freeze_norm_layers(flags.at("norm_frozen").get<bool>());
    model.set_frozen_heads(flags.at("frozen_heads").get<std::vector<int>>());
    return model;
  });
}

std::string importance_to_json(const ImportanceMap& map) {
  Json j;
  j["schema"] = kImportanceSchema;
  j["method"] = map.method;
  j["task_id"] = map.task_id;
  j["sample_count"] = map.sample_count;
  j["task_count"] = map.task_count;
  j["values"] = map.values;
  return j.dump() + "\n";
}

ImportanceMap importance_from_json(const std::string& text) {
  const Json j = parse(text, kImportanceSchema);
  return guarded("importance map", [&] {
    ImportanceMap map;
    map.method = j.at("method").get<std::string>();
    map.task_id = j.at("task_id").get<int>();
    map.sample_count = j.at("sample_count").get<int>();
    map.task_count = j.at("task_count").get<int>();
    map.values = j.at("values").get<std::vector<double>>();
    return map;
  });
}

std::string train_log_to_json(const TrainLog& log) {
  Json j;
  j["schema"] = kTrainLogSchema;
  j["task_id"] = log.task_id;
  j["base_lr"] = log.base_lr;
  j["power"] = log.power;
  j["total_steps"] = log.total_steps;
  j["stop_epoch"] = log.stop_epoch;
  j["best_epoch"] = log.best_epoch;
  j["best_holdout_miou"] = log.best_holdout_miou;
  j["wall_seconds"] = log.wall_seconds;
  Json epochs = Json::array();
  for (const auto& e : log.epochs) {
    epochs.push_back({{"epoch", e.epoch},
                      {"loss", e.loss},
                      {"ce", e.ce},
                      {"kd", e.kd},
                      {"reg", e.reg},
                      {"holdout_miou", e.holdout_miou ? Json(*e.holdout_miou) : Json(nullptr)}});
  }
  j["epochs"] = epochs;
  j["lr_trace"] = log.lr_trace;
  return j.dump(1) + "\n";
}

std::string buffer_to_json(const ReplayBuffer& buffer) {
  Json j;
  j["schema"] = kBufferSchema;
  j["capacity"] = buffer.capacity();
  Json slots = Json::array();
  for (const auto& [id, task] : buffer_manifest(buffer)) {
    slots.push_back({{"source_id", id}, {"task_id", task}});
  }
  j["slots"] = slots;
  return j.dump(1) + "\n";
}

ReplayBuffer buffer_from_json(const std::string& text, const TaskSequence& sequence) {
  const Json j = parse(text, kBufferSchema);
  return guarded("buffer manifest", [&] {
    std::vector<std::pair<std::string, int>> manifest;
    for (const auto& s : j.at("slots")) {
      manifest.emplace_back(s.at("source_id").get<std::string>(), s.at("task_id").get<int>());
    }
    return restore_buffer(j.at("capacity").get<int>(), manifest, sequence);
  });
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << text;
    if (!out) throw IoError("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace cseg
