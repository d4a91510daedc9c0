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
#include "cseg/eval.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <sstream>

#include "json.hpp"

namespace cseg {

using Json = nlohmann::ordered_json;

ConfusionMatrix::ConfusionMatrix(int num_classes)
    : num_classes_(num_classes),
      counts_(static_cast<std::size_t>(num_classes) * num_classes, 0) {
  if (num_classes < 0) throw InvalidArgument("negative class count");
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t sum = 0;
  for (auto c : counts_) sum += c;
  return sum;
}

void ConfusionMatrix::add(const LabelMap& predicted, const LabelMap& truth, int ignore_id) {
  if (predicted.height() != truth.height() || predicted.width() != truth.width()) {
    throw ShapeMismatch("prediction and label sizes differ");
  }
  const auto& p = predicted.values();
  const auto& g = truth.values();
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g[i] == ignore_id) continue;
    if (g[i] < 0 || g[i] >= num_classes_) {
      throw InvalidArgument("ground-truth class " + std::to_string(g[i]) + " out of range");
    }
    if (p[i] < 0 || p[i] >= num_classes_) {
      throw InvalidArgument("predicted class " + std::to_string(p[i]) + " out of range");
    }
    ++counts_[static_cast<std::size_t>(g[i]) * num_classes_ + p[i]];
  }
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.num_classes_ != num_classes_) throw ShapeMismatch("confusion matrix sizes differ");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
}

ConfusionMatrix ConfusionMatrix::restricted_to_truth(const ClassSet& classes) const {
  ConfusionMatrix out(num_classes_);
  for (ClassId c : classes) {
    if (c < 0 || c >= num_classes_) throw InvalidArgument("class " + std::to_string(c) + " out of range");
    const std::size_t row = static_cast<std::size_t>(c) * num_classes_;
    std::copy_n(counts_.begin() + row, num_classes_, out.counts_.begin() + row);
  }
  return out;
}

ConfusionMatrix accumulate_confusion(const LabelMap& predicted, const LabelMap& truth,
                                     int num_classes, int ignore_id) {
  ConfusionMatrix m(num_classes);
  m.add(predicted, truth, ignore_id);
  return m;
}

MiouResult miou(const ConfusionMatrix& confusion, const ClassSet& class_subset) {
  if (class_subset.empty()) throw InvalidArgument("miou needs a nonempty class subset");
  const int k = confusion.num_classes();
  MiouResult out;
  double sum = 0.0;
  for (ClassId c : class_subset) {
    if (c < 0 || c >= k) throw InvalidArgument("subset class " + std::to_string(c) + " out of range");
    std::uint64_t tp = confusion.at(c, c), fp = 0, fn = 0;
    for (int j = 0; j < k; ++j) {
      if (j == c) continue;
      fn += confusion.at(c, j);
      fp += confusion.at(j, c);
    }
    const std::uint64_t denom = tp + fp + fn;
    if (denom == 0) {
      out.excluded.push_back(c);
      continue;
    }
    const double iou = static_cast<double>(tp) / static_cast<double>(denom);
    out.per_class[c] = iou;
    sum += iou;
  }
  if (out.per_class.empty()) {
    throw UndefinedMetric("mIoU undefined: no subset class occurs in prediction or ground truth");
  }
  out.miou = sum / static_cast<double>(out.per_class.size());
  return out;
}

MiouResult subset_miou(const ConfusionMatrix& confusion, const ClassSet& class_subset) {
  return miou(confusion.restricted_to_truth(class_subset), class_subset);
}

ConfusionMatrix evaluate_confusion(const SegModel& model, const std::vector<LabeledSample>& samples,
                                   int num_classes, int batch_size) {
  ConfusionMatrix m(num_classes);
  for (std::size_t start = 0; start < samples.size();) {
    // Batches group consecutive samples of equal size.
    std::vector<const Image*> images;
    std::size_t end = start;
    while (end < samples.size() && images.size() < static_cast<std::size_t>(batch_size) &&
           samples[end].image.height() == samples[start].image.height() &&
           samples[end].image.width() == samples[start].image.width()) {
      images.push_back(&samples[end].image);
      ++end;
    }
    const auto masks = predict_mask(model.forward(images_to_tensor(images)));
    for (std::size_t i = start; i < end; ++i) {
      m.add(masks[i - start], samples[i].label, samples[i].ignore_id);
    }
    start = end;
  }
  return m;
}

// ------------------------------------------------------------------ JSON

namespace {

Json class_map_json(const std::map<ClassId, double>& m) {
  Json j = Json::object();
  for (const auto& [c, v] : m) j[std::to_string(c)] = v;
  return j;
}

std::map<ClassId, double> class_map_from(const Json& j) {
  std::map<ClassId, double> m;
  for (auto it = j.begin(); it != j.end(); ++it) m[std::stoi(it.key())] = it.value().get<double>();
  return m;
}

Json optional_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

std::optional<double> optional_from(const Json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

}  // namespace

std::string results_to_json(const ResultsMatrix& r) {
  Json j;
  j["schema"] = ResultsMatrix::kSchema;
  j["method"] = r.method;
  j["protocol"] = r.protocol;
  j["config_fingerprint"] = r.config_fingerprint;
  Json tasks = Json::array();
  for (std::size_t t = 0; t < r.task_tags.size(); ++t) {
    Json task;
    task["tag"] = r.task_tags[t];
    task["classes"] = std::vector<int>(r.task_classes.at(t).begin(), r.task_classes.at(t).end());
    task["learned_at"] = r.learned_at.at(t);
    tasks.push_back(task);
  }
  j["tasks"] = tasks;
  Json rows = Json::array();
  for (std::size_t k = 0; k < r.miou.size(); ++k) {
    Json row = Json::array();
    for (std::size_t t = 0; t < r.miou[k].size(); ++t) {
      Json cell;
      cell["miou"] = optional_json(r.miou[k][t]);
      cell["per_class_iou"] = class_map_json(r.per_class_iou.at(k).at(t));
      row.push_back(cell);
    }
    rows.push_back(row);
  }
  j["increments"] = rows;
  Json fin;
  fin["miou"] = optional_json(r.final_all_class_miou);
  fin["per_class_iou"] = class_map_json(r.final_per_class_iou);
  fin["excluded_classes"] = r.final_excluded_classes;
  j["final_all_classes"] = fin;
  return j.dump(2) + "\n";
}

ResultsMatrix results_from_json(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::exception& e) {
    throw IoError(std::string("results file is not valid JSON: ") + e.what());
  }
  if (j.value("schema", "") != ResultsMatrix::kSchema) {
    throw IoError("results file has an unsupported schema");
  }
  try {
    ResultsMatrix r;
    r.method = j.at("method").get<std::string>();
    r.protocol = j.at("protocol").get<std::string>();
    r.config_fingerprint = j.at("config_fingerprint").get<std::string>();
    for (const auto& task : j.at("tasks")) {
      r.task_tags.push_back(task.at("tag").get<std::string>());
      const auto classes = task.at("classes").get<std::vector<int>>();
      r.task_classes.emplace_back(classes.begin(), classes.end());
      r.learned_at.push_back(task.at("learned_at").get<int>());
    }
    for (const auto& row : j.at("increments")) {
      std::vector<std::optional<double>> values;
      std::vector<std::map<ClassId, double>> per_class;
      for (const auto& cell : row) {
        values.push_back(optional_from(cell.at("miou")));
        per_class.push_back(class_map_from(cell.at("per_class_iou")));
      }
      r.miou.push_back(std::move(values));
      r.per_class_iou.push_back(std::move(per_class));
    }
    const auto& fin = j.at("final_all_classes");
    r.final_all_class_miou = optional_from(fin.at("miou"));
    r.final_per_class_iou = class_map_from(fin.at("per_class_iou"));
    r.final_excluded_classes = fin.at("excluded_classes").get<std::vector<int>>();
    return r;
  } catch (const Json::exception& e) {
    throw IoError(std::string("malformed results file: ") + e.what());
  }
}

// --------------------------------------------------------------- reports

namespace {

std::string percent(const std::optional<double>& v) {
  if (!v) return "-";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", 100.0 * *v);
  return buf;
}

std::string signed_percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%+.1f", 100.0 * v);
  return buf;
}

void check_complete(const ResultsMatrix& r) {
  const std::size_t tasks = r.task_tags.size();
  if (tasks == 0) throw InvalidArgument("results matrix has no tasks");
  if (r.task_classes.size() != tasks || r.learned_at.size() != tasks) {
    throw InvalidArgument("results matrix task metadata is incomplete");
  }
  if (r.miou.empty()) throw InvalidArgument("results matrix has no increments");
  for (std::size_t k = 0; k < r.miou.size(); ++k) {
    if (r.miou[k].size() != tasks) {
      throw InvalidArgument("results matrix row " + std::to_string(k) + " is incomplete");
    }
  }
  for (int at : r.learned_at) {
    if (at < 0 || at >= static_cast<int>(r.miou.size())) {
      throw InvalidArgument("results matrix learned_at points past the last increment");
    }
  }
}

class TextTable {
 public:
  void row(std::vector<std::string> cells) { rows_.push_back(std::move(cells)); }
  std::string str() const {
    std::vector<std::size_t> widths;
    for (const auto& r : rows_) {
      widths.resize(std::max(widths.size(), r.size()), 0);
      for (std::size_t i = 0; i < r.size(); ++i) widths[i] = std::max(widths[i], r[i].size());
    }
    std::ostringstream out;
    for (const auto& r : rows_) {
      for (std::size_t i = 0; i < r.size(); ++i) {
        if (i == 0) {
          out << std::left << std::setw(static_cast<int>(widths[i])) << r[i];
        } else {
          out << "  " << std::right << std::setw(static_cast<int>(widths[i])) << r[i];
        }
      }
      out << '\n';
    }
    return out.str();
  }
  std::string csv() const {
    std::ostringstream out;
    for (const auto& r : rows_) {
      for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << r[i];
      out << '\n';
    }
    return out.str();
  }

 private:
  std::vector<std::vector<std::string>> rows_;
};

std::string increment_label(const ResultsMatrix& r, std::size_t k) {
  if (r.miou.size() == 1 && r.task_tags.size() > 1) return "after joint training";
  std::string label = "after T1";
  if (k > 0) label += "..T" + std::to_string(k + 1);
  return label;
}

}  // namespace

Report build_report(const ResultsMatrix& r) {
  check_complete(r);
  const std::size_t tasks = r.task_tags.size();
  const std::size_t last = r.miou.size() - 1;
  Report report;

  TextTable table;
  std::vector<std::string> header = {"mIoU [%]"};
  for (std::size_t t = 0; t < tasks; ++t) header.push_back("T" + std::to_string(t + 1) + ":" + r.task_tags[t]);
  table.row(header);
  for (std::size_t k = 0; k < r.miou.size(); ++k) {
    std::vector<std::string> row = {increment_label(r, k)};
    for (std::size_t t = 0; t < tasks; ++t) row.push_back(percent(r.miou[k][t]));
    table.row(row);
  }

  TextTable summary;
  summary.row({"task", "learned", "final", "forgetting"});
  double sum = 0.0;
  int defined = 0;
  for (std::size_t t = 0; t < tasks; ++t) {
    const auto& learned = r.miou[r.learned_at[t]][t];
    const auto& final = r.miou[last][t];
    const double f = (learned && final) ? *learned - *final : 0.0;
    report.forgetting.push_back(f);
    summary.row({"T" + std::to_string(t + 1), percent(learned), percent(final), signed_percent(f)});
    if (final) {
      sum += *final;
      ++defined;
    }
  }
  if (defined > 0) report.average_miou = sum / defined;

  std::ostringstream text;
  text << "method: " << r.method << "\nprotocol: " << r.protocol
       << "\nconfig: " << r.config_fingerprint << "\n\n";
  text << table.str() << '\n' << summary.str() << '\n';
  text << "mIoU average (final row): " << percent(report.average_miou) << '\n';
  text << "mIoU all classes (final): " << percent(r.final_all_class_miou) << '\n';
  if (!r.final_excluded_classes.empty()) {
    text << "classes absent from prediction and ground truth (not averaged):";
    for (ClassId c : r.final_excluded_classes) text << ' ' << c;
    text << '\n';
  }
  report.text = text.str();

  std::ostringstream csv;
  csv << table.csv() << '\n' << summary.csv();
  csv << "average," << percent(report.average_miou) << '\n';
  csv << "all_classes," << percent(r.final_all_class_miou) << '\n';
  report.csv = csv.str();
  return report;
}

std::string comparison_table(const std::vector<ResultsMatrix>& runs) {
  if (runs.empty()) throw InvalidArgument("comparison needs at least one run");
  for (const auto& r : runs) check_complete(r);
  const ResultsMatrix& ref = runs.front();
  const std::size_t tasks = ref.task_tags.size();
  for (const auto& r : runs) {
    if (r.protocol != ref.protocol || r.task_tags.size() != tasks) {
      throw InvalidArgument("cannot compare runs of different protocols or task counts");
    }
  }
  const bool class_incremental = ref.protocol == "class-incremental";

  struct Column {
    std::string name;
    int increment;  // -1: final all-class, -2: final average
    int task;
  };
  std::vector<Column> columns;
  if (class_incremental) {
    for (std::size_t k = (tasks > 1 ? 1 : 0); k < tasks; ++k) {
      for (std::size_t t = 0; t <= k; ++t) {
        columns.push_back({"T1.." + std::to_string(k + 1) + " " + ref.task_tags[t],
                           static_cast<int>(k), static_cast<int>(t)});
      }
    }
    columns.push_back({"all classes", -1, 0});
  } else {
    for (std::size_t t = 0; t < tasks; ++t) {
      columns.push_back({ref.task_tags[t], static_cast<int>(tasks - 1), static_cast<int>(t)});
    }
    columns.push_back({"average", -2, 0});
  }

  auto value = [&](const ResultsMatrix& r, const Column& col) -> std::optional<double> {
    const std::size_t rows = r.miou.size();
    if (col.increment == -1) return r.final_all_class_miou;
    if (col.increment == -2) return build_report(r).average_miou;
    if (rows == tasks) return r.miou[col.increment][col.task];
    if (static_cast<std::size_t>(col.increment) == tasks - 1) return r.miou[rows - 1][col.task];
    return std::nullopt;
  };

  std::vector<std::vector<std::optional<double>>> grid(runs.size());
  for (std::size_t i = 0; i < runs.size(); ++i)
    for (const auto& col : columns) grid[i].push_back(value(runs[i], col));

  TextTable table;
  std::vector<std::string> header = {"method"};
  for (const auto& col : columns) header.push_back(col.name);
  table.row(header);
  for (std::size_t i = 0; i < runs.size(); ++i) {
    std::vector<std::string> row = {runs[i].method};
    for (std::size_t c = 0; c < columns.size(); ++c) {
      std::vector<double> values;
      for (std::size_t k = 0; k < runs.size(); ++k)
        if (grid[k][c]) values.push_back(*grid[k][c]);
      std::sort(values.rbegin(), values.rend());
      values.erase(std::unique(values.begin(), values.end()), values.end());
      std::string cell = percent(grid[i][c]);
      if (grid[i][c] && runs.size() > 1) {
        if (*grid[i][c] == values[0]) {
          cell += '*';
        } else if (values.size() > 1 && *grid[i][c] == values[1]) {
          cell += '^';
        }
      }
      row.push_back(cell);
    }
    table.row(row);
  }
  return "protocol: " + ref.protocol + "  (* best, ^ second best)\n" + table.str();
}

std::string forgetting_svg(const ResultsMatrix& r) {
  check_complete(r);
  const int width = 480, height = 300, margin = 40;
  const std::size_t rows = r.miou.size();
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<line x1=\"" << margin << "\" y1=\"" << height - margin << "\" x2=\"" << width - margin
      << "\" y2=\"" << height - margin << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\"" << margin << "\" y2=\""
      << height - margin << "\" stroke=\"black\"/>\n";
  const auto px = [&](std::size_t k) {
    return rows > 1 ? margin + (width - 2.0 * margin) * k / (rows - 1) : width / 2.0;
  };
  const auto py = [&](double v) { return height - margin - (height - 2.0 * margin) * v; };
  for (std::size_t t = 0; t < r.task_tags.size(); ++t) {
    const char* color = kColors[t % 6];
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t k = static_cast<std::size_t>(r.learned_at[t]); k < rows; ++k) {
      if (r.miou[k][t]) svg << px(k) << ',' << py(*r.miou[k][t]) << ' ';
    }
    svg << "\"/>\n<text x=\"" << width - margin + 4 << "\" y=\"" << margin + 14 * t
        << "\" font-size=\"11\" fill=\"" << color << "\">T" << t + 1 << "</text>\n";
  }
  svg << "<text x=\"" << margin << "\" y=\"20\" font-size=\"12\">" << r.method
      << ": per-task mIoU after each increment</text>\n</svg>\n";
  return svg.str();
}

}  // namespace cseg
