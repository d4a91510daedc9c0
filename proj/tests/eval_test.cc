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

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "test_util.h"

namespace cseg {
namespace {

using testing::label_from;
using testing::random_label;

ConfusionMatrix two_by_two() {
  return accumulate_confusion(label_from(2, 2, {0, 1, 1, 1}), label_from(2, 2, {0, 0, 1, 1}), 2,
                              kDefaultIgnoreId);
}

TEST(ConfusionTest, HandExampleCounts) {
  const ConfusionMatrix m = two_by_two();
  EXPECT_EQ(m.at(0, 0), 1u);
  EXPECT_EQ(m.at(0, 1), 1u);
  EXPECT_EQ(m.at(1, 0), 0u);
  EXPECT_EQ(m.at(1, 1), 2u);
  EXPECT_EQ(m.total(), 4u);
}

TEST(ConfusionTest, PerfectPredictionIsDiagonal) {
  Rng rng(1);
  const LabelMap l = random_label(6, 6, 4, rng);
  const ConfusionMatrix m = accumulate_confusion(l, l, 4, kDefaultIgnoreId);
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b)
      if (a != b) {
        EXPECT_EQ(m.at(a, b), 0u);
      }
  EXPECT_EQ(m.total(), 36u);
}

TEST(ConfusionTest, IgnoredPixelsAreSkipped) {
  const LabelMap truth = label_from(1, 3, {kDefaultIgnoreId, kDefaultIgnoreId, kDefaultIgnoreId});
  EXPECT_EQ(accumulate_confusion(label_from(1, 3, {0, 1, 0}), truth, 2, kDefaultIgnoreId).total(), 0u);
}

TEST(ConfusionTest, RejectsBadInputs) {
  ConfusionMatrix m(2);
  EXPECT_THROW(m.add(label_from(1, 2, {0, 1}), label_from(2, 1, {0, 1}), kDefaultIgnoreId),
               ShapeMismatch);
  EXPECT_THROW(m.add(label_from(1, 2, {0, 5}), label_from(1, 2, {0, 1}), kDefaultIgnoreId),
               InvalidArgument);
  ConfusionMatrix other(3);
  EXPECT_THROW(m.merge(other), ShapeMismatch);
}

TEST(ConfusionTest, MergeIsOrderIndependent) {
  Rng rng(2);
  std::vector<std::pair<LabelMap, LabelMap>> shards;
  for (int i = 0; i < 6; ++i) {
    shards.emplace_back(random_label(5, 5, 3, rng), random_label(5, 5, 3, rng, 0.2));
  }
  ConfusionMatrix forward(3), shuffled(3);
  for (const auto& [p, t] : shards) forward.add(p, t, kDefaultIgnoreId);
  std::mt19937 gen(5);
  std::shuffle(shards.begin(), shards.end(), gen);
  for (const auto& [p, t] : shards) shuffled.merge(accumulate_confusion(p, t, 3, kDefaultIgnoreId));
  EXPECT_EQ(forward, shuffled);
}

TEST(MiouTest, HandExample) {
  const MiouResult r = miou(two_by_two(), {0, 1});
  EXPECT_DOUBLE_EQ(r.per_class.at(0), 0.5);
  EXPECT_DOUBLE_EQ(r.per_class.at(1), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(r.miou, 7.0 / 12.0);
  EXPECT_DOUBLE_EQ(miou(two_by_two(), {1}).miou, 2.0 / 3.0);
}

TEST(MiouTest, DiagonalIsOne) {
  Rng rng(3);
  const LabelMap l = random_label(4, 4, 3, rng);
  EXPECT_DOUBLE_EQ(miou(accumulate_confusion(l, l, 3, kDefaultIgnoreId), {0, 1, 2}).miou, 1.0);
}

TEST(MiouTest, AbsentClassesAreExcluded) {
  const ConfusionMatrix m =
      accumulate_confusion(label_from(1, 2, {0, 1}), label_from(1, 2, {0, 1}), 3, kDefaultIgnoreId);
  const MiouResult r = miou(m, {0, 1, 2});
  EXPECT_DOUBLE_EQ(r.miou, 1.0);
  EXPECT_EQ(r.excluded, (std::vector<ClassId>{2}));
  EXPECT_THROW(miou(m, {2}), UndefinedMetric);
  EXPECT_THROW(miou(ConfusionMatrix(2), {0, 1}), UndefinedMetric);
  EXPECT_THROW(miou(m, {4}), InvalidArgument);
}

TEST(MiouTest, MatchesBruteForceOnRandomInstances) {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const int h = 1 + static_cast<int>(rng.below(8));
    const int w = 1 + static_cast<int>(rng.below(8));
    const int c = 2 + static_cast<int>(rng.below(4));
    const LabelMap pred = random_label(h, w, c, rng);
    const LabelMap truth = random_label(h, w, c, rng, 0.1);
    double sum = 0.0;
    int counted = 0;
    for (int k = 0; k < c; ++k) {
      int inter = 0, uni = 0;
      for (int i = 0; i < h * w; ++i) {
        if (truth.values()[i] == kDefaultIgnoreId) continue;
        const bool p = pred.values()[i] == k, t = truth.values()[i] == k;
        inter += (p && t);
        uni += (p || t);
      }
      if (uni > 0) {
        sum += static_cast<double>(inter) / uni;
        ++counted;
      }
    }
    ClassSet all;
    for (int k = 0; k < c; ++k) all.insert(k);
    EXPECT_EQ(miou(accumulate_confusion(pred, truth, c, kDefaultIgnoreId), all).miou, sum / counted);
  }
}

TEST(MiouTest, AllClassIsMeanOfPerClass) {
  Rng rng(5);
  const ConfusionMatrix m =
      accumulate_confusion(random_label(8, 8, 5, rng), random_label(8, 8, 5, rng), 5, kDefaultIgnoreId);
  const MiouResult r = miou(m, {0, 1, 2, 3, 4});
  double sum = 0.0;
  for (const auto& [c, v] : r.per_class) sum += v;
  EXPECT_DOUBLE_EQ(r.miou, sum / r.per_class.size());
}

TEST(MiouTest, SubsetIgnoresOtherGroundTruth) {
  // Truth: class 0 on the left, class 2 on the right; the model says 0 everywhere.
  const ConfusionMatrix m =
      accumulate_confusion(label_from(1, 4, {0, 0, 0, 0}), label_from(1, 4, {0, 0, 2, 2}), 3,
                           kDefaultIgnoreId);
  EXPECT_DOUBLE_EQ(miou(m, {0}).miou, 0.5);
  EXPECT_DOUBLE_EQ(subset_miou(m, {0}).miou, 1.0);
  const ConfusionMatrix r = m.restricted_to_truth({0});
  EXPECT_EQ(r.at(2, 0), 0u);
  EXPECT_EQ(r.at(0, 0), 2u);
}

ResultsMatrix three_task_results() {
  ResultsMatrix r;
  r.method = "FT";
  r.protocol = "class-incremental";
  r.config_fingerprint = "00000000deadbeef";
  r.task_tags = {"S1", "S2", "S3"};
  r.task_classes = {{0, 1}, {2}, {3, 4}};
  r.learned_at = {0, 1, 2};
  r.miou = {{0.581, std::nullopt, std::nullopt}, {0.3, 0.7, std::nullopt}, {0.120, 0.2, 0.65}};
  r.per_class_iou = {{{{0, 0.5}, {1, 0.662}}, {}, {}},
                     {{{0, 0.3}, {1, 0.3}}, {{2, 0.7}}, {}},
                     {{{0, 0.1}, {1, 0.14}}, {{2, 0.2}}, {{3, 0.6}, {4, 0.7}}}};
  r.final_all_class_miou = 0.348;
  r.final_per_class_iou = {{0, 0.1}, {1, 0.14}, {2, 0.2}, {3, 0.6}, {4, 0.7}};
  return r;
}

TEST(ResultsTest, JsonRoundTrip) {
  ResultsMatrix r = three_task_results();
  r.final_excluded_classes = {7};
  const std::string text = results_to_json(r);
  EXPECT_EQ(results_from_json(text), r);
  EXPECT_EQ(results_to_json(results_from_json(text)), text);
}

TEST(ResultsTest, JsonRejectsGarbage) {
  EXPECT_THROW(results_from_json("not json"), IoError);
  EXPECT_THROW(results_from_json("{\"schema\": \"other/1\"}"), IoError);
}

TEST(ReportTest, ForgettingIsDropFromLearnedScore) {
  const Report rep = build_report(three_task_results());
  ASSERT_EQ(rep.forgetting.size(), 3u);
  EXPECT_NEAR(rep.forgetting[0], 0.461, 1e-12);
  EXPECT_NEAR(rep.forgetting[1], 0.5, 1e-12);
  EXPECT_EQ(rep.forgetting[2], 0.0);
  EXPECT_NEAR(*rep.average_miou, (0.12 + 0.2 + 0.65) / 3, 1e-12);
  EXPECT_NE(rep.text.find("+46.1"), std::string::npos);
  EXPECT_NE(rep.text.find("after T1..T3"), std::string::npos);
  EXPECT_NE(rep.text.find("34.8"), std::string::npos);
}

TEST(ReportTest, SingleTaskHasZeroForgetting) {
  ResultsMatrix r;
  r.method = "FT";
  r.protocol = "class-incremental";
  r.task_tags = {"S1"};
  r.task_classes = {{0}};
  r.learned_at = {0};
  r.miou = {{0.5}};
  r.per_class_iou = {{{}}};
  const Report rep = build_report(r);
  EXPECT_EQ(rep.forgetting, (std::vector<double>{0.0}));
}

ResultsMatrix domain_results(const std::string& method, double a, double b) {
  ResultsMatrix r;
  r.method = method;
  r.protocol = "domain-incremental";
  r.task_tags = {"cityscapes", "bdd"};
  r.task_classes = {{0}, {0}};
  r.learned_at = {0, 1};
  r.miou = {{a, std::nullopt}, {a, b}};
  r.per_class_iou = {{{}, {}}, {{}, {}}};
  return r;
}

// A 2-class matrix whose class-0 IoU is tp / 1000.
ConfusionMatrix iou_matrix(int tp) {
  ConfusionMatrix m(2);
  m.add(label_from(1, 1000, std::vector<int>(1000, 0)),
        [&] {
          std::vector<int> t(1000, 0);
          std::fill(t.begin() + tp, t.end(), 1);
          return label_from(1, 1000, t);
        }(),
        kDefaultIgnoreId);
  return m;
}

TEST(ReportTest, DomainAverageFromStoredMatrices) {
  const double first = miou(iou_matrix(428), {0}).miou;
  const double second = miou(iou_matrix(692), {0}).miou;
  EXPECT_DOUBLE_EQ(first, 0.428);
  const Report rep = build_report(domain_results("Replay", first, second));
  EXPECT_NEAR(*rep.average_miou, 0.56, 1e-12);
  EXPECT_NE(rep.text.find("mIoU average (final row): 56.0"), std::string::npos);
}

TEST(ReportTest, ReportsAreDeterministic) {
  const ResultsMatrix r = three_task_results();
  EXPECT_EQ(build_report(r).text, build_report(r).text);
  EXPECT_EQ(build_report(r).csv, build_report(r).csv);
  EXPECT_EQ(forgetting_svg(r), forgetting_svg(r));
  EXPECT_EQ(comparison_table({r, r}), comparison_table({r, r}));
}

TEST(ReportTest, IncompleteMatrixIsRejected) {
  ResultsMatrix r = three_task_results();
  r.miou.back().pop_back();
  EXPECT_THROW(build_report(r), InvalidArgument);
}

TEST(ComparisonTest, MarksBestAndSecond) {
  const std::string table = comparison_table(
      {domain_results("FT", 0.4, 0.7), domain_results("Replay", 0.43, 0.69), domain_results("L2", 0.5, 0.4)});
  EXPECT_NE(table.find("50.0*"), std::string::npos);
  EXPECT_NE(table.find("43.0^"), std::string::npos);
  EXPECT_NE(table.find("70.0*"), std::string::npos);
  EXPECT_NE(table.find("69.0^"), std::string::npos);
  EXPECT_NE(table.find("56.0*"), std::string::npos);  // Replay average
  EXPECT_NE(table.find("average"), std::string::npos);
}

TEST(ComparisonTest, ClassIncrementalColumns) {
  const std::string table = comparison_table({three_task_results()});
  EXPECT_NE(table.find("T1..2 S1"), std::string::npos);
  EXPECT_NE(table.find("T1..3 S3"), std::string::npos);
  EXPECT_NE(table.find("all classes"), std::string::npos);
}

TEST(ComparisonTest, RejectsMixedProtocols) {
  EXPECT_THROW(comparison_table({three_task_results(), domain_results("FT", 0.1, 0.2)}),
               InvalidArgument);
  EXPECT_THROW(comparison_table({}), InvalidArgument);
}

TEST(EvaluateTest, ModelConfusionCountsEveryLabeledPixel) {
  Rng rng(6);
  SegModel model(testing::tiny_capacity(), 1);
  model.add_decoder_head({0, 1, 2});
  std::vector<LabeledSample> samples;
  for (int i = 0; i < 3; ++i) samples.push_back(testing::random_sample(8, 8, 3, rng, std::to_string(i)));
  samples.push_back(testing::random_sample(16, 8, 3, rng, "tall"));
  const ConfusionMatrix m = evaluate_confusion(model, samples, 3, 2);
  EXPECT_EQ(m.total(), 3u * 64 + 128);
  std::vector<LabeledSample> reversed(samples.rbegin(), samples.rend());
  EXPECT_EQ(evaluate_confusion(model, reversed, 3, 3), m);
}

}  // namespace
}  // namespace cseg
