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
#include "cseg/losses.h"

#include <gtest/gtest.h>

#include <cmath>

#include "test_util.h"

namespace cseg {
namespace {

using testing::label_from;
using testing::random_label;
using testing::random_posteriors;
using testing::random_tensor;

Posteriors make_posteriors(int h, int w, const std::vector<std::vector<double>>& per_pixel) {
  const int c = static_cast<int>(per_pixel[0].size());
  Posteriors p;
  p.probs = Tensor(1, c, h, w);
  for (int i = 0; i < h * w; ++i)
    for (int k = 0; k < c; ++k) p.probs.sample(0)[k * h * w + i] = per_pixel[i][k];
  for (int k = 0; k < c; ++k) p.classes.push_back(k);
  return p;
}

TEST(LossesTest, CrossEntropyHandExample) {
  const Posteriors p = make_posteriors(1, 2, {{0.9, 0.1}, {0.3, 0.7}});
  const LossValue ce = cross_entropy(p, {label_from(1, 2, {0, 1})}, kDefaultIgnoreId);
  EXPECT_NEAR(ce.value, -0.5 * (std::log(0.9) + std::log(0.7)), 1e-12);
  EXPECT_NEAR(ce.value, 0.2310, 1e-4);
  EXPECT_EQ(ce.pixels, 2u);
}

TEST(LossesTest, CrossEntropyOneHotIsZero) {
  const Posteriors p = make_posteriors(1, 2, {{1.0, 0.0}, {0.0, 1.0}});
  EXPECT_DOUBLE_EQ(cross_entropy(p, {label_from(1, 2, {0, 1})}, kDefaultIgnoreId).value, 0.0);
}

TEST(LossesTest, CrossEntropyUniformIsLogC) {
  Rng rng(3);
  const Posteriors p = softmax(Tensor(2, 4, 3, 3), {0, 1, 2, 3});
  const LossValue ce = cross_entropy(p, {random_label(3, 3, 4, rng), random_label(3, 3, 4, rng)},
                                     kDefaultIgnoreId);
  EXPECT_NEAR(ce.value, std::log(4.0), 1e-12);
}

TEST(LossesTest, CrossEntropyIgnoresPixels) {
  const Posteriors p = make_posteriors(1, 3, {{0.9, 0.1}, {0.3, 0.7}, {0.01, 0.99}});
  const LossValue ce = cross_entropy(p, {label_from(1, 3, {0, 1, kDefaultIgnoreId})}, kDefaultIgnoreId);
  EXPECT_NEAR(ce.value, 0.2310, 1e-4);
  EXPECT_EQ(ce.pixels, 2u);
}

TEST(LossesTest, CrossEntropyAllIgnoredIsDegenerateZero) {
  const Posteriors p = make_posteriors(1, 2, {{0.9, 0.1}, {0.3, 0.7}});
  const LossValue ce =
      cross_entropy(p, {label_from(1, 2, {kDefaultIgnoreId, kDefaultIgnoreId})}, kDefaultIgnoreId);
  EXPECT_EQ(ce.value, 0.0);
  EXPECT_TRUE(ce.degenerate);
}

TEST(LossesTest, CrossEntropyNonnegativeOnRandomInputs) {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const Posteriors p = random_posteriors(2, 3, 4, 4, rng);
    const LossValue ce = cross_entropy(
        p, {random_label(4, 4, 3, rng, 0.2), random_label(4, 4, 3, rng, 0.2)}, kDefaultIgnoreId);
    EXPECT_GE(ce.value, 0.0);
    EXPECT_TRUE(std::isfinite(ce.value));
  }
}

TEST(LossesTest, CrossEntropyRejectsBadShapes) {
  Rng rng(1);
  const Posteriors p = random_posteriors(1, 3, 4, 4, rng);
  EXPECT_THROW(cross_entropy(p, {}, kDefaultIgnoreId), ShapeMismatch);
  EXPECT_THROW(cross_entropy(p, {random_label(3, 4, 3, rng)}, kDefaultIgnoreId), ShapeMismatch);
  Tensor wrong(1, 2, 4, 4);
  EXPECT_THROW(cross_entropy(p, {random_label(4, 4, 3, rng)}, kDefaultIgnoreId, &wrong),
               ShapeMismatch);
  EXPECT_THROW(cross_entropy(p, {random_label(4, 4, 5, rng)}, kDefaultIgnoreId, nullptr),
               InvalidArgument);
}

TEST(LossesTest, WeightedCrossEntropyScalesPerClass) {
  const Posteriors p = make_posteriors(1, 2, {{0.9, 0.1}, {0.3, 0.7}});
  const std::vector<double> w = {2.0, 0.5};
  const LossValue ce =
      weighted_cross_entropy(p, {label_from(1, 2, {0, 1})}, kDefaultIgnoreId, w);
  EXPECT_NEAR(ce.value, -0.5 * (2.0 * std::log(0.9) + 0.5 * std::log(0.7)), 1e-12);
  const std::vector<double> bad = {1.0, 0.0};
  EXPECT_THROW(weighted_cross_entropy(p, {label_from(1, 2, {0, 1})}, kDefaultIgnoreId, bad),
               InvalidArgument);
}

TEST(LossesTest, DistillationHandExample) {
  const Posteriors student = make_posteriors(1, 1, {{0.5, 0.5}});
  const Posteriors teacher = make_posteriors(1, 1, {{0.6, 0.4}});
  const LossValue kd = distillation_loss(student, teacher, {0, 1}, nullptr);
  EXPECT_NEAR(kd.value, std::log(2.0), 1e-12);
}

TEST(LossesTest, DistillationOneHotIdentityIsZero) {
  const Posteriors p = make_posteriors(1, 2, {{1.0, 0.0}, {0.0, 1.0}});
  EXPECT_DOUBLE_EQ(distillation_loss(p, p, {0, 1}, nullptr).value, 0.0);
}

TEST(LossesTest, DistillationSelfIsTeacherEntropy) {
  Rng rng(9);
  const Posteriors p = random_posteriors(2, 3, 3, 3, rng);
  const ClassSet subset = {0, 2};
  double entropy = 0.0;
  const int plane = 9;
  for (int n = 0; n < 2; ++n)
    for (int i = 0; i < plane; ++i)
      for (int c : subset) {
        const double q = p.probs.sample(n)[c * plane + i];
        entropy -= q * std::log(q);
      }
  EXPECT_NEAR(distillation_loss(p, p, subset, nullptr).value, entropy / (2 * plane), 1e-12);
}

TEST(LossesTest, DistillationMaskRestrictsPixels) {
  const Posteriors student = make_posteriors(1, 2, {{0.5, 0.5}, {0.9, 0.1}});
  const Posteriors teacher = make_posteriors(1, 2, {{0.6, 0.4}, {0.2, 0.8}});
  const PixelMask first = {1, 0};
  EXPECT_NEAR(distillation_loss(student, teacher, {0, 1}, &first).value, std::log(2.0), 1e-12);
  const PixelMask none = {0, 0};
  const LossValue empty = distillation_loss(student, teacher, {0, 1}, &none);
  EXPECT_EQ(empty.value, 0.0);
  EXPECT_TRUE(empty.degenerate);
  const PixelMask short_mask = {1};
  EXPECT_THROW(distillation_loss(student, teacher, {0, 1}, &short_mask), ShapeMismatch);
}

TEST(LossesTest, DistillationMatchesClassesByIdAcrossLayouts) {
  // Teacher knows {0, 1}; student has an extra head for class 2.
  Posteriors teacher = make_posteriors(1, 1, {{0.6, 0.4}});
  Posteriors student = make_posteriors(1, 1, {{0.25, 0.25, 0.5}});
  EXPECT_NEAR(distillation_loss(student, teacher, {0, 1}, nullptr).value, -std::log(0.25), 1e-12);
  EXPECT_THROW(distillation_loss(student, teacher, {0, 2}, nullptr), InvalidArgument);
  Posteriors misaligned = make_posteriors(1, 2, {{0.5, 0.5}, {0.5, 0.5}});
  EXPECT_THROW(distillation_loss(misaligned, teacher, {0, 1}, nullptr), ShapeMismatch);
}

TEST(LossesTest, LwfCombinesComponents) {
  const Posteriors student = make_posteriors(1, 2, {{0.9, 0.1}, {0.3, 0.7}});
  const Posteriors teacher = make_posteriors(1, 2, {{0.6, 0.4}, {0.6, 0.4}});
  LossConfig config;
  config.distill_class_set = {0, 1};
  const LabelBatch labels = {label_from(1, 2, {0, 1})};
  for (double lambda : {0.0, 1.0, 2.5}) {
    config.lambda = lambda;
    const CompositeLoss l = lwf_loss(student, labels, teacher, config, kDefaultIgnoreId);
    EXPECT_NEAR(l.total, l.ce.value + lambda * l.kd.value, 1e-12);
    EXPECT_NEAR(l.ce.value, cross_entropy(student, labels, kDefaultIgnoreId).value, 1e-15);
  }
  config.lambda = 0.0;
  EXPECT_EQ(lwf_loss(student, labels, teacher, config, kDefaultIgnoreId).total,
            cross_entropy(student, labels, kDefaultIgnoreId).value);
}

TEST(LossesTest, LwfSumsHandExamples) {
  // 0.2310 from the cross-entropy example plus ln 2 from the distillation one.
  const Posteriors ce_student = make_posteriors(1, 2, {{0.9, 0.1}, {0.3, 0.7}});
  const double ce = cross_entropy(ce_student, {label_from(1, 2, {0, 1})}, kDefaultIgnoreId).value;
  const double kd = distillation_loss(make_posteriors(1, 1, {{0.5, 0.5}}),
                                      make_posteriors(1, 1, {{0.6, 0.4}}), {0, 1}, nullptr)
                        .value;
  EXPECT_NEAR(ce + 1.0 * kd, 0.9241, 1e-4);
}

TEST(LossesTest, LwfRejectsNegativeLambda) {
  const Posteriors p = make_posteriors(1, 1, {{0.5, 0.5}});
  LossConfig config;
  config.lambda = -1.0;
  config.distill_class_set = {0};
  EXPECT_THROW(lwf_loss(p, {label_from(1, 1, {0})}, p, config, kDefaultIgnoreId), InvalidArgument);
}

TEST(LossesTest, CilDistillsOnlyUnlabeledPixels) {
  const Posteriors student = make_posteriors(1, 2, {{0.5, 0.5}, {0.9, 0.1}});
  const Posteriors teacher = make_posteriors(1, 2, {{0.6, 0.4}, {0.2, 0.8}});
  LossConfig config;
  config.distill_class_set = {0, 1};
  const LabelBatch labels = {label_from(1, 2, {kDefaultIgnoreId, 0})};
  const CompositeLoss l = cil_loss(student, labels, teacher, config, kDefaultIgnoreId);
  EXPECT_NEAR(l.kd.value, std::log(2.0), 1e-12);
  EXPECT_EQ(l.kd.pixels, 1u);
  EXPECT_NEAR(l.ce.value, -std::log(0.9), 1e-12);
}

TEST(LossesTest, CilFullyLabeledHasNoDistillation) {
  Rng rng(4);
  const Posteriors student = random_posteriors(1, 3, 4, 4, rng);
  const Posteriors teacher = random_posteriors(1, 3, 4, 4, rng);
  LossConfig config;
  config.lambda = 7.0;
  config.distill_class_set = {0, 1, 2};
  const CompositeLoss l =
      cil_loss(student, {random_label(4, 4, 3, rng)}, teacher, config, kDefaultIgnoreId);
  EXPECT_TRUE(l.kd.degenerate);
  EXPECT_EQ(l.total, l.ce.value);
}

TEST(LossesTest, CilClassWeightsFavorRareClasses) {
  Rng rng(2);
  std::vector<LabeledSample> samples(1);
  samples[0].label = label_from(2, 5, {0, 0, 0, 0, 0, 0, 0, 0, 1, kDefaultIgnoreId});
  const std::vector<double> w = cil_class_weights(samples, 3);
  ASSERT_EQ(w.size(), 3u);
  EXPECT_NEAR(w[0], std::clamp(1.0 / std::log(1.02 + 8.0 / 9.0), 0.5, 10.0), 1e-12);
  EXPECT_NEAR(w[1], 1.0 / std::log(1.02 + 1.0 / 9.0), 1e-12);
  EXPECT_EQ(w[2], 10.0);
  EXPECT_GT(w[1], w[0]);
  for (double v : w) EXPECT_GT(v, 0.0);
  samples[0].label.values()[0] = 7;
  EXPECT_THROW(cil_class_weights(samples, 3), InvalidArgument);
}

TEST(LossesTest, RegPenaltyHandExample) {
  ImportanceMap importance;
  importance.values = {1.0, 1.0};
  EXPECT_NEAR(reg_penalty(std::vector<double>{0.1, -0.2}, std::vector<double>{0.0, 0.0}, importance),
              0.05, 1e-15);
}

TEST(LossesTest, RegPenaltyProperties) {
  Rng rng(8);
  std::vector<double> theta(10), old(10);
  ImportanceMap importance;
  importance.values.resize(10);
  for (int i = 0; i < 10; ++i) {
    theta[i] = rng.normal();
    old[i] = rng.normal();
    importance.values[i] = rng.uniform();
  }
  EXPECT_EQ(reg_penalty(old, old, importance), 0.0);
  EXPECT_GE(reg_penalty(theta, old, importance), 0.0);
  ImportanceMap zeros = importance;
  std::fill(zeros.values.begin(), zeros.values.end(), 0.0);
  EXPECT_EQ(reg_penalty(theta, old, zeros), 0.0);
  // Doubling the importance doubles the penalty; the loss is linear in lambda.
  ImportanceMap doubled = importance;
  for (auto& v : doubled.values) v *= 2.0;
  EXPECT_NEAR(reg_penalty(theta, old, doubled), 2.0 * reg_penalty(theta, old, importance), 1e-12);
}

TEST(LossesTest, RegPenaltyGradientMatchesFiniteDifference) {
  Rng rng(12);
  std::vector<double> theta(6), old(6);
  ImportanceMap importance;
  importance.values.resize(6);
  for (int i = 0; i < 6; ++i) {
    theta[i] = rng.normal();
    old[i] = rng.normal();
    importance.values[i] = rng.uniform();
  }
  std::vector<double> grad(6, 0.0);
  reg_penalty_gradient(theta, old, importance, 3.0, grad);
  for (int i = 0; i < 6; ++i) {
    auto plus = theta, minus = theta;
    plus[i] += 1e-6;
    minus[i] -= 1e-6;
    const double fd = 3.0 * (reg_penalty(plus, old, importance) - reg_penalty(minus, old, importance)) / 2e-6;
    EXPECT_NEAR(grad[i], fd, 1e-6);
  }
}

TEST(LossesTest, RegPenaltyRejectsMisalignedInputs) {
  ImportanceMap importance;
  importance.values = {1.0};
  EXPECT_THROW(reg_penalty(std::vector<double>{0.1, 0.2}, std::vector<double>{0.0, 0.0}, importance),
               LayoutMismatch);
}

// Loss as a function of the logits, for finite differences.
template <typename F>
void check_logit_gradient(const Tensor& logits, const std::vector<ClassId>& classes, F loss) {
  Tensor grad(logits.batch(), logits.channels(), logits.height(), logits.width());
  loss(softmax(logits, classes), &grad);
  for (std::size_t i = 0; i < logits.size(); ++i) {
    Tensor plus = logits, minus = logits;
    plus.data()[i] += 1e-6;
    minus.data()[i] -= 1e-6;
    const double fd = (loss(softmax(plus, classes), nullptr) - loss(softmax(minus, classes), nullptr)) / 2e-6;
    EXPECT_NEAR(grad.data()[i], fd, 1e-6) << "coordinate " << i;
  }
}

TEST(LossesTest, LogitGradientsMatchFiniteDifferences) {
  Rng rng(21);
  const std::vector<ClassId> classes = {0, 1, 2};
  const Tensor logits = random_tensor(2, 3, 3, 3, rng, 1.5);
  const Posteriors teacher = random_posteriors(2, 2, 3, 3, rng);
  Posteriors teacher_ids = teacher;
  teacher_ids.classes = {0, 1};
  const LabelBatch labels = {random_label(3, 3, 3, rng, 0.3), random_label(3, 3, 3, rng, 0.3)};
  LossConfig config;
  config.lambda = 0.7;
  config.distill_class_set = {0, 1};
  config.cil_pixel_weights = {1.5, 0.6, 3.0};

  check_logit_gradient(logits, classes, [&](const Posteriors& p, Tensor* g) {
    return cross_entropy(p, labels, kDefaultIgnoreId, g).value;
  });
  check_logit_gradient(logits, classes, [&](const Posteriors& p, Tensor* g) {
    return distillation_loss(p, teacher_ids, config.distill_class_set, nullptr, g).value;
  });
  check_logit_gradient(logits, classes, [&](const Posteriors& p, Tensor* g) {
    return lwf_loss(p, labels, teacher_ids, config, kDefaultIgnoreId, g).total;
  });
  check_logit_gradient(logits, classes, [&](const Posteriors& p, Tensor* g) {
    return cil_loss(p, labels, teacher_ids, config, kDefaultIgnoreId, g).total;
  });
}

TEST(LossesTest, ValidateLossConfig) {
  LossConfig config;
  EXPECT_NO_THROW(validate_loss_config(config));
  config.cil_pixel_weights = {1.0, -0.5};
  EXPECT_THROW(validate_loss_config(config), InvalidArgument);
}

}  // namespace
}  // namespace cseg
