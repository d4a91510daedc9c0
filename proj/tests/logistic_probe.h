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
#ifndef CSEG_TESTS_LOGISTIC_PROBE_H_
#define CSEG_TESTS_LOGISTIC_PROBE_H_

#include <cmath>
#include <vector>

#include "cseg/importance.h"

namespace cseg::testing {

// Two-class logistic regression on scalar inputs, shaped as 1×1 images:
// logits (0, w·x + b), parameters (w, b).
class LogisticProbe final : public GradientProbe {
 public:
  LogisticProbe(double w, double b, std::vector<double> xs) : w_(w), b_(b), xs_(std::move(xs)) {}

  std::size_t parameter_count() const override { return 2; }
  std::size_t sample_count() const override { return xs_.size(); }

  Posteriors evaluate(std::size_t i) override {
    last_ = i;
    Tensor logits(1, 2, 1, 1);
    logits.sample(0)[1] = w_ * xs_[i] + b_;
    return softmax(logits, {0, 1});
  }

  std::vector<double> gradient(const Tensor& grad_logits) override {
    const double g = grad_logits.sample(0)[1];
    return {g * xs_[last_], g};
  }

  double sigma(std::size_t i) const { return 1.0 / (1.0 + std::exp(-(w_ * xs_[i] + b_))); }

  // Squared norm of the posterior vector as a function of (w, b).
  double squared_norm(std::size_t i, double w, double b) const {
    const double s = 1.0 / (1.0 + std::exp(-(w * xs_[i] + b)));
    return s * s + (1.0 - s) * (1.0 - s);
  }

  double w() const { return w_; }
  double b() const { return b_; }
  const std::vector<double>& xs() const { return xs_; }

 private:
  double w_, b_;
  std::vector<double> xs_;
  std::size_t last_ = 0;
};

// Score-function Fisher with the model's own argmax label as target; ties
// at sigma = 0.5 go to class 0.
inline std::vector<double> logistic_fisher(const LogisticProbe& probe) {
  std::vector<double> out(2, 0.0);
  const double n = static_cast<double>(probe.xs().size());
  for (std::size_t i = 0; i < probe.xs().size(); ++i) {
    const double s = probe.sigma(i);
    const double y = s > 0.5 ? 1.0 : 0.0;
    const double r = s - y;
    out[0] += r * r * probe.xs()[i] * probe.xs()[i] / n;
    out[1] += r * r / n;
  }
  return out;
}

inline std::vector<double> logistic_mas_fd(const LogisticProbe& probe, double h = 1e-6) {
  std::vector<double> out(2, 0.0);
  const double n = static_cast<double>(probe.xs().size());
  for (std::size_t i = 0; i < probe.xs().size(); ++i) {
    const double dw = (probe.squared_norm(i, probe.w() + h, probe.b()) -
                       probe.squared_norm(i, probe.w() - h, probe.b())) / (2 * h);
    const double db = (probe.squared_norm(i, probe.w(), probe.b() + h) -
                       probe.squared_norm(i, probe.w(), probe.b() - h)) / (2 * h);
    out[0] += std::abs(dw) / n;
    out[1] += std::abs(db) / n;
  }
  return out;
}

}  // namespace cseg::testing

#endif  // CSEG_TESTS_LOGISTIC_PROBE_H_
