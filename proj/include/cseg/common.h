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
#ifndef CSEG_COMMON_H_
#define CSEG_COMMON_H_

#include <cstddef>
#include <cstdint>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cseg {

using ClassId = int;
using ClassSet = std::set<ClassId>;

inline constexpr int kDefaultIgnoreId = 255;

// Error hierarchy. The CLI maps each class onto a distinct exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class ShapeMismatch : public Error {
 public:
  using Error::Error;
};

// Two index-aligned collections (parameters, importance maps) disagree.
class LayoutMismatch : public Error {
 public:
  using Error::Error;
};

class InfeasibleSplit : public Error {
 public:
  InfeasibleSplit(const std::string& what, std::vector<ClassId> classes)
      : Error(what), classes_(std::move(classes)) {}
  const std::vector<ClassId>& classes() const { return classes_; }

 private:
  std::vector<ClassId> classes_;
};

class UndefinedMetric : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  ConfigError(const std::string& key, const std::string& what)
      : Error("config key '" + key + "': " + what), key_(key) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

class TrainingDiverged : public Error {
 public:
  using Error::Error;
};

// Deterministic generator with platform-independent derived distributions.
// std::*_distribution output is implementation-defined, so the helpers below
// are used everywhere a seed must reproduce bit-identical results.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : state_(seed) {}

  std::uint64_t next_u64();
  // Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);
  // Uniform integer in [lo, hi].
  int between(int lo, int hi);
  double normal();

  // Fisher-Yates.
  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  // Independent child stream; the parent advances by one draw.
  Rng fork() { return Rng(mix(next_u64())); }

  static std::uint64_t mix(std::uint64_t x);

 private:
  std::uint64_t state_;
};

// Seed derivation for named sub-streams (data, split, init, ...).
std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag);

// 64-bit FNV-1a, used for config fingerprints and golden hashes.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t h = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t value);

std::string format_class_set(const ClassSet& classes);

}  // namespace cseg

#endif  // CSEG_COMMON_H_
