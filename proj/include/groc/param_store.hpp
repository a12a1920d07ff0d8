// Copyright 2026 The groc-lm Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef GROC_PARAM_STORE_HPP
#define GROC_PARAM_STORE_HPP

#include <cstdint>
#include <random>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "groc/tensor.hpp"

namespace groc {

/// Seeded generator used for every random draw in the toolkit.
///
/// Bits come from std::mt19937_64, whose output sequence is fixed by the C++
/// standard. Conversions to doubles and ranges are done here rather than with
/// <random> distributions, which are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// True with probability p; p <= 0 never, p >= 1 always.
  bool bernoulli(double p) { return uniform() < p; }
  /// Unbiased integer in [0, n).
  std::size_t below(std::size_t n);

  std::string state() const;
  void set_state(const std::string& state);

 private:
  std::mt19937_64 engine_;
};

/// Named, ordered parameter tensors plus the generator that initialized them.
///
/// Registration order is iteration order and checkpoint order.
class ParamStore {
 public:
  explicit ParamStore(std::uint64_t seed = 0) : rng_(seed) {}

  /// Registers a parameter drawn uniformly from [-init_range, init_range],
  /// element by element in row-major order.
  Tensor& add(const std::string& name, Shape shape, double init_range);
  Tensor& add(const std::string& name, Tensor value);

  /// Swaps the tensor behind an existing name (e.g. a table grown for new words).
  void replace(const std::string& name, Tensor value);

  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;

  /// Total number of scalar parameters.
  std::size_t count() const;
  std::size_t size() const { return entries_.size(); }

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  void zero_grad();
  Rng& rng() { return rng_; }
  const Rng& rng() const { return rng_; }

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
  std::unordered_map<std::string, std::size_t> index_;
  Rng rng_;
};

}  // namespace groc

#endif  // GROC_PARAM_STORE_HPP
