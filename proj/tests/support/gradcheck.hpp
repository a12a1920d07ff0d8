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

#ifndef GROC_TESTS_GRADCHECK_HPP
#define GROC_TESTS_GRADCHECK_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "groc/param_store.hpp"
#include "groc/tensor.hpp"

namespace groc::testing {

// Central differences of a scalar function with respect to every entry of
// `param`. The function is evaluated with history recording off.
inline std::vector<double> numeric_grad(const std::function<double()>& f, Tensor& param,
                                        double step = 1e-5) {
  NoGradGuard guard;
  auto data = param.mutable_data();
  std::vector<double> out(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double saved = data[i];
    data[i] = saved + step;
    const double up = f();
    data[i] = saved - step;
    const double down = f();
    data[i] = saved;
    out[i] = (up - down) / (2.0 * step);
  }
  return out;
}

// max_i |a_i - n_i| / max(|a_i|, |n_i|, floor)
inline double max_rel_error(std::span<const double> analytic, std::span<const double> numeric,
                            double floor = 1e-6) {
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric[i]), floor});
    worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / denom);
  }
  return worst;
}

inline Tensor random_tensor(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0,
                            bool requires_grad = true) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor::from(std::move(shape), std::move(v), requires_grad);
}

}  // namespace groc::testing

#endif  // GROC_TESTS_GRADCHECK_HPP
