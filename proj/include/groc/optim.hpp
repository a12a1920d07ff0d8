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

#ifndef GROC_OPTIM_HPP
#define GROC_OPTIM_HPP

#include <cstdint>
#include <map>
#include <string>
#include <unordered_set>
#include <vector>

#include "groc/param_store.hpp"

namespace groc {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First/second moments for one parameter. `steps` counts the updates this
/// parameter actually received, which drives its bias correction.
struct AdamMoments {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t steps = 0;
};

struct AdamState {
  AdamConfig config;
  std::uint64_t step = 0;
  std::map<std::string, AdamMoments> moments;
};

/// L2 norm over every parameter gradient (missing grads count as zero).
double global_grad_norm(const ParamStore& params);

/// Rescales all grads so the global norm is at most max_norm. Returns the
/// norm measured before clipping.
double clip_grad_norm(ParamStore& params, double max_norm);

/// One Adam update over every parameter not listed in `frozen`, then zeroes
/// all grads. Frozen parameters and their moments are left untouched.
void adam_step(ParamStore& params, AdamState& state,
               const std::unordered_set<std::string>& frozen = {});

}  // namespace groc

#endif  // GROC_OPTIM_HPP
