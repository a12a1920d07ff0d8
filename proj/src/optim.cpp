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

#include "groc/optim.hpp"

#include <cmath>

#include "groc/errors.hpp"

namespace groc {

double global_grad_norm(const ParamStore& params) {
  double sq = 0.0;
  for (const auto& [name, t] : params) {
    for (double g : t.grad()) sq += g * g;
  }
  return std::sqrt(sq);
}

double clip_grad_norm(ParamStore& params, double max_norm) {
  const double norm = global_grad_norm(params);
  if (norm > max_norm && norm > 0.0) {
    const double factor = max_norm / norm;
    for (auto& [name, t] : params) {
      for (double& g : t.mutable_grad()) g *= factor;
    }
  }
  return norm;
}

void adam_step(ParamStore& params, AdamState& state, const std::unordered_set<std::string>& frozen) {
  const auto& cfg = state.config;
  ++state.step;
  for (auto& [name, t] : params) {
    if (frozen.count(name) != 0 || !t.has_grad()) continue;
    auto& mom = state.moments[name];
    if (mom.m.empty() && mom.steps == 0) {
      mom.m.assign(t.numel(), 0.0);
      mom.v.assign(t.numel(), 0.0);
    }
    if (mom.m.size() != t.numel() || mom.v.size() != t.numel()) {
      throw ContractError("adam_step: moment buffers for '" + name + "' hold " +
                          std::to_string(mom.m.size()) + " values, parameter has " +
                          std::to_string(t.numel()));
    }
    ++mom.steps;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(mom.steps));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(mom.steps));
    auto w = t.mutable_data();
    auto g = t.grad();
    for (std::size_t i = 0; i < w.size(); ++i) {
      mom.m[i] = cfg.beta1 * mom.m[i] + (1.0 - cfg.beta1) * g[i];
      mom.v[i] = cfg.beta2 * mom.v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double mhat = mom.m[i] / bc1;
      const double vhat = mom.v[i] / bc2;
      w[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
  params.zero_grad();
}

}  // namespace groc
