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

#include "groc/adaptation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "groc/errors.hpp"

namespace groc {

CacheKind parse_cache_kind(std::string_view name) {
  if (name == "none") return CacheKind::none;
  if (name == "unigram") return CacheKind::unigram;
  if (name == "neural") return CacheKind::neural;
  throw InputError("unknown cache kind '" + std::string(name) + "'");
}

std::string_view cache_kind_name(CacheKind kind) {
  switch (kind) {
    case CacheKind::unigram: return "unigram";
    case CacheKind::neural: return "neural";
    default: return "none";
  }
}

void CacheConfig::validate() const {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw InputError("cache: lambda must lie in [0, 1]");
  if (!(theta >= 0.0) || !std::isfinite(theta)) throw InputError("cache: theta must be >= 0");
  if (capacity == 0) throw InputError("cache: capacity must be at least 1");
  if (!(dw > 0.0 && dw <= 1.0)) throw InputError("cache: dw must lie in (0, 1]");
}

nlohmann::json to_json(const CacheConfig& c) {
  return {{"lambda", c.lambda},
          {"theta", c.theta},
          {"capacity", c.capacity},
          {"dw", c.dw},
          {"downweight_without_cache", c.downweight_without_cache}};
}

CacheState::CacheState(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ContractError("cache: capacity must be at least 1");
}

void CacheState::observe(TokenId token, std::span<const double> hidden) {
  ++counts_[token];
  ++total_;
  if (hidden.empty()) return;
  if (!entries_.empty() && entries_.front().hidden.size() != hidden.size()) {
    throw DimensionError("cache: hidden size " + std::to_string(hidden.size()) + " differs from " +
                         std::to_string(entries_.front().hidden.size()));
  }
  if (entries_.size() == capacity_) entries_.pop_front();
  entries_.push_back({{hidden.begin(), hidden.end()}, token});
}

std::uint64_t CacheState::count(TokenId token) const {
  auto it = counts_.find(token);
  return it == counts_.end() ? 0 : it->second;
}

namespace {

std::vector<double> uniform(std::size_t n) {
  if (n == 0) throw ContractError("cache: empty support");
  return std::vector<double>(n, 1.0 / static_cast<double>(n));
}

void check_token(TokenId token, std::size_t vocab_size) {
  if (token >= vocab_size) {
    throw ContractError("cache: token id " + std::to_string(token) + " outside a support of " +
                        std::to_string(vocab_size));
  }
}

}  // namespace

std::vector<double> unigram_cache_prob(const CacheState& state, std::size_t vocab_size) {
  if (state.empty()) return uniform(vocab_size);
  std::vector<double> p(vocab_size, 0.0);
  const double total = static_cast<double>(state.total());
  for (TokenId w = 0; w < vocab_size; ++w) {
    if (auto c = state.count(w)) p[w] = static_cast<double>(c) / total;
  }
  return p;
}

std::vector<double> neural_cache_prob(const CacheState& state, std::span<const double> query,
                                      double theta, std::size_t vocab_size) {
  const auto& entries = state.entries();
  if (entries.empty()) return uniform(vocab_size);
  std::vector<double> scores(entries.size());
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& h = entries[i].hidden;
    if (h.size() != query.size()) {
      throw DimensionError("neural cache: query size " + std::to_string(query.size()) +
                           " differs from cached size " + std::to_string(h.size()));
    }
    check_token(entries[i].token, vocab_size);
    double dot = 0.0;
    for (std::size_t j = 0; j < h.size(); ++j) dot += h[j] * query[j];
    scores[i] = theta * dot;
    mx = std::max(mx, scores[i]);
  }
  std::vector<double> p(vocab_size, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const double w = std::exp(scores[i] - mx);
    p[entries[i].token] += w;
    total += w;
  }
  for (double& v : p) v /= total;
  return p;
}

std::vector<double> interpolate(std::span<const double> p_model, std::span<const double> p_cache,
                                double lambda) {
  if (p_model.size() != p_cache.size()) {
    throw ContractError("interpolate: supports differ (" + std::to_string(p_model.size()) + " vs " +
                        std::to_string(p_cache.size()) + ")");
  }
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ContractError("interpolate: lambda outside [0, 1]");
  std::vector<double> out(p_model.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = lambda * p_model[i] + (1.0 - lambda) * p_cache[i];
  }
  return out;
}

std::vector<double> downweight_unseen(std::span<const double> p, const std::vector<bool>& unseen,
                                      double dw) {
  if (unseen.size() != p.size()) {
    throw ContractError("downweight_unseen: mask covers " + std::to_string(unseen.size()) +
                        " words, distribution " + std::to_string(p.size()));
  }
  std::vector<double> out(p.begin(), p.end());
  double total = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (unseen[i]) out[i] *= dw;
    total += out[i];
  }
  if (!(total > 0.0)) throw NumericError("downweight_unseen: distribution has no mass");
  for (double& v : out) v /= total;
  return out;
}

std::vector<double> uniform_smooth(std::span<const double> p, double eps) {
  if (!(eps >= 0.0 && eps <= 1.0)) throw ContractError("uniform_smooth: eps outside [0, 1]");
  if (p.empty()) throw ContractError("uniform_smooth: empty support");
  if (eps == 0.0) return {p.begin(), p.end()};
  const double floor = eps / static_cast<double>(p.size());
  std::vector<double> out(p.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (1.0 - eps) * p[i] + floor;
  return out;
}

}  // namespace groc
