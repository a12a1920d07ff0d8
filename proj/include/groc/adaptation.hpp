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

#ifndef GROC_ADAPTATION_HPP
#define GROC_ADAPTATION_HPP

#include <cstdint>
#include <deque>
#include <span>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "groc/corpus.hpp"
#include "json.hpp"

// Evaluation-time adaptation. Nothing here touches model parameters.
namespace groc {

enum class CacheKind { none, unigram, neural };

CacheKind parse_cache_kind(std::string_view name);
std::string_view cache_kind_name(CacheKind kind);

struct CacheConfig {
  double lambda = 0.966;  // weight on the model distribution
  double theta = 0.5;     // flatness of the neural cache
  std::size_t capacity = 10000;
  double dw = 0.1;  // multiplier on training-unseen words
  // Downweighting normally runs only in front of a cache; this forces it on
  // for cache-free evaluation too.
  bool downweight_without_cache = false;

  void validate() const;
};

nlohmann::json to_json(const CacheConfig& config);

/// Sequential per-stream cache: a bounded FIFO of (hidden, next token) pairs
/// and windowless counts of every token observed.
class CacheState {
 public:
  struct Entry {
    std::vector<double> hidden;
    TokenId token;
  };

  explicit CacheState(std::size_t capacity = 10000);

  /// Records `token` as the word that followed `hidden`. An empty `hidden`
  /// only updates the unigram counts.
  void observe(TokenId token, std::span<const double> hidden = {});

  bool empty() const { return total_ == 0; }
  std::size_t capacity() const { return capacity_; }
  const std::deque<Entry>& entries() const { return entries_; }
  std::uint64_t count(TokenId token) const;
  std::uint64_t total() const { return total_; }

 private:
  std::size_t capacity_;
  std::deque<Entry> entries_;
  std::unordered_map<TokenId, std::uint64_t> counts_;
  std::uint64_t total_ = 0;
};

/// count(w) / total over `vocab_size` words; uniform before any observation.
std::vector<double> unigram_cache_prob(const CacheState& state, std::size_t vocab_size);

/// p(w) proportional to the sum of exp(theta * <query, h_i>) over cached
/// entries with token w. Uniform when the FIFO is empty.
std::vector<double> neural_cache_prob(const CacheState& state, std::span<const double> query,
                                      double theta, std::size_t vocab_size);

/// lambda * p_model + (1 - lambda) * p_cache.
std::vector<double> interpolate(std::span<const double> p_model, std::span<const double> p_cache,
                                double lambda);

/// Multiplies entries flagged `unseen` by dw and renormalizes.
std::vector<double> downweight_unseen(std::span<const double> p, const std::vector<bool>& unseen,
                                      double dw);

/// (1 - eps) * p + eps / |p|.
std::vector<double> uniform_smooth(std::span<const double> p, double eps);

}  // namespace groc

#endif  // GROC_ADAPTATION_HPP
