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

#ifndef GROC_TESTS_BRUTE_SCORER_HPP
#define GROC_TESTS_BRUTE_SCORER_HPP

#include <cmath>
#include <limits>
#include <vector>

#include "groc/adaptation.hpp"
#include "groc/evaluation.hpp"
#include "groc/model.hpp"

namespace groc::testing {

// Scores a stream one token at a time: a one-step LSTM call per position and
// an explicit softmax per distribution. Shares no code with the windowed
// evaluator beyond the model primitives and the adaptation functions.
inline std::vector<double> brute_force_losses(const LanguageModel& model, const TokenStream& stream,
                                              const Vocabulary& vocab, const EvalOptions& opt = {}) {
  NoGradGuard no_grad;
  const std::size_t v = vocab.size();
  const std::size_t support = model.support_size(vocab);
  std::vector<std::string> words(vocab.tokens().begin(), vocab.tokens().begin() + support);
  const Tensor e_in = model.input_matrix(words);
  const OutputLayer out = model.output_layer(e_in, nullptr);
  std::vector<bool> unseen(v);
  bool any_unseen = false;
  for (TokenId id = 0; id < v; ++id) any_unseen |= unseen[id] = vocab.freq(id) == 0;
  const bool downweight =
      any_unseen && (opt.cache != CacheKind::none || opt.cache_config.downweight_without_cache);

  CacheState cache(opt.cache_config.capacity);
  LstmState state = model.initial_state(1);
  std::vector<double> losses;
  for (std::size_t t = 0; t + 1 < stream.size(); ++t) {
    const TokenId in = stream.ids[t], target = stream.ids[t + 1];
    std::vector<std::string> word{vocab.token_of(in)};
    auto pre = model.prefix_forward(model.input_matrix(word), 1, state, nullptr);
    state = pre.state;
    auto q = pre.query.data();
    auto dist = next_word_distribution(q, out.embeddings, out.bias.data());
    std::vector<double> p(v, 0.0);
    std::copy(dist.begin(), dist.end(), p.begin());
    if (opt.smooth) p = uniform_smooth(p, opt.uniform_eps);
    if (downweight) p = downweight_unseen(p, unseen, opt.cache_config.dw);
    std::vector<double> h(pre.hidden.data().begin(), pre.hidden.data().end());
    if (opt.cache == CacheKind::unigram && !cache.empty()) {
      p = interpolate(p, unigram_cache_prob(cache, v), opt.cache_config.lambda);
    } else if (opt.cache == CacheKind::neural && !cache.entries().empty()) {
      p = interpolate(p, neural_cache_prob(cache, h, opt.cache_config.theta, v), opt.cache_config.lambda);
    }
    if (opt.cache != CacheKind::none) cache.observe(target, h);
    losses.push_back(p[target] > 0 ? -std::log(p[target]) : std::numeric_limits<double>::infinity());
  }
  return losses;
}

}  // namespace groc::testing

#endif  // GROC_TESTS_BRUTE_SCORER_HPP
