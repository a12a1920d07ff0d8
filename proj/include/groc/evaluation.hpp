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

#ifndef GROC_EVALUATION_HPP
#define GROC_EVALUATION_HPP

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "groc/adaptation.hpp"
#include "groc/corpus.hpp"
#include "groc/lexicon.hpp"
#include "groc/model.hpp"
#include "json.hpp"

namespace groc {

enum class VocabMode { closed, union_ };

VocabMode parse_vocab_mode(std::string_view name);
std::string_view vocab_mode_name(VocabMode mode);

struct EvalOptions {
  std::string corpus;
  VocabMode mode = VocabMode::closed;
  CacheKind cache = CacheKind::none;
  CacheConfig cache_config;
  bool smooth = false;  // mix in a uniform distribution over the whole support
  double uniform_eps = 1e-4;
  std::size_t bptt = 35;
};

struct EvalReport {
  std::string corpus;
  VocabMode mode = VocabMode::closed;
  std::size_t tokens = 0;  // scored targets
  double mean_nll = 0.0;   // +inf when some target had zero probability
  double perplexity = 0.0;
  double oov_percent = 0.0;
  std::size_t zero_prob_tokens = 0;
  std::optional<nlohmann::json> cache;
  std::vector<double> losses;  // per target; not serialized

  bool infinite() const { return zero_prob_tokens > 0; }
  /// Perplexity is null and "infinite" true when any target had zero mass.
  nlohmann::json to_json() const;
};

/// Scores every token after the first, carrying one lane of LSTM state
/// across windows of `bptt` steps. `vocab` is the evaluation vocabulary:
/// the model's own for closed evaluation, a union extending it otherwise.
///
/// Per token the model distribution is optionally uniform-smoothed, then
/// downweighted on words with zero training frequency (when a cache is used
/// or forced), then interpolated with the cache once the cache holds data.
EvalReport perplexity(const LanguageModel& model, const TokenStream& stream, const Vocabulary& vocab,
                      const EvalOptions& options = {});

/// Percentage of tokens absent from the training vocabulary.
double oov_percent(const Vocabulary& train, std::span<const std::string> tokens);

/// Target ids of a stream in scoring order (every id but the first).
std::span<const TokenId> targets_of(const TokenStream& stream);

/// Per-token loss sidecar: u64 count, then little-endian f64 values.
void write_losses(const std::filesystem::path& path, std::span<const double> losses);
std::vector<double> read_losses(const std::filesystem::path& path);

inline const std::vector<std::uint64_t> kDefaultBinEdges{0, 1, 51, 501, 5001};

struct BinStat {
  std::uint64_t lower = 0;
  std::optional<std::uint64_t> upper;  // inclusive; none for the last bin
  std::size_t words = 0;               // vocabulary types in the bin
  std::size_t tokens = 0;              // scored targets in the bin
  std::optional<double> median;        // none when the bin has no tokens
};

struct BinReport {
  std::vector<std::uint64_t> edges;
  std::vector<BinStat> bins;

  nlohmann::json to_json() const;
};

/// Median over targets of loss_a - loss_b, grouped by the training frequency
/// of each target under `vocab`. Both loss lists must come from the same stream.
BinReport median_loss_diff_by_bin(std::span<const double> loss_a, std::span<const double> loss_b,
                                  std::span<const TokenId> targets, const Vocabulary& vocab,
                                  std::span<const std::uint64_t> lower_edges = kDefaultBinEdges);

double median(std::vector<double> values);

enum class SweepMode { inference, retrain };

SweepMode parse_sweep_mode(std::string_view name);
std::string_view sweep_mode_name(SweepMode mode);

struct SweepPoint {
  double fraction = 0.0;
  std::size_t covered_words = 0;
  EvalReport report;
};

/// Evaluates `evaluate` once per keep fraction on a lexicon masked with
/// mask_coverage under `seed`. In inference mode the callback scores a fixed
/// model; in retrain mode it trains a fresh one first.
std::vector<SweepPoint> coverage_sweep(const Lexicon& lexicon, std::span<const double> fractions,
                                       std::uint64_t seed,
                                       const std::function<EvalReport(const Lexicon&)>& evaluate);

}  // namespace groc

#endif  // GROC_EVALUATION_HPP
