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

#ifndef GROC_CORPUS_HPP
#define GROC_CORPUS_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace groc {

using TokenId = std::size_t;

inline constexpr std::string_view kEos = "<eos>";

/// Bijective token <-> id map with training counts.
///
/// Ids are assigned by first occurrence. Baseline output heads reserve one
/// extra input row at index size() for tokens outside the vocabulary; GroC
/// never needs it.
class Vocabulary {
 public:
  /// Adds `count` occurrences of `token`, assigning a new id if unseen.
  TokenId add(std::string_view token, std::uint64_t count = 1);

  std::optional<TokenId> find(std::string_view token) const;
  TokenId id_of(std::string_view token) const;
  const std::string& token_of(TokenId id) const { return tokens_.at(id); }
  std::uint64_t freq(TokenId id) const { return freq_.at(id); }
  std::size_t size() const { return tokens_.size(); }
  std::optional<TokenId> eos_id() const { return find(kEos); }
  TokenId unk_id() const { return size(); }

  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::vector<std::uint64_t>& freqs() const { return freq_; }

  /// One token per line in id order, a tab, then its frequency.
  void write(const std::filesystem::path& path) const;
  static Vocabulary read(const std::filesystem::path& path);

  bool operator==(const Vocabulary& other) const {
    return tokens_ == other.tokens_ && freq_ == other.freq_;
  }

 private:
  std::vector<std::string> tokens_;
  std::vector<std::uint64_t> freq_;
  std::unordered_map<std::string, TokenId> ids_;
};

/// Whitespace tokens of a corpus file with kEos appended after every
/// non-blank line.
std::vector<std::string> read_corpus_tokens(const std::filesystem::path& path);
std::vector<std::string> tokenize_text(std::string_view text);

/// Inverse of tokenize_text up to whitespace normalization: tokens joined by
/// single spaces, one line per kEos.
std::string detokenize(std::span<const std::string> tokens);

/// Counts every token; ids by first occurrence. Throws InputError when empty.
Vocabulary build_vocab(std::span<const std::string> tokens);

/// Train ids form a prefix; test-only tokens are appended with frequency 0.
Vocabulary union_vocab(const Vocabulary& train, const Vocabulary& test);

struct TokenStream {
  std::vector<TokenId> ids;
  std::string source;

  std::size_t size() const { return ids.size(); }
};

/// Maps tokens to ids; throws InputError on a token the vocabulary lacks.
TokenStream encode(std::span<const std::string> tokens, const Vocabulary& vocab,
                   std::string source = {});

/// One BPTT window across all lanes, stored time-major: entry t * lanes + b
/// is lane b at step t.
struct Window {
  std::size_t steps = 0;
  std::size_t lanes = 0;
  std::vector<TokenId> inputs;
  std::vector<TokenId> targets;
};

/// A stream cut into `batch_size` contiguous lanes, read in windows of
/// `bptt` steps with targets shifted by one.
///
/// Lane length is floor(n / batch_size); tokens past the last full lane and
/// past the last full window are dropped.
class BatchPlan {
 public:
  BatchPlan(const TokenStream& stream, std::size_t batch_size, std::size_t bptt);

  std::size_t batch_size() const { return batch_size_; }
  std::size_t bptt() const { return bptt_; }
  std::size_t lane_length() const { return lane_len_; }
  std::size_t num_windows() const { return (lane_len_ - 1) / bptt_; }
  std::span<const TokenId> lane(std::size_t b) const;
  Window window(std::size_t index) const;

 private:
  std::size_t batch_size_;
  std::size_t bptt_;
  std::size_t lane_len_;
  std::vector<TokenId> ids_;
};

/// Throws InputError unless the stream holds at least batch_size * (bptt + 1) tokens.
BatchPlan batchify(const TokenStream& stream, std::size_t batch_size, std::size_t bptt);

/// Partitions vocabulary ids by training frequency. `lower_edges` are strictly
/// increasing bin lower bounds; bin i holds frequencies in
/// [edges[i], edges[i+1]) and frequencies below edges[0] fall in bin 0.
std::vector<std::vector<TokenId>> frequency_bins(const Vocabulary& vocab,
                                                 std::span<const std::uint64_t> lower_edges);

/// Index of the bin holding `freq` under the convention above.
std::size_t bin_of(std::uint64_t freq, std::span<const std::uint64_t> lower_edges);

}  // namespace groc

#endif  // GROC_CORPUS_HPP
