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

#ifndef GROC_ENCODERS_HPP
#define GROC_ENCODERS_HPP

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "groc/lexicon.hpp"
#include "groc/ops.hpp"
#include "groc/param_store.hpp"

namespace groc {

// Character inventory: the 256 byte values plus three markers.
inline constexpr std::size_t kBowChar = 256;
inline constexpr std::size_t kEowChar = 257;
inline constexpr std::size_t kPadChar = 258;
inline constexpr std::size_t kCharInventory = 259;

struct EncoderConfig {
  std::size_t dim = 64;
  std::size_t char_dim = 16;
  std::vector<std::size_t> widths{1, 2, 3, 4, 5};
  /// Filters per width; empty means split `dim` in proportion to width.
  std::vector<std::size_t> filters;
  std::size_t highway_layers = 1;
  bool use_relations = true;
  bool use_definitions = true;

  /// Resolved per-width filter counts, always summing to `dim`.
  std::vector<std::size_t> filter_counts() const;
  std::size_t max_width() const;
  void validate() const;
};

/// Ragged character ids for a list of words, one segment per word:
/// BOW, the word's bytes, EOW, then PAD up to the widest filter.
struct CharBatch {
  std::vector<std::size_t> ids;
  ops::Segments segments;
};

/// Throws InputError on an empty word.
CharBatch encode_chars(std::span<const std::string> words, std::size_t min_length);

/// Char embedding -> width-wise convolution, tanh and max-over-time ->
/// highway layers. Parameters live in a ParamStore under "enc.".
class SurfaceEncoder {
 public:
  explicit SurfaceEncoder(EncoderConfig config);

  void register_params(ParamStore& params, double init_range) const;
  std::size_t parameter_count() const;

  /// [words, dim] surface vectors.
  Tensor encode(const ParamStore& params, const CharBatch& chars) const;
  Tensor encode(const ParamStore& params, std::span<const std::string> words) const;

  const EncoderConfig& config() const { return config_; }

 private:
  EncoderConfig config_;
};

/// Index structure for embedding a word list: the unique surfaces to run
/// through the char encoder, and for every word the rows of its own surface,
/// its relations and its definition tokens.
struct EmbeddingPlan {
  std::vector<std::string> words;
  std::vector<std::string> surfaces;
  CharBatch chars;
  std::vector<std::size_t> self_rows;
  std::vector<std::size_t> rel_rows;
  ops::Segments rel_segments;
  std::vector<std::size_t> def_rows;
  ops::Segments def_segments;

  std::size_t size() const { return words.size(); }
};

EmbeddingPlan plan_embeddings(std::span<const std::string> words, const Lexicon& lex,
                              const EncoderConfig& config);

/// The blocks of e_x = <c, r, d> for every planned word, each [words, dim],
/// and their projection.
struct ComposedEmbedding {
  Tensor surface;
  Tensor relational;
  Tensor definitional;
  Tensor projected;
};

/// Surface encoder plus the 3d -> d projection "enc.proj" (no bias).
class GroundedEmbedder {
 public:
  explicit GroundedEmbedder(EncoderConfig config) : surface_(std::move(config)) {}

  void register_params(ParamStore& params, double init_range) const;
  std::size_t parameter_count() const;

  ComposedEmbedding compose(const ParamStore& params, const EmbeddingPlan& plan) const;
  /// Projected rows only: the input-embedding matrix for the planned words.
  Tensor embed(const ParamStore& params, const EmbeddingPlan& plan) const;

  const SurfaceEncoder& surface() const { return surface_; }
  const EncoderConfig& config() const { return surface_.config(); }

 private:
  SurfaceEncoder surface_;
};

}  // namespace groc

#endif  // GROC_ENCODERS_HPP
