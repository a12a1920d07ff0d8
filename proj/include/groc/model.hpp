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

#ifndef GROC_MODEL_HPP
#define GROC_MODEL_HPP

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "groc/checkpoint.hpp"
#include "groc/corpus.hpp"
#include "groc/encoders.hpp"
#include "groc/lexicon.hpp"
#include "groc/ops.hpp"
#include "groc/param_store.hpp"
#include "json.hpp"

namespace groc {

enum class HeadKind { groc, lookup, tied, bilinear, deep_residual };

HeadKind parse_head(std::string_view name);
std::string_view head_name(HeadKind kind);

struct ModelConfig {
  HeadKind head = HeadKind::groc;
  EncoderConfig encoder;  // encoder.dim is the embedding size d for every head
  std::size_t hidden = 256;
  std::size_t layers = 2;
  double hidden_dropout = 0.65;
  std::size_t out_layers = 0;  // depth k of the residual output transform
  ops::Activation out_activation = ops::Activation::relu;
  double out_dropout = 0.2;
  ops::Activation bias_activation = ops::Activation::tanh;
  std::size_t rel_limit = Lexicon::kDefaultRelLimit;
  std::size_t def_limit = Lexicon::kDefaultDefLimit;
  double init_range = 0.05;
  std::uint64_t seed = 1;

  std::size_t dim() const { return encoder.dim; }
  bool compositional() const { return head == HeadKind::groc; }
  bool residual() const { return head == HeadKind::groc || head == HeadKind::deep_residual; }
  void validate() const;
};

nlohmann::json to_json(const ModelConfig& config);
/// Missing keys keep their defaults; unknown keys and bad values throw InputError.
ModelConfig model_config_from_json(const nlohmann::json& j);

/// Per-layer LSTM state, each [lanes, hidden].
struct LstmState {
  std::vector<Tensor> h;
  std::vector<Tensor> c;
  std::size_t lanes = 0;

  LstmState detached() const;
};

/// Inverted-dropout masks for one window; an empty mask means no dropout.
/// `hidden[l]` is [lanes * hidden], shared by every step of the window.
/// `transform[j]` ([dim]) feeds layer j+1 of the output transform and `output`
/// ([dim]) multiplies the final output embeddings; both are shared by every
/// vocabulary row.
struct DropoutMasks {
  std::vector<std::vector<double>> hidden;
  std::vector<std::vector<double>> transform;
  std::vector<double> output;
};

struct PrefixResult {
  Tensor hidden;  // top-layer h after dropout, [steps * lanes, hidden], time-major
  Tensor query;   // bridged to the embedding size, [steps * lanes, dim]
  LstmState state;
};

/// Output embeddings (before the final dropout mask) and biases over a
/// vocabulary: [rows, dim] and [rows].
struct OutputLayer {
  Tensor embeddings;
  Tensor bias;
};

/// LSTM prefix encoder with a GroC or baseline output head. All parameters
/// live in one ParamStore, registered in a fixed order: input side, LSTM
/// layers, bridge, output transform, bias.
class LanguageModel {
 public:
  /// `vocab` sizes the baseline tables and is the default output vocabulary.
  /// GroC requires a lexicon; baselines ignore it.
  LanguageModel(ModelConfig config, Vocabulary vocab, std::shared_ptr<const Lexicon> lexicon = {});

  const ModelConfig& config() const { return config_; }
  const Vocabulary& vocab() const { return vocab_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  const Lexicon& lexicon() const { return lexicon_; }
  /// Replaces the lexicon (limits forced to the config's) and drops cached plans.
  void set_lexicon(const Lexicon& lexicon);

  std::size_t parameter_count() const { return params_.count(); }
  /// Closed-form counts for a config and a training vocabulary size.
  static std::size_t parameter_count(const ModelConfig& config, std::size_t vocab_size);
  /// Output transform plus bias only.
  static std::size_t head_parameter_count(const ModelConfig& config, std::size_t vocab_size);

  /// Parameter names the sparse-update gate freezes on a skipped step.
  std::vector<std::string> output_side_params() const;

  /// Number of leading rows of `vocab` the head can score: all of them for
  /// GroC, the training vocabulary for baselines. Throws ContractError when a
  /// baseline is given a vocabulary that does not extend its training one.
  std::size_t support_size(const Vocabulary& vocab) const;

  /// Samples masks from the store's generator: hidden layers in order, then
  /// the output masks. Rates of zero draw nothing.
  DropoutMasks sample_masks(std::size_t lanes);
  DropoutMasks sample_masks(std::size_t lanes, Rng& rng) const;

  LstmState initial_state(std::size_t lanes) const;

  /// E^in for a word list. GroC composes every word; baselines return the
  /// table row of each training word and the unknown row otherwise.
  Tensor input_matrix(std::span<const std::string> words) const;

  /// Input rows for `ids` under `vocab`, embedding each distinct id once.
  Tensor embed_inputs(std::span<const TokenId> ids, const Vocabulary& vocab) const;

  /// Runs the LSTM over time-major inputs [steps * lanes, dim].
  PrefixResult prefix_forward(const Tensor& inputs, std::size_t steps, const LstmState& state,
                              const DropoutMasks* masks) const;

  /// GroC: residual transform of `e_in` plus compositional bias. Baselines:
  /// their head over the training vocabulary (`e_in` feeds tied, bilinear
  /// and deep residual and must then be the training-vocabulary input rows).
  OutputLayer output_layer(const Tensor& e_in, const DropoutMasks* masks) const;

  /// E^(k) for the residual transform; k = 0 returns `e_in` itself.
  Tensor residual_transform(const Tensor& e_in, const DropoutMasks* masks) const;
  Tensor compositional_bias(const Tensor& e_out) const;

  /// [rows, support] logits of `query` against the output layer, applying
  /// the final output-embedding mask when present.
  Tensor logits(const Tensor& query, const OutputLayer& out, const DropoutMasks* masks) const;

  /// Baselines: grows embed.in / embed.out / bias.word with freshly drawn
  /// rows for every token of `vocab` beyond the training vocabulary, which
  /// must be a prefix of it. GroC: only the vocabulary record changes.
  void extend_vocabulary(const Vocabulary& vocab);

  /// GroC checkpoints embed the lexicon; `lexicon` overrides it when given.
  Checkpoint to_checkpoint() const;
  static LanguageModel from_checkpoint(const Checkpoint& ckpt,
                                       std::shared_ptr<const Lexicon> lexicon = {});

 private:
  const EmbeddingPlan& plan_for(std::span<const std::string> words) const;
  void register_params();

  ModelConfig config_;
  Vocabulary vocab_;
  Lexicon lexicon_;
  GroundedEmbedder embedder_;
  ParamStore params_;

  mutable std::vector<std::string> plan_words_;
  mutable std::optional<EmbeddingPlan> plan_;
};

/// softmax(E^out h + b) for one query, checked for NaN.
std::vector<double> next_word_distribution(std::span<const double> query, const Tensor& e_out,
                                           std::span<const double> bias);

/// Row-wise softmax of [rows, n] logits into probabilities; throws
/// NumericError naming the row when a logit is NaN.
std::vector<double> softmax_rows(const Tensor& logits);

}  // namespace groc

#endif  // GROC_MODEL_HPP
