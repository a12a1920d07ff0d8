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

#ifndef GROC_TRAINING_HPP
#define GROC_TRAINING_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <unordered_set>
#include <vector>

#include "groc/checkpoint.hpp"
#include "groc/corpus.hpp"
#include "groc/model.hpp"
#include "groc/optim.hpp"
#include "groc/param_store.hpp"
#include "json.hpp"

namespace groc {

struct TrainConfig {
  double lr = 1e-3;
  std::size_t batch = 20;
  std::size_t bptt = 35;
  double clip = 0.1;
  std::size_t plateau_patience = 4;
  double decay = 0.1;
  std::size_t stop_patience = 8;
  std::size_t max_epochs = 40;
  double p = 1.0;  // probability of a full output-side update per step
  // Whether skipped steps also freeze the encoder projection, which the
  // output pathway re-embeds the vocabulary through.
  bool sparse_freeze_projection = true;
  std::size_t eval_bptt = 35;
  std::uint64_t seed = 1;  // dropout masks and gate draws

  void validate() const;
};

nlohmann::json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& j);

/// True when this step makes a full update. p >= 1 and p <= 0 consume no draws.
bool sparse_update_gate(double p, Rng& rng);

/// Learning-rate decay on dev plateaus and early stopping. Only a strictly
/// lower dev perplexity counts as an improvement.
class PlateauSchedule {
 public:
  PlateauSchedule(double lr = 1e-3, std::size_t plateau_patience = 4, double decay = 0.1,
                  std::size_t stop_patience = 8);

  /// Records one epoch's dev perplexity; returns whether it improved.
  bool observe(double dev_ppl);

  double lr() const { return lr_; }
  double best() const { return best_; }
  std::size_t since_best() const { return since_best_; }
  std::size_t decays() const { return decays_; }
  bool should_stop() const { return since_best_ >= stop_patience_; }

  nlohmann::json to_json() const;
  void restore(const nlohmann::json& j);

 private:
  double lr_;
  std::size_t plateau_patience_;
  double decay_;
  std::size_t stop_patience_;
  double best_;
  std::size_t since_best_ = 0;
  std::size_t bad_ = 0;
  std::size_t decays_ = 0;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double dev_ppl = 0.0;
  double lr = 0.0;
  double seconds = 0.0;
  std::size_t steps = 0;
  std::size_t gate_hits = 0;
  bool improved = false;

  nlohmann::json to_json() const;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  std::string stop_reason;

  /// One JSON object per epoch.
  void write_jsonl(std::ostream& out) const;
};

struct StepStats {
  double loss = 0.0;
  bool full = true;
  double grad_norm = 0.0;
};

/// One training process over a model: optimizer, generator, carried LSTM
/// state and the output layer reused by skipped steps.
class Trainer {
 public:
  Trainer(LanguageModel& model, TrainConfig config);

  const TrainConfig& config() const { return config_; }
  LanguageModel& model() { return model_; }
  AdamState& adam() { return adam_; }
  Rng& rng() { return rng_; }
  PlateauSchedule& schedule() { return schedule_; }
  std::size_t gate_hits() const { return gate_hits_; }

  /// Parameters left untouched by a skipped step.
  const std::unordered_set<std::string>& frozen_on_skip() const { return frozen_; }

  /// Resets the carried state to zeros for `lanes` lanes.
  void reset_state(std::size_t lanes);

  /// One gated, clipped Adam update on a window, carrying LSTM state.
  /// Throws NumericError on a non-finite loss without touching parameters.
  StepStats step(const Window& window);

  /// Mean training loss over every window of `plan`.
  double run_epoch(const BatchPlan& plan);

  /// Model plus optimizer moments, generator, carried state and schedule,
  /// enough to continue bitwise identically after restore().
  Checkpoint checkpoint() const;
  void restore(const Checkpoint& ckpt);

 private:
  OutputLayer stale_output(const DropoutMasks& masks);

  LanguageModel& model_;
  TrainConfig config_;
  AdamState adam_;
  Rng rng_;
  PlateauSchedule schedule_;
  std::unordered_set<std::string> frozen_;
  std::optional<LstmState> state_;
  std::optional<OutputLayer> stale_;
  std::size_t gate_hits_ = 0;
};

struct TrainResult {
  TrainLog log;
  Checkpoint best;  // model-only checkpoint of the best dev epoch
  double best_dev_ppl = 0.0;
  bool diverged = false;
};

using EpochCallback = std::function<void(const EpochRecord&, const LanguageModel&)>;

/// Trains until early stopping or max_epochs, evaluating dev perplexity after
/// every epoch. On return the model holds the best-dev parameters; after a
/// divergence it holds the last good ones.
TrainResult train(LanguageModel& model, const TokenStream& train_stream, const TokenStream& dev_stream,
                  const TrainConfig& config, const EpochCallback& on_epoch = {});

/// Continues training on a target stream for a fixed number of epochs at
/// `lr` with a fresh optimizer. Baselines first grow their tables to
/// `target_vocab`, which must extend the training vocabulary; GroC only
/// adopts it. Returns one record per epoch; dev perplexity is measured on
/// `dev_stream` when it is non-empty.
TrainLog finetune(LanguageModel& model, const Vocabulary& target_vocab, const TokenStream& target,
                  const TokenStream& dev_stream, TrainConfig config, std::size_t epochs = 3);

}  // namespace groc

#endif  // GROC_TRAINING_HPP
