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

#include "groc/training.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include "groc/errors.hpp"
#include "groc/evaluation.hpp"

namespace groc {

void TrainConfig::validate() const {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw InputError("train: lr must be positive");
  if (batch == 0 || bptt == 0 || eval_bptt == 0) {
    throw InputError("train: batch, bptt and eval_bptt must be positive");
  }
  if (!(clip > 0.0)) throw InputError("train: clip must be positive");
  if (!(decay > 0.0 && decay <= 1.0)) throw InputError("train: decay must lie in (0, 1]");
  if (plateau_patience == 0 || stop_patience == 0) throw InputError("train: patience must be positive");
  if (max_epochs == 0) throw InputError("train: max_epochs must be positive");
  if (!(p >= 0.0 && p <= 1.0)) throw InputError("train: p must lie in [0, 1]");
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"lr", c.lr},
          {"batch", c.batch},
          {"bptt", c.bptt},
          {"clip", c.clip},
          {"plateau_patience", c.plateau_patience},
          {"decay", c.decay},
          {"stop_patience", c.stop_patience},
          {"max_epochs", c.max_epochs},
          {"p", c.p},
          {"sparse_freeze_projection", c.sparse_freeze_projection},
          {"eval_bptt", c.eval_bptt},
          {"seed", c.seed}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw InputError("train config: expected an object");
  TrainConfig c;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "lr") c.lr = value.get<double>();
      else if (key == "batch") c.batch = value.get<std::size_t>();
      else if (key == "bptt") c.bptt = value.get<std::size_t>();
      else if (key == "clip") c.clip = value.get<double>();
      else if (key == "plateau_patience") c.plateau_patience = value.get<std::size_t>();
      else if (key == "decay") c.decay = value.get<double>();
      else if (key == "stop_patience") c.stop_patience = value.get<std::size_t>();
      else if (key == "max_epochs") c.max_epochs = value.get<std::size_t>();
      else if (key == "p") c.p = value.get<double>();
      else if (key == "sparse_freeze_projection") c.sparse_freeze_projection = value.get<bool>();
      else if (key == "eval_bptt") c.eval_bptt = value.get<std::size_t>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else throw InputError("train config: unknown key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

bool sparse_update_gate(double p, Rng& rng) {
  if (p >= 1.0) return true;
  if (p <= 0.0) return false;
  return rng.bernoulli(p);
}

PlateauSchedule::PlateauSchedule(double lr, std::size_t plateau_patience, double decay,
                                 std::size_t stop_patience)
    : lr_(lr),
      plateau_patience_(plateau_patience),
      decay_(decay),
      stop_patience_(stop_patience),
      best_(std::numeric_limits<double>::infinity()) {}

bool PlateauSchedule::observe(double dev_ppl) {
  if (dev_ppl < best_) {
    best_ = dev_ppl;
    since_best_ = 0;
    bad_ = 0;
    return true;
  }
  ++since_best_;
  if (++bad_ >= plateau_patience_) {
    lr_ *= decay_;
    ++decays_;
    bad_ = 0;
  }
  return false;
}

nlohmann::json PlateauSchedule::to_json() const {
  return {{"lr", lr_},
          {"best", std::isfinite(best_) ? nlohmann::json(best_) : nlohmann::json(nullptr)},
          {"since_best", since_best_},
          {"bad", bad_},
          {"decays", decays_}};
}

void PlateauSchedule::restore(const nlohmann::json& j) {
  lr_ = j.at("lr").get<double>();
  best_ = j.at("best").is_null() ? std::numeric_limits<double>::infinity() : j.at("best").get<double>();
  since_best_ = j.at("since_best").get<std::size_t>();
  bad_ = j.at("bad").get<std::size_t>();
  decays_ = j.at("decays").get<std::size_t>();
}

nlohmann::json EpochRecord::to_json() const {
  return {{"epoch", epoch},         {"train_loss", train_loss}, {"dev_ppl", dev_ppl},
          {"lr", lr},               {"seconds", seconds},       {"steps", steps},
          {"gate_hits", gate_hits}, {"improved", improved}};
}

void TrainLog::write_jsonl(std::ostream& out) const {
  for (const auto& e : epochs) out << e.to_json().dump() << '\n';
}

Trainer::Trainer(LanguageModel& model, TrainConfig config)
    : model_(model),
      config_(std::move(config)),
      rng_(config_.seed),
      schedule_(config_.lr, config_.plateau_patience, config_.decay, config_.stop_patience) {
  config_.validate();
  adam_.config.lr = config_.lr;
  for (auto& name : model_.output_side_params()) {
    if (name == "enc.proj" && !config_.sparse_freeze_projection) continue;
    frozen_.insert(name);
  }
}

void Trainer::reset_state(std::size_t lanes) { state_ = model_.initial_state(lanes); }

OutputLayer Trainer::stale_output(const DropoutMasks& masks) {
  if (!stale_) {
    NoGradGuard no_grad;
    auto out = model_.output_layer(model_.input_matrix(model_.vocab().tokens()), &masks);
    stale_ = OutputLayer{out.embeddings.detach(), out.bias.detach()};
  }
  return *stale_;
}

StepStats Trainer::step(const Window& w) {
  if (!state_ || state_->lanes != w.lanes) reset_state(w.lanes);
  StepStats stats;
  stats.full = sparse_update_gate(config_.p, rng_);
  const DropoutMasks masks = model_.sample_masks(w.lanes, rng_);

  Tensor inputs;
  OutputLayer out;
  if (stats.full) {
    ++gate_hits_;
    const Tensor table = model_.input_matrix(model_.vocab().tokens());
    inputs = ops::gather_rows(table, w.inputs);
    out = model_.output_layer(table, &masks);
    if (config_.p < 1.0) stale_ = OutputLayer{out.embeddings.detach(), out.bias.detach()};
  } else {
    inputs = model_.embed_inputs(w.inputs, model_.vocab());
    out = stale_output(masks);
  }

  auto pre = model_.prefix_forward(inputs, w.steps, *state_, &masks);
  const Tensor loss = ops::softmax_cross_entropy(model_.logits(pre.query, out, &masks), w.targets);
  stats.loss = loss.item();
  if (!std::isfinite(stats.loss)) throw NumericError("train: non-finite loss");

  backward(loss);
  auto& params = model_.params();
  if (!stats.full) {
    for (const auto& name : frozen_) params.get(name).zero_grad();
  }
  stats.grad_norm = clip_grad_norm(params, config_.clip);
  adam_.config.lr = schedule_.lr();
  adam_step(params, adam_, stats.full ? std::unordered_set<std::string>{} : frozen_);
  state_ = pre.state.detached();
  return stats;
}

double Trainer::run_epoch(const BatchPlan& plan) {
  reset_state(plan.batch_size());
  double total = 0.0;
  for (std::size_t i = 0; i < plan.num_windows(); ++i) total += step(plan.window(i)).loss;
  return total / static_cast<double>(plan.num_windows());
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint ckpt = model_.to_checkpoint();
  nlohmann::json steps = nlohmann::json::object();
  for (const auto& [name, mom] : adam_.moments) {
    steps[name] = mom.steps;
    ckpt.tensors.emplace_back("adam.m/" + name, Tensor::from({mom.m.size()}, mom.m));
    ckpt.tensors.emplace_back("adam.v/" + name, Tensor::from({mom.v.size()}, mom.v));
  }
  if (state_) {
    for (std::size_t l = 0; l < state_->h.size(); ++l) {
      ckpt.tensors.emplace_back("state.h" + std::to_string(l), state_->h[l].detach());
      ckpt.tensors.emplace_back("state.c" + std::to_string(l), state_->c[l].detach());
    }
  }
  if (stale_) {
    ckpt.tensors.emplace_back("stale.embeddings", stale_->embeddings);
    ckpt.tensors.emplace_back("stale.bias", stale_->bias);
  }
  ckpt.header["train"] = {{"config", to_json(config_)},
                          {"adam_step", adam_.step},
                          {"adam_steps", steps},
                          {"rng", rng_.state()},
                          {"schedule", schedule_.to_json()},
                          {"gate_hits", gate_hits_},
                          {"lanes", state_ ? state_->lanes : 0}};
  return ckpt;
}

void Trainer::restore(const Checkpoint& ckpt) {
  if (!ckpt.header.contains("train")) throw InputError("checkpoint: no training state");
  const auto& t = ckpt.header["train"];
  auto& params = model_.params();
  for (const auto& [name, src] : ckpt.tensors) {
    if (params.contains(name)) {
      auto& dst = params.get(name);
      if (dst.shape() != src.shape()) throw InputError("checkpoint: shape mismatch for '" + name + "'");
      std::copy(src.data().begin(), src.data().end(), dst.mutable_data().begin());
    }
  }
  adam_.step = t.at("adam_step").get<std::uint64_t>();
  adam_.moments.clear();
  for (const auto& [name, steps] : t.at("adam_steps").items()) {
    const Tensor* m = ckpt.find("adam.m/" + name);
    const Tensor* v = ckpt.find("adam.v/" + name);
    if (!m || !v) throw InputError("checkpoint: missing Adam moments for '" + name + "'");
    auto& mom = adam_.moments[name];
    mom.m.assign(m->data().begin(), m->data().end());
    mom.v.assign(v->data().begin(), v->data().end());
    mom.steps = steps.get<std::uint64_t>();
  }
  rng_.set_state(t.at("rng").get<std::string>());
  schedule_.restore(t.at("schedule"));
  gate_hits_ = t.at("gate_hits").get<std::size_t>();
  const auto lanes = t.at("lanes").get<std::size_t>();
  state_.reset();
  if (lanes) {
    LstmState s;
    s.lanes = lanes;
    for (std::size_t l = 0; l < model_.config().layers; ++l) {
      const Tensor* h = ckpt.find("state.h" + std::to_string(l));
      const Tensor* c = ckpt.find("state.c" + std::to_string(l));
      if (!h || !c) throw InputError("checkpoint: missing LSTM state");
      s.h.push_back(h->detach());
      s.c.push_back(c->detach());
    }
    state_ = std::move(s);
  }
  stale_.reset();
  const Tensor* se = ckpt.find("stale.embeddings");
  const Tensor* sb = ckpt.find("stale.bias");
  if (se && sb) stale_ = OutputLayer{se->detach(), sb->detach()};
}

namespace {

double dev_perplexity(const LanguageModel& model, const TokenStream& dev, std::size_t bptt) {
  EvalOptions opt;
  opt.bptt = bptt;
  return perplexity(model, dev, model.vocab(), opt).perplexity;
}

void load_params(LanguageModel& model, const Checkpoint& ckpt) {
  for (auto& [name, t] : model.params()) {
    const Tensor* src = ckpt.find(name);
    std::copy(src->data().begin(), src->data().end(), t.mutable_data().begin());
  }
}

}  // namespace

TrainResult train(LanguageModel& model, const TokenStream& train_stream, const TokenStream& dev_stream,
                  const TrainConfig& config, const EpochCallback& on_epoch) {
  Trainer trainer(model, config);
  const BatchPlan plan = batchify(train_stream, config.batch, config.bptt);
  TrainResult result;
  result.best = model.to_checkpoint();
  result.best_dev_ppl = std::numeric_limits<double>::infinity();

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const std::size_t hits_before = trainer.gate_hits();
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = trainer.schedule().lr();
    try {
      rec.train_loss = trainer.run_epoch(plan);
      rec.dev_ppl = dev_perplexity(model, dev_stream, config.eval_bptt);
      if (!std::isfinite(rec.dev_ppl)) throw NumericError("train: non-finite dev perplexity");
    } catch (const NumericError&) {
      load_params(model, result.best);
      result.diverged = true;
      result.log.stop_reason = "diverged";
      return result;
    }
    rec.steps = plan.num_windows();
    rec.gate_hits = trainer.gate_hits() - hits_before;
    rec.improved = trainer.schedule().observe(rec.dev_ppl);
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (rec.improved) {
      result.best = model.to_checkpoint();
      result.best_dev_ppl = rec.dev_ppl;
    }
    result.log.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec, model);
    if (trainer.schedule().should_stop()) {
      result.log.stop_reason = "early_stop";
      break;
    }
  }
  if (result.log.stop_reason.empty()) result.log.stop_reason = "max_epochs";
  load_params(model, result.best);
  return result;
}

TrainLog finetune(LanguageModel& model, const Vocabulary& target_vocab, const TokenStream& target,
                  const TokenStream& dev_stream, TrainConfig config, std::size_t epochs) {
  model.extend_vocabulary(target_vocab);
  config.max_epochs = std::max<std::size_t>(epochs, 1);
  Trainer trainer(model, config);
  const BatchPlan plan = batchify(target, config.batch, config.bptt);
  TrainLog log;
  for (std::size_t epoch = 1; epoch <= epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = config.lr;
    const std::size_t hits_before = trainer.gate_hits();
    rec.train_loss = trainer.run_epoch(plan);
    rec.dev_ppl = dev_stream.size() >= 2 ? dev_perplexity(model, dev_stream, config.eval_bptt)
                                         : std::numeric_limits<double>::quiet_NaN();
    rec.steps = plan.num_windows();
    rec.gate_hits = trainer.gate_hits() - hits_before;
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    log.epochs.push_back(rec);
  }
  log.stop_reason = "epochs";
  return log;
}

}  // namespace groc
