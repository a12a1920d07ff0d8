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

#include "groc/model.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "groc/errors.hpp"

namespace groc {

namespace {

using nlohmann::json;

const std::pair<HeadKind, std::string_view> kHeadNames[] = {
    {HeadKind::groc, "groc"},         {HeadKind::lookup, "lookup"},
    {HeadKind::tied, "tied"},         {HeadKind::bilinear, "bilinear"},
    {HeadKind::deep_residual, "deep_residual"},
};

std::string lstm_name(std::size_t layer, const char* what) {
  return "lstm" + std::to_string(layer) + "." + what;
}

std::string out_name(std::size_t layer, const char* what) {
  return "out.layer" + std::to_string(layer) + "." + what;
}

std::vector<double> sample_mask(Rng& rng, std::size_t n, double rate) {
  std::vector<double> mask(n);
  const double keep = 1.0 - rate;
  for (auto& m : mask) m = rng.bernoulli(keep) ? 1.0 / keep : 0.0;
  return mask;
}

template <typename T>
T take(const json& j, const char* key, T fallback) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw InputError(std::string("config: bad value for '") + key + "'");
  }
}

ops::Activation take_activation(const json& j, const char* key, ops::Activation fallback) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  if (!it->is_string()) throw InputError(std::string("config: '") + key + "' must be a string");
  try {
    return ops::parse_activation(it->get<std::string>());
  } catch (const std::exception& e) {
    throw InputError(std::string("config: ") + e.what());
  }
}

void reject_unknown(const json& j, std::initializer_list<std::string_view> known, const char* where) {
  for (const auto& [key, value] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw InputError(std::string("config: unknown key '") + key + "' in " + where);
    }
  }
}

}  // namespace

HeadKind parse_head(std::string_view name) {
  for (const auto& [kind, n] : kHeadNames) {
    if (n == name) return kind;
  }
  throw InputError("unknown output head '" + std::string(name) +
                   "' (expected groc, lookup, tied, bilinear or deep_residual)");
}

std::string_view head_name(HeadKind kind) {
  for (const auto& [k, n] : kHeadNames) {
    if (k == kind) return n;
  }
  return "?";
}

void ModelConfig::validate() const {
  encoder.validate();
  if (hidden == 0 || layers == 0) throw InputError("config: hidden and layers must be positive");
  if (!(hidden_dropout >= 0.0 && hidden_dropout < 1.0)) {
    throw InputError("config: hidden_dropout must lie in [0, 1)");
  }
  if (!(out_dropout >= 0.0 && out_dropout < 1.0)) {
    throw InputError("config: out_dropout must lie in [0, 1)");
  }
  if (!(init_range > 0.0)) throw InputError("config: init_range must be positive");
  if (out_layers > 0 && !residual()) {
    throw InputError("config: out_layers applies only to the groc and deep_residual heads");
  }
}

json to_json(const ModelConfig& c) {
  json enc = {
      {"dim", c.encoder.dim},
      {"char_dim", c.encoder.char_dim},
      {"widths", c.encoder.widths},
      {"filters", c.encoder.filter_counts()},
      {"highway_layers", c.encoder.highway_layers},
      {"use_relations", c.encoder.use_relations},
      {"use_definitions", c.encoder.use_definitions},
  };
  return {
      {"head", std::string(head_name(c.head))},
      {"encoder", enc},
      {"hidden", c.hidden},
      {"layers", c.layers},
      {"hidden_dropout", c.hidden_dropout},
      {"out_layers", c.out_layers},
      {"out_activation", std::string(ops::activation_name(c.out_activation))},
      {"out_dropout", c.out_dropout},
      {"bias_activation", std::string(ops::activation_name(c.bias_activation))},
      {"rel_limit", c.rel_limit},
      {"def_limit", c.def_limit},
      {"init_range", c.init_range},
      {"seed", c.seed},
  };
}

ModelConfig model_config_from_json(const json& j) {
  if (!j.is_object()) throw InputError("config: model section must be an object");
  reject_unknown(j,
                 {"head", "encoder", "hidden", "layers", "hidden_dropout", "out_layers",
                  "out_activation", "out_dropout", "bias_activation", "rel_limit", "def_limit",
                  "init_range", "seed"},
                 "model");
  ModelConfig c;
  if (j.contains("head")) c.head = parse_head(take<std::string>(j, "head", "groc"));
  if (auto it = j.find("encoder"); it != j.end()) {
    if (!it->is_object()) throw InputError("config: 'encoder' must be an object");
    reject_unknown(*it,
                   {"dim", "char_dim", "widths", "filters", "highway_layers", "use_relations",
                    "use_definitions"},
                   "encoder");
    auto& e = c.encoder;
    e.dim = take(*it, "dim", e.dim);
    e.char_dim = take(*it, "char_dim", e.char_dim);
    e.widths = take(*it, "widths", e.widths);
    e.filters = take(*it, "filters", e.filters);
    e.highway_layers = take(*it, "highway_layers", e.highway_layers);
    e.use_relations = take(*it, "use_relations", e.use_relations);
    e.use_definitions = take(*it, "use_definitions", e.use_definitions);
  }
  c.hidden = take(j, "hidden", c.hidden);
  c.layers = take(j, "layers", c.layers);
  c.hidden_dropout = take(j, "hidden_dropout", c.hidden_dropout);
  c.out_layers = take(j, "out_layers", c.out_layers);
  c.out_activation = take_activation(j, "out_activation", c.out_activation);
  c.out_dropout = take(j, "out_dropout", c.out_dropout);
  c.bias_activation = take_activation(j, "bias_activation", c.bias_activation);
  c.rel_limit = take(j, "rel_limit", c.rel_limit);
  c.def_limit = take(j, "def_limit", c.def_limit);
  c.init_range = take(j, "init_range", c.init_range);
  c.seed = take(j, "seed", c.seed);
  c.validate();
  return c;
}

LstmState LstmState::detached() const {
  LstmState out;
  out.lanes = lanes;
  for (const auto& t : h) out.h.push_back(t.detach());
  for (const auto& t : c) out.c.push_back(t.detach());
  return out;
}

LanguageModel::LanguageModel(ModelConfig config, Vocabulary vocab,
                             std::shared_ptr<const Lexicon> lexicon)
    : config_(std::move(config)),
      vocab_(std::move(vocab)),
      lexicon_(lexicon ? *lexicon : Lexicon{}),
      embedder_(config_.encoder),
      params_(config_.seed) {
  config_.validate();
  if (vocab_.size() == 0) throw InputError("model: empty vocabulary");
  lexicon_.set_limits(config_.rel_limit, config_.def_limit);
  register_params();
}

void LanguageModel::set_lexicon(const Lexicon& lexicon) {
  lexicon_ = lexicon;
  lexicon_.set_limits(config_.rel_limit, config_.def_limit);
  plan_.reset();
  plan_words_.clear();
}

void LanguageModel::register_params() {
  const auto d = config_.dim(), h = config_.hidden, v = vocab_.size();
  const double r = config_.init_range;
  if (config_.compositional()) {
    embedder_.register_params(params_, r);
  } else {
    params_.add("embed.in", {v + 1, d}, r);
  }
  for (std::size_t l = 0; l < config_.layers; ++l) {
    params_.add(lstm_name(l, "w_ih"), {l == 0 ? d : h, 4 * h}, r);
    params_.add(lstm_name(l, "w_hh"), {h, 4 * h}, r);
    params_.add(lstm_name(l, "bias"), {4 * h}, r);
  }
  params_.add("bridge.weight", {h, d}, r);
  params_.add("bridge.bias", {d}, r);
  if (config_.residual()) {
    for (std::size_t j = 1; j <= config_.out_layers; ++j) {
      params_.add(out_name(j, "weight"), {d, d}, r);
      params_.add(out_name(j, "bias"), {d}, r);
    }
  }
  if (config_.head == HeadKind::lookup) params_.add("embed.out", {v, d}, r);
  if (config_.head == HeadKind::bilinear) params_.add("bilinear.weight", {d, d}, r);
  if (config_.compositional()) {
    params_.add("bias.weight", {d, 1}, r);
    params_.add("bias.offset", {1}, r);
  } else {
    params_.add("bias.word", {v}, r);
  }
}

std::size_t LanguageModel::head_parameter_count(const ModelConfig& c, std::size_t v) {
  const auto d = c.dim();
  std::size_t n = c.residual() ? c.out_layers * (d * d + d) : 0;
  switch (c.head) {
    case HeadKind::groc: return n + d + 1;
    case HeadKind::lookup: return v * d + v;
    case HeadKind::tied: return v;
    case HeadKind::bilinear: return d * d + v;
    case HeadKind::deep_residual: return n + v;
  }
  return n;
}

std::size_t LanguageModel::parameter_count(const ModelConfig& c, std::size_t v) {
  const auto d = c.dim(), h = c.hidden;
  std::size_t n = c.compositional() ? GroundedEmbedder(c.encoder).parameter_count() : (v + 1) * d;
  for (std::size_t l = 0; l < c.layers; ++l) n += (l == 0 ? d : h) * 4 * h + h * 4 * h + 4 * h;
  n += h * d + d;
  return n + head_parameter_count(c, v);
}

std::vector<std::string> LanguageModel::output_side_params() const {
  std::vector<std::string> names;
  if (config_.residual()) {
    for (std::size_t j = 1; j <= config_.out_layers; ++j) {
      names.push_back(out_name(j, "weight"));
      names.push_back(out_name(j, "bias"));
    }
  }
  switch (config_.head) {
    case HeadKind::groc:
      names.insert(names.end(), {"bias.weight", "bias.offset", "enc.proj"});
      break;
    case HeadKind::lookup:
      names.insert(names.end(), {"embed.out", "bias.word"});
      break;
    case HeadKind::bilinear:
      names.insert(names.end(), {"bilinear.weight", "bias.word"});
      break;
    default:
      names.push_back("bias.word");
  }
  return names;
}

std::size_t LanguageModel::support_size(const Vocabulary& vocab) const {
  if (config_.compositional()) return vocab.size();
  if (vocab.size() < vocab_.size()) {
    throw ContractError("model: vocabulary is smaller than the training vocabulary");
  }
  for (TokenId id = 0; id < vocab_.size(); ++id) {
    if (vocab.token_of(id) != vocab_.token_of(id)) {
      throw ContractError("model: vocabulary does not extend the training vocabulary at id " +
                          std::to_string(id));
    }
  }
  return vocab_.size();
}

DropoutMasks LanguageModel::sample_masks(std::size_t lanes) { return sample_masks(lanes, params_.rng()); }

DropoutMasks LanguageModel::sample_masks(std::size_t lanes, Rng& rng) const {
  DropoutMasks masks;
  if (config_.hidden_dropout > 0.0) {
    for (std::size_t l = 0; l < config_.layers; ++l) {
      masks.hidden.push_back(sample_mask(rng, lanes * config_.hidden, config_.hidden_dropout));
    }
  }
  if (config_.out_dropout > 0.0) {
    if (config_.residual()) {
      for (std::size_t j = 0; j < config_.out_layers; ++j) {
        masks.transform.push_back(sample_mask(rng, config_.dim(), config_.out_dropout));
      }
    }
    masks.output = sample_mask(rng, config_.dim(), config_.out_dropout);
  }
  return masks;
}

LstmState LanguageModel::initial_state(std::size_t lanes) const {
  LstmState s;
  s.lanes = lanes;
  for (std::size_t l = 0; l < config_.layers; ++l) {
    s.h.push_back(Tensor::zeros({lanes, config_.hidden}));
    s.c.push_back(Tensor::zeros({lanes, config_.hidden}));
  }
  return s;
}

const EmbeddingPlan& LanguageModel::plan_for(std::span<const std::string> words) const {
  if (!plan_ || !std::equal(words.begin(), words.end(), plan_words_.begin(), plan_words_.end())) {
    plan_words_.assign(words.begin(), words.end());
    plan_ = plan_embeddings(words, lexicon_, config_.encoder);
  }
  return *plan_;
}

Tensor LanguageModel::input_matrix(std::span<const std::string> words) const {
  if (config_.compositional()) return embedder_.embed(params_, plan_for(words));
  std::vector<std::size_t> rows;
  rows.reserve(words.size());
  for (const auto& w : words) rows.push_back(vocab_.find(w).value_or(vocab_.unk_id()));
  return ops::gather_rows(params_.get("embed.in"), rows);
}

Tensor LanguageModel::embed_inputs(std::span<const TokenId> ids, const Vocabulary& vocab) const {
  std::unordered_map<TokenId, std::size_t> slot;
  std::vector<std::string> words;
  std::vector<std::size_t> rows;
  rows.reserve(ids.size());
  for (auto id : ids) {
    auto [it, inserted] = slot.emplace(id, words.size());
    if (inserted) words.push_back(vocab.token_of(id));
    rows.push_back(it->second);
  }
  Tensor table;
  if (config_.compositional()) {
    table = embedder_.embed(params_, plan_embeddings(words, lexicon_, config_.encoder));
  } else {
    table = input_matrix(words);
  }
  return ops::gather_rows(table, rows);
}

PrefixResult LanguageModel::prefix_forward(const Tensor& inputs, std::size_t steps,
                                           const LstmState& state,
                                           const DropoutMasks* masks) const {
  const std::size_t lanes = state.lanes, h = config_.hidden;
  if (state.h.size() != config_.layers || state.c.size() != config_.layers) {
    throw ContractError("prefix_forward: state has " + std::to_string(state.h.size()) +
                        " layers, model has " + std::to_string(config_.layers));
  }
  for (std::size_t l = 0; l < config_.layers; ++l) {
    if (state.h[l].shape() != Shape{lanes, h} || state.c[l].shape() != Shape{lanes, h}) {
      throw ContractError("prefix_forward: state shape " + shape_str(state.h[l].shape()) +
                          " does not match " + std::to_string(lanes) + " lanes of " +
                          std::to_string(h) + " units");
    }
  }
  if (inputs.ndim() != 2 || inputs.rows() != steps * lanes || inputs.cols() != config_.dim()) {
    throw ContractError("prefix_forward: inputs " + shape_str(inputs.shape()) + " do not match " +
                        std::to_string(steps) + " steps x " + std::to_string(lanes) + " lanes");
  }

  PrefixResult result;
  result.state.lanes = lanes;
  Tensor x = inputs;
  for (std::size_t l = 0; l < config_.layers; ++l) {
    const Tensor pre = ops::add_row(ops::matmul(x, params_.get(lstm_name(l, "w_ih"))),
                                    params_.get(lstm_name(l, "bias")));
    const Tensor& w_hh = params_.get(lstm_name(l, "w_hh"));
    Tensor hl = state.h[l], cl = state.c[l];
    std::vector<Tensor> outputs;
    outputs.reserve(steps);
    for (std::size_t t = 0; t < steps; ++t) {
      auto gates = ops::add(ops::slice(pre, 0, t * lanes, (t + 1) * lanes), ops::matmul(hl, w_hh));
      auto i = ops::sigmoid(ops::slice(gates, 1, 0, h));
      auto f = ops::sigmoid(ops::slice(gates, 1, h, 2 * h));
      auto g = ops::tanh(ops::slice(gates, 1, 2 * h, 3 * h));
      auto o = ops::sigmoid(ops::slice(gates, 1, 3 * h, 4 * h));
      cl = ops::add(ops::mul(f, cl), ops::mul(i, g));
      hl = ops::mul(o, ops::tanh(cl));
      outputs.push_back(hl);
    }
    result.state.h.push_back(hl);
    result.state.c.push_back(cl);
    x = steps == 1 ? outputs[0] : ops::concat(outputs, 0);
    if (masks && !masks->hidden.empty()) x = ops::dropout(x, masks->hidden.at(l), lanes);
  }
  result.hidden = x;
  result.query =
      ops::add_row(ops::matmul(x, params_.get("bridge.weight")), params_.get("bridge.bias"));
  return result;
}

Tensor LanguageModel::residual_transform(const Tensor& e_in, const DropoutMasks* masks) const {
  Tensor e = e_in;
  for (std::size_t j = 1; j <= config_.out_layers; ++j) {
    Tensor x = e;
    if (masks && !masks->transform.empty()) x = ops::dropout(x, masks->transform.at(j - 1), 1);
    auto g = ops::activate(
        ops::add_row(ops::matmul(x, params_.get(out_name(j, "weight"))), params_.get(out_name(j, "bias"))),
        config_.out_activation);
    e = ops::add(g, e_in);
  }
  return e;
}

Tensor LanguageModel::compositional_bias(const Tensor& e_out) const {
  auto z = ops::add_row(ops::matmul(e_out, params_.get("bias.weight")), params_.get("bias.offset"));
  return ops::reshape(ops::activate(z, config_.bias_activation), {e_out.rows()});
}

OutputLayer LanguageModel::output_layer(const Tensor& e_in, const DropoutMasks* masks) const {
  OutputLayer out;
  if (config_.compositional()) {
    out.embeddings = residual_transform(e_in, masks);
    out.bias = compositional_bias(out.embeddings);
    return out;
  }
  if (config_.head != HeadKind::lookup && e_in.rows() != vocab_.size()) {
    throw ContractError("output_layer: baseline heads need the " + std::to_string(vocab_.size()) +
                        " training-vocabulary input rows, got " + std::to_string(e_in.rows()));
  }
  switch (config_.head) {
    case HeadKind::lookup: out.embeddings = params_.get("embed.out"); break;
    case HeadKind::tied: out.embeddings = e_in; break;
    case HeadKind::bilinear: out.embeddings = ops::matmul(e_in, params_.get("bilinear.weight")); break;
    default: out.embeddings = residual_transform(e_in, masks);
  }
  out.bias = params_.get("bias.word");
  return out;
}

Tensor LanguageModel::logits(const Tensor& query, const OutputLayer& out,
                             const DropoutMasks* masks) const {
  Tensor e = out.embeddings;
  if (masks && !masks->output.empty()) e = ops::dropout(e, masks->output, 1);
  return ops::add_row(ops::matmul(query, e, true), out.bias);
}

void LanguageModel::extend_vocabulary(const Vocabulary& vocab) {
  const std::size_t old = vocab_.size();
  support_size(vocab);
  if (config_.compositional() || vocab.size() == old) {
    vocab_ = vocab;
    return;
  }
  const auto d = config_.dim(), v = vocab.size();
  const double r = config_.init_range;
  Rng& rng = params_.rng();
  auto fresh = [&](std::vector<double>& dst, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) dst.push_back(rng.uniform(-r, r));
  };

  auto in = params_.get("embed.in").data();
  std::vector<double> table(in.begin(), in.begin() + static_cast<std::ptrdiff_t>(old * d));
  fresh(table, (v - old) * d);
  table.insert(table.end(), in.end() - static_cast<std::ptrdiff_t>(d), in.end());
  params_.replace("embed.in", Tensor::from({v + 1, d}, std::move(table)));

  if (config_.head == HeadKind::lookup) {
    auto out = params_.get("embed.out").data();
    std::vector<double> rows(out.begin(), out.end());
    fresh(rows, (v - old) * d);
    params_.replace("embed.out", Tensor::from({v, d}, std::move(rows)));
  }
  auto b = params_.get("bias.word").data();
  std::vector<double> bias(b.begin(), b.end());
  fresh(bias, v - old);
  params_.replace("bias.word", Tensor::from({v}, std::move(bias)));
  vocab_ = vocab;
}

Checkpoint LanguageModel::to_checkpoint() const {
  Checkpoint ckpt;
  ckpt.header["model"] = to_json(config_);
  ckpt.header["vocab"] = {{"tokens", vocab_.tokens()}, {"freqs", vocab_.freqs()}};
  ckpt.header["rng"] = params_.rng().state();
  if (config_.compositional()) ckpt.header["lexicon"] = lexicon_to_json(lexicon_);
  for (const auto& [name, t] : params_) ckpt.tensors.emplace_back(name, t.detach());
  return ckpt;
}

LanguageModel LanguageModel::from_checkpoint(const Checkpoint& ckpt,
                                             std::shared_ptr<const Lexicon> lexicon) {
  const auto& h = ckpt.header;
  if (!h.contains("model") || !h.contains("vocab")) {
    throw InputError("checkpoint: missing model config or vocabulary");
  }
  Vocabulary vocab;
  const auto tokens = h["vocab"]["tokens"].get<std::vector<std::string>>();
  const auto freqs = h["vocab"]["freqs"].get<std::vector<std::uint64_t>>();
  if (tokens.size() != freqs.size()) throw InputError("checkpoint: corrupt vocabulary");
  for (std::size_t i = 0; i < tokens.size(); ++i) vocab.add(tokens[i], freqs[i]);

  auto config = model_config_from_json(h["model"]);
  if (!lexicon && h.contains("lexicon")) {
    lexicon = std::make_shared<const Lexicon>(
        lexicon_from_json(h["lexicon"], config.rel_limit, config.def_limit));
  }
  LanguageModel model(config, std::move(vocab), std::move(lexicon));
  for (auto& [name, t] : model.params_) {
    const Tensor* src = ckpt.find(name);
    if (!src) throw InputError("checkpoint: missing parameter '" + name + "'");
    if (src->shape() != t.shape()) {
      throw InputError("checkpoint: parameter '" + name + "' has shape " + shape_str(src->shape()) +
                       ", expected " + shape_str(t.shape()));
    }
    std::copy(src->data().begin(), src->data().end(), t.mutable_data().begin());
  }
  if (h.contains("rng")) model.params_.rng().set_state(h["rng"].get<std::string>());
  return model;
}

std::vector<double> softmax_rows(const Tensor& logits) {
  const std::size_t rows = logits.rows(), n = logits.cols();
  std::vector<double> out(rows * n);
  auto z = logits.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = z.data() + r * n;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (std::isnan(row[j])) {
        throw NumericError("softmax: NaN logit at row " + std::to_string(r) + ", column " +
                           std::to_string(j));
      }
      mx = std::max(mx, row[j]);
    }
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) total += out[r * n + j] = std::exp(row[j] - mx);
    for (std::size_t j = 0; j < n; ++j) out[r * n + j] /= total;
  }
  return out;
}

std::vector<double> next_word_distribution(std::span<const double> query, const Tensor& e_out,
                                           std::span<const double> bias) {
  const std::size_t v = e_out.rows(), d = e_out.cols();
  if (query.size() != d || bias.size() != v) {
    throw DimensionError("next_word_distribution: query [" + std::to_string(query.size()) +
                         "], embeddings " + shape_str(e_out.shape()) + ", bias [" +
                         std::to_string(bias.size()) + "]");
  }
  std::vector<double> logits(v);
  auto e = e_out.data();
  for (std::size_t i = 0; i < v; ++i) {
    double acc = bias[i];
    for (std::size_t j = 0; j < d; ++j) acc += e[i * d + j] * query[j];
    logits[i] = acc;
  }
  return softmax_rows(Tensor::from({1, v}, std::move(logits)));
}

}  // namespace groc
