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

#include "groc/encoders.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_map>

#include "groc/errors.hpp"

namespace groc {

std::vector<std::size_t> EncoderConfig::filter_counts() const {
  if (!filters.empty()) return filters;
  const std::size_t total = std::accumulate(widths.begin(), widths.end(), std::size_t{0});
  std::vector<std::size_t> counts(widths.size());
  std::size_t used = 0;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    counts[i] = dim * widths[i] / total;
    used += counts[i];
  }
  for (std::size_t k = 0; used < dim; ++k, ++used) ++counts[widths.size() - 1 - k % widths.size()];
  // Every width keeps at least one filter; validate() guarantees dim >= widths.
  for (auto& c : counts) {
    if (c == 0) {
      --*std::max_element(counts.begin(), counts.end());
      c = 1;
    }
  }
  return counts;
}

std::size_t EncoderConfig::max_width() const {
  return widths.empty() ? 1 : *std::max_element(widths.begin(), widths.end());
}

void EncoderConfig::validate() const {
  if (dim == 0 || char_dim == 0) throw InputError("encoder: dim and char_dim must be positive");
  if (widths.empty()) throw InputError("encoder: at least one filter width is required");
  for (auto w : widths) {
    if (w == 0) throw InputError("encoder: filter widths must be positive");
  }
  if (!filters.empty()) {
    if (filters.size() != widths.size()) {
      throw InputError("encoder: filters and widths must have equal length");
    }
    if (std::accumulate(filters.begin(), filters.end(), std::size_t{0}) != dim) {
      throw InputError("encoder: filter counts must sum to dim");
    }
  }
  if (dim < widths.size() && filters.empty()) {
    throw InputError("encoder: dim is smaller than the number of filter widths");
  }
}

CharBatch encode_chars(std::span<const std::string> words, std::size_t min_length) {
  CharBatch batch;
  for (const auto& w : words) {
    if (w.empty()) throw InputError("surface encoder: empty word");
    batch.ids.push_back(kBowChar);
    for (unsigned char ch : w) batch.ids.push_back(ch);
    batch.ids.push_back(kEowChar);
    std::size_t len = w.size() + 2;
    for (; len < min_length; ++len) batch.ids.push_back(kPadChar);
    batch.segments.push(len);
  }
  return batch;
}

SurfaceEncoder::SurfaceEncoder(EncoderConfig config) : config_(std::move(config)) {
  config_.validate();
}

void SurfaceEncoder::register_params(ParamStore& params, double init_range) const {
  const auto d = config_.dim;
  params.add("enc.char_embed", {kCharInventory, config_.char_dim}, init_range);
  const auto counts = config_.filter_counts();
  for (std::size_t i = 0; i < config_.widths.size(); ++i) {
    const auto w = std::to_string(config_.widths[i]);
    params.add("enc.conv" + w + ".weight", {counts[i], config_.widths[i], config_.char_dim},
               init_range);
    params.add("enc.conv" + w + ".bias", {counts[i]}, init_range);
  }
  for (std::size_t l = 0; l < config_.highway_layers; ++l) {
    const auto p = "enc.highway" + std::to_string(l);
    params.add(p + ".gate.weight", {d, d}, init_range);
    params.add(p + ".gate.bias", {d}, init_range);
    params.add(p + ".transform.weight", {d, d}, init_range);
    params.add(p + ".transform.bias", {d}, init_range);
  }
}

std::size_t SurfaceEncoder::parameter_count() const {
  const auto d = config_.dim;
  std::size_t n = kCharInventory * config_.char_dim;
  const auto counts = config_.filter_counts();
  for (std::size_t i = 0; i < counts.size(); ++i) {
    n += counts[i] * config_.widths[i] * config_.char_dim + counts[i];
  }
  return n + config_.highway_layers * 2 * (d * d + d);
}

Tensor SurfaceEncoder::encode(const ParamStore& params, const CharBatch& chars) const {
  const Tensor x = ops::gather_rows(params.get("enc.char_embed"), chars.ids);
  std::vector<Tensor> pooled;
  for (auto width : config_.widths) {
    const auto w = std::to_string(width);
    // tanh is monotone, so pooling before it gives the same features
    pooled.push_back(ops::tanh(ops::conv1d_max_pool(x, chars.segments,
                                                    params.get("enc.conv" + w + ".weight"),
                                                    params.get("enc.conv" + w + ".bias"))));
  }
  Tensor h = pooled.size() == 1 ? pooled[0] : ops::concat(pooled, 1);
  for (std::size_t l = 0; l < config_.highway_layers; ++l) {
    const auto p = "enc.highway" + std::to_string(l);
    auto gate = ops::sigmoid(ops::add_row(ops::matmul(h, params.get(p + ".gate.weight")),
                                          params.get(p + ".gate.bias")));
    auto transform = ops::relu(ops::add_row(
        ops::matmul(h, params.get(p + ".transform.weight")), params.get(p + ".transform.bias")));
    h = ops::highway(gate, transform, h);
  }
  return h;
}

Tensor SurfaceEncoder::encode(const ParamStore& params, std::span<const std::string> words) const {
  return encode(params, encode_chars(words, config_.max_width()));
}

EmbeddingPlan plan_embeddings(std::span<const std::string> words, const Lexicon& lex,
                              const EncoderConfig& config) {
  EmbeddingPlan plan;
  plan.words.assign(words.begin(), words.end());
  std::unordered_map<std::string, std::size_t> row_of;
  auto row = [&](const std::string& s) {
    auto [it, inserted] = row_of.emplace(s, plan.surfaces.size());
    if (inserted) plan.surfaces.push_back(s);
    return it->second;
  };
  for (const auto& w : plan.words) plan.self_rows.push_back(row(w));
  for (const auto& w : plan.words) {
    const auto forms = lex.lookup(w);
    std::size_t nr = 0;
    std::size_t nd = 0;
    if (config.use_relations) {
      for (const auto& t : forms.relations) plan.rel_rows.push_back(row(t));
      nr = forms.relations.size();
    }
    if (config.use_definitions) {
      for (const auto& t : forms.definition) plan.def_rows.push_back(row(t));
      nd = forms.definition.size();
    }
    plan.rel_segments.push(nr);
    plan.def_segments.push(nd);
  }
  plan.chars = encode_chars(plan.surfaces, config.max_width());
  return plan;
}

void GroundedEmbedder::register_params(ParamStore& params, double init_range) const {
  surface_.register_params(params, init_range);
  params.add("enc.proj", {3 * config().dim, config().dim}, init_range);
}

std::size_t GroundedEmbedder::parameter_count() const {
  return surface_.parameter_count() + 3 * config().dim * config().dim;
}

ComposedEmbedding GroundedEmbedder::compose(const ParamStore& params,
                                            const EmbeddingPlan& plan) const {
  ComposedEmbedding out;
  const Tensor table = surface_.encode(params, plan.chars);
  out.surface = ops::gather_rows(table, plan.self_rows);
  out.relational = ops::segment_mean(ops::gather_rows(table, plan.rel_rows), plan.rel_segments);
  out.definitional = ops::segment_mean(ops::gather_rows(table, plan.def_rows), plan.def_segments);
  out.projected = ops::matmul(ops::concat({out.surface, out.relational, out.definitional}, 1),
                              params.get("enc.proj"));
  return out;
}

Tensor GroundedEmbedder::embed(const ParamStore& params, const EmbeddingPlan& plan) const {
  return compose(params, plan).projected;
}

}  // namespace groc
