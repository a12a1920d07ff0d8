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

#include "groc/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "groc/errors.hpp"

namespace groc {

TokenId Vocabulary::add(std::string_view token, std::uint64_t count) {
  auto it = ids_.find(std::string(token));
  if (it != ids_.end()) {
    freq_[it->second] += count;
    return it->second;
  }
  const TokenId id = tokens_.size();
  tokens_.emplace_back(token);
  freq_.push_back(count);
  ids_.emplace(tokens_.back(), id);
  return id;
}

std::optional<TokenId> Vocabulary::find(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

TokenId Vocabulary::id_of(std::string_view token) const {
  auto id = find(token);
  if (!id) throw InputError("vocabulary: unknown token '" + std::string(token) + "'");
  return *id;
}

void Vocabulary::write(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw InputError("vocabulary: cannot write " + path.string());
  for (std::size_t i = 0; i < tokens_.size(); ++i) out << tokens_[i] << '\t' << freq_[i] << '\n';
}

Vocabulary Vocabulary::read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("vocabulary: cannot open " + path.string());
  Vocabulary vocab;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) {
      throw InputError(path.string() + ":" + std::to_string(lineno) +
                       ": expected '<token>\\t<frequency>'");
    }
    std::uint64_t freq = 0;
    try {
      freq = std::stoull(line.substr(tab + 1));
    } catch (const std::exception&) {
      throw InputError(path.string() + ":" + std::to_string(lineno) + ": bad frequency");
    }
    const auto token = line.substr(0, tab);
    if (vocab.find(token)) {
      throw InputError(path.string() + ":" + std::to_string(lineno) + ": duplicate token '" +
                       token + "'");
    }
    vocab.add(token, freq);
  }
  return vocab;
}

std::vector<std::string> tokenize_text(std::string_view text) {
  std::vector<std::string> tokens;
  std::istringstream lines{std::string(text)};
  std::string line;
  while (std::getline(lines, line)) {
    std::istringstream words(line);
    std::string word;
    bool any = false;
    while (words >> word) {
      tokens.push_back(word);
      any = true;
    }
    if (any) tokens.emplace_back(kEos);
  }
  return tokens;
}

std::vector<std::string> read_corpus_tokens(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("corpus: cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return tokenize_text(buf.str());
}

std::string detokenize(std::span<const std::string> tokens) {
  std::string out;
  bool line_start = true;
  for (const auto& t : tokens) {
    if (t == kEos) {
      out += '\n';
      line_start = true;
      continue;
    }
    if (!line_start) out += ' ';
    out += t;
    line_start = false;
  }
  return out;
}

Vocabulary build_vocab(std::span<const std::string> tokens) {
  if (tokens.empty()) throw InputError("build_vocab: empty corpus");
  Vocabulary vocab;
  for (const auto& t : tokens) vocab.add(t);
  return vocab;
}

Vocabulary union_vocab(const Vocabulary& train, const Vocabulary& test) {
  Vocabulary out = train;
  for (const auto& t : test.tokens()) {
    if (!out.find(t)) out.add(t, 0);
  }
  return out;
}

TokenStream encode(std::span<const std::string> tokens, const Vocabulary& vocab,
                   std::string source) {
  TokenStream stream;
  stream.source = std::move(source);
  stream.ids.reserve(tokens.size());
  for (const auto& t : tokens) stream.ids.push_back(vocab.id_of(t));
  return stream;
}

BatchPlan::BatchPlan(const TokenStream& stream, std::size_t batch_size, std::size_t bptt)
    : batch_size_(batch_size), bptt_(bptt), lane_len_(0) {
  if (batch_size == 0 || bptt == 0) throw InputError("batchify: batch size and bptt must be positive");
  if (stream.size() < batch_size * (bptt + 1)) {
    throw InputError("batchify: stream of " + std::to_string(stream.size()) +
                     " tokens is too short for " + std::to_string(batch_size) + " lanes of " +
                     std::to_string(bptt + 1) + " tokens");
  }
  lane_len_ = stream.size() / batch_size;
  ids_.assign(stream.ids.begin(),
              stream.ids.begin() + static_cast<std::ptrdiff_t>(lane_len_ * batch_size));
}

std::span<const TokenId> BatchPlan::lane(std::size_t b) const {
  return std::span<const TokenId>(ids_).subspan(b * lane_len_, lane_len_);
}

Window BatchPlan::window(std::size_t index) const {
  if (index >= num_windows()) throw ContractError("BatchPlan: window index out of range");
  Window w;
  w.steps = bptt_;
  w.lanes = batch_size_;
  w.inputs.resize(bptt_ * batch_size_);
  w.targets.resize(bptt_ * batch_size_);
  const std::size_t start = index * bptt_;
  for (std::size_t t = 0; t < bptt_; ++t) {
    for (std::size_t b = 0; b < batch_size_; ++b) {
      const auto l = lane(b);
      w.inputs[t * batch_size_ + b] = l[start + t];
      w.targets[t * batch_size_ + b] = l[start + t + 1];
    }
  }
  return w;
}

BatchPlan batchify(const TokenStream& stream, std::size_t batch_size, std::size_t bptt) {
  return BatchPlan(stream, batch_size, bptt);
}

std::size_t bin_of(std::uint64_t freq, std::span<const std::uint64_t> lower_edges) {
  auto it = std::upper_bound(lower_edges.begin(), lower_edges.end(), freq);
  if (it == lower_edges.begin()) return 0;
  return static_cast<std::size_t>(it - lower_edges.begin()) - 1;
}

std::vector<std::vector<TokenId>> frequency_bins(const Vocabulary& vocab,
                                                 std::span<const std::uint64_t> lower_edges) {
  if (lower_edges.empty()) throw ContractError("frequency_bins: no bin edges");
  for (std::size_t i = 1; i < lower_edges.size(); ++i) {
    if (lower_edges[i] <= lower_edges[i - 1]) {
      throw ContractError("frequency_bins: edges must be strictly increasing");
    }
  }
  std::vector<std::vector<TokenId>> bins(lower_edges.size());
  for (TokenId id = 0; id < vocab.size(); ++id) bins[bin_of(vocab.freq(id), lower_edges)].push_back(id);
  return bins;
}

}  // namespace groc
