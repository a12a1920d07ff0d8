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

#include "groc/evaluation.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <limits>

#include "groc/errors.hpp"

namespace groc {

VocabMode parse_vocab_mode(std::string_view name) {
  if (name == "closed") return VocabMode::closed;
  if (name == "union") return VocabMode::union_;
  throw InputError("unknown vocabulary mode '" + std::string(name) + "'");
}

std::string_view vocab_mode_name(VocabMode mode) {
  return mode == VocabMode::closed ? "closed" : "union";
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json j{{"corpus", corpus},
                   {"vocab_mode", vocab_mode_name(mode)},
                   {"tokens", tokens},
                   {"oov_percent", oov_percent},
                   {"zero_prob_tokens", zero_prob_tokens},
                   {"infinite", infinite()}};
  j["mean_nll"] = infinite() ? nlohmann::json(nullptr) : nlohmann::json(mean_nll);
  j["perplexity"] = infinite() ? nlohmann::json(nullptr) : nlohmann::json(perplexity);
  if (cache) j["cache"] = *cache;
  return j;
}

namespace {

// Neumaier summation keeps the mean independent of window boundaries.
class Accumulator {
 public:
  void add(double x) {
    const double t = sum_ + x;
    comp_ += std::abs(sum_) >= std::abs(x) ? (sum_ - t) + x : (x - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

double row_log_normalizer(const double* z, std::size_t n) {
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < n; ++j) mx = std::max(mx, z[j]);
  double s = 0.0;
  for (std::size_t j = 0; j < n; ++j) s += std::exp(z[j] - mx);
  return mx + std::log(s);
}

}  // namespace

EvalReport perplexity(const LanguageModel& model, const TokenStream& stream, const Vocabulary& vocab,
                      const EvalOptions& opt) {
  if (stream.size() < 2) throw InputError("perplexity: stream needs at least two tokens");
  if (opt.bptt == 0) throw ContractError("perplexity: bptt must be positive");
  if (opt.cache != CacheKind::none) opt.cache_config.validate();
  const std::size_t v = vocab.size();
  for (TokenId id : stream.ids) {
    if (id >= v) throw ContractError("perplexity: token id outside the evaluation vocabulary");
  }
  const std::size_t support = model.support_size(vocab);

  std::vector<bool> unseen(v);
  bool any_unseen = false;
  for (TokenId id = 0; id < v; ++id) any_unseen |= unseen[id] = vocab.freq(id) == 0;
  const bool downweight = any_unseen && (opt.cache != CacheKind::none ||
                                         opt.cache_config.downweight_without_cache);
  const bool adapt = opt.smooth || downweight || opt.cache != CacheKind::none;

  NoGradGuard no_grad;
  const Tensor table = model.input_matrix(vocab.tokens());
  const OutputLayer out =
      model.output_layer(support == v ? table : ops::slice(table, 0, 0, support), nullptr);
  LstmState state = model.initial_state(1);
  CacheState cache(opt.cache_config.capacity);

  EvalReport report;
  report.corpus = opt.corpus.empty() ? stream.source : opt.corpus;
  report.mode = opt.mode;
  if (opt.cache != CacheKind::none) {
    auto echo = to_json(opt.cache_config);
    echo["kind"] = cache_kind_name(opt.cache);
    report.cache = echo;
  }
  const std::size_t n = stream.size() - 1;
  report.tokens = n;
  report.losses.reserve(n);
  std::size_t oov = 0;
  Accumulator total;

  std::vector<double> p(v);
  for (std::size_t pos = 0; pos < n; pos += opt.bptt) {
    const std::size_t steps = std::min(opt.bptt, n - pos);
    std::span<const TokenId> inputs(stream.ids.data() + pos, steps);
    auto pre = model.prefix_forward(ops::gather_rows(table, inputs), steps, state, nullptr);
    state = pre.state;
    const Tensor logits = model.logits(pre.query, out, nullptr);
    auto z = logits.data();
    auto hidden = pre.hidden.data();
    const std::size_t hdim = pre.hidden.cols();

    for (std::size_t t = 0; t < steps; ++t) {
      const TokenId target = stream.ids[pos + t + 1];
      if (unseen[target]) ++oov;
      const double* row = z.data() + t * support;
      const double lse = row_log_normalizer(row, support);
      double loss;
      if (!adapt) {
        loss = target < support ? lse - row[target] : std::numeric_limits<double>::infinity();
      } else {
        std::fill(p.begin(), p.end(), 0.0);
        for (std::size_t j = 0; j < support; ++j) p[j] = std::exp(row[j] - lse);
        if (opt.smooth) p = uniform_smooth(p, opt.uniform_eps);
        if (downweight) p = downweight_unseen(p, unseen, opt.cache_config.dw);
        std::span<const double> h(hidden.data() + t * hdim, hdim);
        if (opt.cache == CacheKind::unigram && !cache.empty()) {
          p = interpolate(p, unigram_cache_prob(cache, v), opt.cache_config.lambda);
        } else if (opt.cache == CacheKind::neural && !cache.entries().empty()) {
          p = interpolate(p, neural_cache_prob(cache, h, opt.cache_config.theta, v),
                          opt.cache_config.lambda);
        }
        if (opt.cache != CacheKind::none) {
          cache.observe(target, opt.cache == CacheKind::neural ? h : std::span<const double>{});
        }
        loss = p[target] > 0.0 ? -std::log(p[target]) : std::numeric_limits<double>::infinity();
      }
      if (std::isnan(loss)) throw NumericError("perplexity: NaN loss at token " + std::to_string(pos + t + 1));
      if (std::isinf(loss)) {
        ++report.zero_prob_tokens;
      } else {
        total.add(loss);
      }
      report.losses.push_back(loss);
    }
  }
  report.oov_percent = 100.0 * static_cast<double>(oov) / static_cast<double>(n);
  if (report.infinite()) {
    report.mean_nll = report.perplexity = std::numeric_limits<double>::infinity();
  } else {
    report.mean_nll = total.value() / static_cast<double>(n);
    report.perplexity = std::exp(report.mean_nll);
  }
  return report;
}

double oov_percent(const Vocabulary& train, std::span<const std::string> tokens) {
  if (tokens.empty()) return 0.0;
  std::size_t oov = 0;
  for (const auto& t : tokens) {
    auto id = train.find(t);
    if (!id || train.freq(*id) == 0) ++oov;
  }
  return 100.0 * static_cast<double>(oov) / static_cast<double>(tokens.size());
}

std::span<const TokenId> targets_of(const TokenStream& stream) {
  if (stream.ids.empty()) return {};
  return std::span<const TokenId>(stream.ids).subspan(1);
}

void write_losses(const std::filesystem::path& path, std::span<const double> losses) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("losses: cannot write " + path.string());
  auto put = [&](std::uint64_t bits) {
    char bytes[8];
    for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
    out.write(bytes, 8);
  };
  put(losses.size());
  for (double x : losses) put(std::bit_cast<std::uint64_t>(x));
  if (!out) throw InputError("losses: failed writing " + path.string());
}

std::vector<double> read_losses(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("losses: cannot open " + path.string());
  auto get = [&] {
    unsigned char bytes[8];
    if (!in.read(reinterpret_cast<char*>(bytes), 8)) {
      throw InputError("losses: truncated file " + path.string());
    }
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
    return bits;
  };
  const std::uint64_t n = get();
  std::vector<double> losses;
  losses.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(n, 1u << 24)));
  for (std::uint64_t i = 0; i < n; ++i) losses.push_back(std::bit_cast<double>(get()));
  if (in.peek() != std::char_traits<char>::eof()) {
    throw InputError("losses: trailing bytes in " + path.string());
  }
  return losses;
}

double median(std::vector<double> values) {
  if (values.empty()) throw ContractError("median: no values");
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  const double hi = values[mid];
  if (values.size() % 2) return hi;
  const double lo = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return lo / 2 + hi / 2;
}

nlohmann::json BinReport::to_json() const {
  auto bins_json = nlohmann::json::array();
  for (const auto& b : bins) {
    bins_json.push_back({{"lower", b.lower},
                         {"upper", b.upper ? nlohmann::json(*b.upper) : nlohmann::json(nullptr)},
                         {"words", b.words},
                         {"tokens", b.tokens},
                         {"median", b.median ? nlohmann::json(*b.median) : nlohmann::json(nullptr)}});
  }
  return {{"edges", edges}, {"bins", bins_json}};
}

BinReport median_loss_diff_by_bin(std::span<const double> loss_a, std::span<const double> loss_b,
                                  std::span<const TokenId> targets, const Vocabulary& vocab,
                                  std::span<const std::uint64_t> lower_edges) {
  if (loss_a.size() != loss_b.size() || loss_a.size() != targets.size()) {
    throw ContractError("bins: loss lists and targets differ in length (" +
                        std::to_string(loss_a.size()) + ", " + std::to_string(loss_b.size()) +
                        ", " + std::to_string(targets.size()) + ")");
  }
  const auto groups = frequency_bins(vocab, lower_edges);
  BinReport report;
  report.edges.assign(lower_edges.begin(), lower_edges.end());
  std::vector<std::vector<double>> diffs(groups.size());
  for (std::size_t i = 0; i < targets.size(); ++i) {
    diffs[bin_of(vocab.freq(targets[i]), lower_edges)].push_back(loss_a[i] - loss_b[i]);
  }
  for (std::size_t b = 0; b < groups.size(); ++b) {
    BinStat s;
    s.lower = b == 0 ? 0 : lower_edges[b];
    if (b + 1 < groups.size()) s.upper = lower_edges[b + 1] - 1;
    s.words = groups[b].size();
    s.tokens = diffs[b].size();
    if (!diffs[b].empty()) s.median = median(std::move(diffs[b]));
    report.bins.push_back(s);
  }
  return report;
}

SweepMode parse_sweep_mode(std::string_view name) {
  if (name == "inference") return SweepMode::inference;
  if (name == "retrain") return SweepMode::retrain;
  throw InputError("unknown sweep mode '" + std::string(name) + "'");
}

std::string_view sweep_mode_name(SweepMode mode) {
  return mode == SweepMode::inference ? "inference" : "retrain";
}

std::vector<SweepPoint> coverage_sweep(const Lexicon& lexicon, std::span<const double> fractions,
                                       std::uint64_t seed,
                                       const std::function<EvalReport(const Lexicon&)>& evaluate) {
  std::vector<SweepPoint> points;
  for (double f : fractions) {
    Lexicon masked = mask_coverage(lexicon, f, seed);
    SweepPoint pt;
    pt.fraction = f;
    pt.covered_words = masked.covered_words().size();
    pt.report = evaluate(masked);
    points.push_back(std::move(pt));
  }
  return points;
}

}  // namespace groc
