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

#include "groc/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <unordered_set>

#include "groc/errors.hpp"
#include "groc/param_store.hpp"
#include "json.hpp"

namespace groc {

namespace {

constexpr const char* kOnsets[] = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v",
                                   "z", "br", "tr", "st", "pl", "gr", "sh", "ch", "th", "cl", "dr"};
constexpr const char* kVowels[] = {"a", "e", "i", "o", "u", "ai", "ou", "ee", "oa"};
constexpr const char* kCodas[] = {"", "", "", "n", "r", "s", "l", "m", "t", "nd", "st", "rk"};

template <std::size_t N>
const char* pick(Rng& rng, const char* const (&table)[N]) {
  return table[rng.below(N)];
}

std::string syllable(Rng& rng) {
  return std::string(pick(rng, kOnsets)) + pick(rng, kVowels) + pick(rng, kCodas);
}

// Cumulative weights for sampling index i with weight (i + 1)^-s.
std::vector<double> zipf_cdf(std::size_t n, double s) {
  std::vector<double> cdf(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) cdf[i] = total += std::pow(static_cast<double>(i + 1), -s);
  for (double& c : cdf) c /= total;
  return cdf;
}

std::size_t sample(const std::vector<double>& cdf, Rng& rng) {
  const double u = rng.uniform();
  auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  return std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), cdf.size() - 1);
}

struct WordClass {
  std::vector<std::string> words;
  std::vector<double> word_cdf;
  std::vector<std::size_t> next;  // successor classes; index classes() means end of sentence
  std::vector<double> next_cdf;
  std::vector<std::string> gloss;
};

}  // namespace

SyntheticCorpus make_synthetic(const SyntheticSpec& spec) {
  if (spec.classes < 2 || spec.function_classes >= spec.classes) {
    throw InputError("synthetic: need at least one content class and one function class");
  }
  if (spec.types < spec.classes * 2) throw InputError("synthetic: too few types for the classes");
  Rng rng(spec.seed);
  const std::size_t k = spec.classes, fk = spec.function_classes;
  std::vector<WordClass> classes(k);
  std::unordered_set<std::string> used;

  auto fresh_word = [&](std::size_t syllables, const std::string& suffix) {
    for (;;) {
      std::string w;
      for (std::size_t s = 0; s < syllables; ++s) w += syllable(rng);
      w += suffix;
      if (used.insert(w).second) return w;
      ++syllables;
    }
  };

  // Function classes: a handful of short words each.
  std::size_t remaining = spec.types;
  for (std::size_t c = 0; c < fk; ++c) {
    const std::size_t n = 2 + rng.below(5);
    for (std::size_t i = 0; i < n; ++i) classes[c].words.push_back(fresh_word(1, ""));
    remaining -= n;
  }
  // Content classes: sizes grow with rank, words share a class suffix.
  std::vector<double> share(k - fk);
  for (std::size_t i = 0; i < share.size(); ++i) share[i] = std::pow(static_cast<double>(i + 1), 0.6);
  const double share_total = std::accumulate(share.begin(), share.end(), 0.0);
  for (std::size_t c = fk; c < k; ++c) {
    const auto n = std::max<std::size_t>(
        2, static_cast<std::size_t>(static_cast<double>(remaining) * share[c - fk] / share_total));
    std::string suffix = pick(rng, kVowels);
    suffix += pick(rng, kOnsets);
    if (rng.bernoulli(0.5)) suffix += pick(rng, kVowels);
    auto& words = classes[c].words;
    for (std::size_t i = 0; i < n; ++i) words.push_back(fresh_word(1 + rng.below(2), suffix));
    // Frequent words tend to be short: shorter words take the lower ranks.
    std::stable_sort(words.begin(), words.end(),
                     [](const std::string& a, const std::string& b) { return a.size() < b.size(); });
  }
  for (auto& wc : classes) wc.word_cdf = zipf_cdf(wc.words.size(), spec.word_zipf);

  // Class chain: each class prefers a few successors, biased towards low ranks;
  // content classes may end the sentence.
  const auto rank_cdf = zipf_cdf(k, spec.class_zipf);
  for (std::size_t c = 0; c < k; ++c) {
    auto& wc = classes[c];
    std::vector<double> weights;
    for (std::size_t j = 0; j < spec.successors; ++j) {
      std::size_t next = sample(rank_cdf, rng);
      if (next == c) next = (next + 1 + rng.below(k - 1)) % k;
      wc.next.push_back(next);
      weights.push_back(std::pow(0.6, static_cast<double>(j)));
    }
    if (c >= fk) {
      wc.next.push_back(k);
      weights.push_back(0.25);
    }
    double total = 0.0;
    for (double& w : weights) w = total += w;
    for (double& w : weights) w /= total;
    wc.next_cdf = std::move(weights);
  }
  // Glosses: the class's own head word plus frequent words of its successors.
  for (std::size_t c = 0; c < k; ++c) {
    auto& wc = classes[c];
    wc.gloss.push_back(wc.words[0]);
    for (std::size_t j = 0; j < 3 && j < wc.next.size(); ++j) {
      const std::size_t n = wc.next[j] < k ? wc.next[j] : c;
      wc.gloss.push_back(classes[n].words[rng.below(std::min<std::size_t>(3, classes[n].words.size()))]);
    }
  }

  std::vector<double> start_cdf = rank_cdf;
  auto generate = [&](std::size_t tokens, std::vector<std::vector<std::string>>& sentences) {
    std::size_t count = 0;
    while (count < tokens) {
      std::vector<std::string> sent;
      std::size_t c = sample(start_cdf, rng);
      while (sent.size() < 40) {
        if (c == k) break;
        sent.push_back(classes[c].words[sample(classes[c].word_cdf, rng)]);
        c = classes[c].next[sample(classes[c].next_cdf, rng)];
      }
      count += sent.size() + 1;
      sentences.push_back(std::move(sent));
    }
  };
  std::vector<std::vector<std::string>> train, valid, test;
  generate(spec.train_tokens, train);
  generate(spec.valid_tokens, valid);
  generate(spec.test_tokens, test);

  std::unordered_set<std::string> seen;
  for (const auto& s : train) seen.insert(s.begin(), s.end());
  auto render = [&](const std::vector<std::vector<std::string>>& sentences, bool unk) {
    std::string out;
    for (const auto& s : sentences) {
      for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += ' ';
        out += unk && !seen.count(s[i]) ? std::string(kUnk) : s[i];
      }
      out += '\n';
    }
    return out;
  };
  SyntheticCorpus corpus;
  corpus.train = render(train, false);
  corpus.valid = render(valid, true);
  corpus.test = render(test, true);
  corpus.test_open = render(test, false);

  // Lexicon over content words: up to three same-class relations and the
  // class gloss plus one word-specific token.
  for (std::size_t c = fk; c < k; ++c) {
    const auto& wc = classes[c];
    for (std::size_t i = 0; i < wc.words.size(); ++i) {
      if (!rng.bernoulli(spec.coverage)) continue;
      LexiconEntry e;
      e.word = wc.words[i];
      for (std::size_t j = 0; j < 3 && wc.words.size() > 1; ++j) {
        std::size_t r = sample(wc.word_cdf, rng);
        if (r == i) r = (r + 1) % wc.words.size();
        e.relations.push_back(wc.words[r]);
      }
      e.definition = wc.gloss;
      e.definition.push_back(wc.words[rng.below(wc.words.size())]);
      corpus.lexicon.push_back(std::move(e));
    }
  }
  return corpus;
}

void write_synthetic(const SyntheticCorpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto put = [&](const char* name, const std::string& text) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw InputError("synthetic: cannot write " + (dir / name).string());
    out << text;
  };
  put("train.txt", corpus.train);
  put("valid.txt", corpus.valid);
  put("test.txt", corpus.test);
  put("test_open.txt", corpus.test_open);
  std::string lines;
  for (const auto& e : corpus.lexicon) {
    nlohmann::json j{{"word", e.word}, {"relations", e.relations}, {"definition", e.definition}};
    lines += j.dump() + '\n';
  }
  put("lexicon.jsonl", lines);
}

}  // namespace groc
