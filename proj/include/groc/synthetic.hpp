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

#ifndef GROC_SYNTHETIC_HPP
#define GROC_SYNTHETIC_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "groc/lexicon.hpp"

namespace groc {

/// Shape of a generated corpus. Words belong to latent classes; a class-level
/// Markov chain orders them, each class marks its words with a shared
/// suffix, and the lexicon relates words of one class and glosses them with
/// the class description. Every draw comes from one seeded generator.
struct SyntheticSpec {
  std::size_t train_tokens = 200000;
  std::size_t valid_tokens = 20000;
  std::size_t test_tokens = 20000;
  std::size_t classes = 80;
  std::size_t function_classes = 12;  // small, frequent classes without suffixes
  std::size_t types = 26000;          // word types generated across all classes
  double class_zipf = 0.9;            // skew of successor choice over class rank
  double word_zipf = 0.95;            // skew within a class
  std::size_t successors = 5;         // likely next classes per class
  double coverage = 0.8;              // share of content words given lexicon entries
  std::uint64_t seed = 7;
};

struct SyntheticCorpus {
  std::string train;      // one sentence per line
  std::string valid;      // held-out words replaced by <unk>
  std::string test;       // held-out words replaced by <unk>
  std::string test_open;  // same sentences as `test`, novel words kept
  std::vector<LexiconEntry> lexicon;
};

inline constexpr const char* kUnk = "<unk>";

SyntheticCorpus make_synthetic(const SyntheticSpec& spec);

/// Writes train.txt, valid.txt, test.txt, test_open.txt and lexicon.jsonl.
void write_synthetic(const SyntheticCorpus& corpus, const std::filesystem::path& dir);

}  // namespace groc

#endif  // GROC_SYNTHETIC_HPP
