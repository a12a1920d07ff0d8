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

#ifndef GROC_LEXICON_HPP
#define GROC_LEXICON_HPP

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "groc/corpus.hpp"
#include "json.hpp"

namespace groc {

/// Lexicon forms of one word. Multiword lemmas are already split into tokens.
struct LexiconEntry {
  std::string word;
  std::vector<std::string> relations;
  std::vector<std::string> definition;

  bool empty() const { return relations.empty() && definition.empty(); }
};

struct Forms {
  std::vector<std::string> relations;
  std::vector<std::string> definition;
};

/// Which forms mask_coverage removes from the words it drops.
enum class MaskMode { joint, relations, definitions };

class Lexicon {
 public:
  static constexpr std::size_t kDefaultRelLimit = 3;
  static constexpr std::size_t kDefaultDefLimit = 10;

  explicit Lexicon(std::size_t rel_limit = kDefaultRelLimit,
                   std::size_t def_limit = kDefaultDefLimit)
      : rel_limit_(rel_limit), def_limit_(def_limit) {}

  /// Adds or replaces an entry; returns true if the word was already present.
  bool insert(LexiconEntry entry);

  /// Stored forms truncated to the limits, in file order. Absent words give
  /// two empty lists.
  Forms lookup(std::string_view word) const;
  const LexiconEntry* find(std::string_view word) const;

  std::size_t rel_limit() const { return rel_limit_; }
  std::size_t def_limit() const { return def_limit_; }
  void set_limits(std::size_t rel_limit, std::size_t def_limit) {
    rel_limit_ = rel_limit;
    def_limit_ = def_limit;
  }

  std::size_t size() const { return entries_.size(); }
  const std::map<std::string, LexiconEntry, std::less<>>& entries() const { return entries_; }

  /// Sorted words with at least one relation or definition token.
  std::vector<std::string> covered_words() const;

  /// Non-fatal diagnostics gathered while loading (duplicate headwords).
  const std::vector<std::string>& warnings() const { return warnings_; }
  void add_warning(std::string message) { warnings_.push_back(std::move(message)); }

 private:
  std::size_t rel_limit_;
  std::size_t def_limit_;
  std::map<std::string, LexiconEntry, std::less<>> entries_;
  std::vector<std::string> warnings_;
};

/// Lowercases and splits a lemma on '_' into tokens; empty pieces are dropped.
std::vector<std::string> split_lemma(std::string_view lemma);

/// Parses JSON Lines with keys word, relations and definition. Blank lines
/// are skipped; a malformed line throws InputError naming source:line.
Lexicon parse_lexicon(std::istream& in, const std::string& source = "<stream>",
                      std::size_t rel_limit = Lexicon::kDefaultRelLimit,
                      std::size_t def_limit = Lexicon::kDefaultDefLimit);
Lexicon load_lexicon(const std::filesystem::path& path,
                     std::size_t rel_limit = Lexicon::kDefaultRelLimit,
                     std::size_t def_limit = Lexicon::kDefaultDefLimit);

/// Array of {word, relations, definition} objects in headword order, the
/// same keys as the JSONL format. Used to make checkpoints self-contained.
nlohmann::json lexicon_to_json(const Lexicon& lex);
Lexicon lexicon_from_json(const nlohmann::json& j, std::size_t rel_limit = Lexicon::kDefaultRelLimit,
                          std::size_t def_limit = Lexicon::kDefaultDefLimit);

/// Keeps llround(keep_fraction * n) of the n covered words, chosen by a
/// seeded shuffle of the sorted covered set, so smaller fractions under the
/// same seed keep nested subsets. Dropped words lose the forms named by `mode`.
Lexicon mask_coverage(const Lexicon& lex, double keep_fraction, std::uint64_t seed,
                      MaskMode mode = MaskMode::joint);

/// Removes every relation and/or definition, for form ablations.
Lexicon strip_forms(const Lexicon& lex, bool keep_relations, bool keep_definitions);

struct CoverageStats {
  std::size_t types = 0;
  std::size_t with_relations = 0;
  std::size_t with_definition = 0;
  std::size_t with_any = 0;

  double relational_pct() const { return pct(with_relations); }
  double definitional_pct() const { return pct(with_definition); }
  double any_pct() const { return pct(with_any); }

 private:
  double pct(std::size_t n) const { return types ? 100.0 * double(n) / double(types) : 0.0; }
};

/// Coverage over vocabulary types, eos excluded.
CoverageStats coverage(const Lexicon& lex, const Vocabulary& vocab);

}  // namespace groc

#endif  // GROC_LEXICON_HPP
