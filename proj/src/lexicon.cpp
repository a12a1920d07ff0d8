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

#include "groc/lexicon.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>

#include "groc/errors.hpp"
#include "groc/param_store.hpp"
#include "json.hpp"

namespace groc {

bool Lexicon::insert(LexiconEntry entry) {
  auto it = entries_.find(entry.word);
  if (it != entries_.end()) {
    it->second = std::move(entry);
    return true;
  }
  auto key = entry.word;
  entries_.emplace(std::move(key), std::move(entry));
  return false;
}

const LexiconEntry* Lexicon::find(std::string_view word) const {
  auto it = entries_.find(word);
  return it == entries_.end() ? nullptr : &it->second;
}

Forms Lexicon::lookup(std::string_view word) const {
  Forms forms;
  const auto* e = find(word);
  if (!e) return forms;
  const auto nr = std::min(rel_limit_, e->relations.size());
  const auto nd = std::min(def_limit_, e->definition.size());
  forms.relations.assign(e->relations.begin(), e->relations.begin() + static_cast<std::ptrdiff_t>(nr));
  forms.definition.assign(e->definition.begin(), e->definition.begin() + static_cast<std::ptrdiff_t>(nd));
  return forms;
}

std::vector<std::string> Lexicon::covered_words() const {
  std::vector<std::string> out;
  for (const auto& [word, entry] : entries_) {
    if (!entry.empty()) out.push_back(word);
  }
  return out;
}

std::vector<std::string> split_lemma(std::string_view lemma) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : lemma) {
    if (ch == '_') {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

namespace {

std::vector<std::string> token_list(const nlohmann::json& obj, const char* key,
                                    const std::string& where) {
  std::vector<std::string> out;
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return out;
  if (!it->is_array()) throw InputError(where + ": '" + key + "' must be an array of strings");
  for (const auto& item : *it) {
    if (!item.is_string()) throw InputError(where + ": '" + key + "' must be an array of strings");
    for (auto& tok : split_lemma(item.get<std::string>())) out.push_back(std::move(tok));
  }
  return out;
}

}  // namespace

Lexicon parse_lexicon(std::istream& in, const std::string& source, std::size_t rel_limit,
                      std::size_t def_limit) {
  Lexicon lex(rel_limit, def_limit);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = source + ":" + std::to_string(lineno);
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw InputError(where + ": invalid JSON: " + e.what());
    }
    if (!obj.is_object()) throw InputError(where + ": expected a JSON object");
    auto w = obj.find("word");
    if (w == obj.end() || !w->is_string() || w->get<std::string>().empty()) {
      throw InputError(where + ": missing or empty 'word'");
    }
    LexiconEntry entry;
    for (char ch : w->get<std::string>()) {
      entry.word.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    }
    entry.relations = token_list(obj, "relations", where);
    entry.definition = token_list(obj, "definition", where);
    const auto word = entry.word;
    if (lex.insert(std::move(entry))) {
      lex.add_warning(where + ": duplicate entry for '" + word + "', keeping the last one");
    }
  }
  return lex;
}

nlohmann::json lexicon_to_json(const Lexicon& lex) {
  auto out = nlohmann::json::array();
  for (const auto& [word, e] : lex.entries()) {
    out.push_back({{"word", word}, {"relations", e.relations}, {"definition", e.definition}});
  }
  return out;
}

Lexicon lexicon_from_json(const nlohmann::json& j, std::size_t rel_limit, std::size_t def_limit) {
  if (!j.is_array()) throw InputError("lexicon: expected an array of entries");
  Lexicon lex(rel_limit, def_limit);
  try {
    for (const auto& e : j) {
      lex.insert({e.at("word").get<std::string>(), e.at("relations").get<std::vector<std::string>>(),
                  e.at("definition").get<std::vector<std::string>>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("lexicon: malformed entry: ") + e.what());
  }
  return lex;
}

Lexicon load_lexicon(const std::filesystem::path& path, std::size_t rel_limit,
                     std::size_t def_limit) {
  std::ifstream in(path);
  if (!in) throw InputError("lexicon: cannot open " + path.string());
  return parse_lexicon(in, path.string(), rel_limit, def_limit);
}

Lexicon mask_coverage(const Lexicon& lex, double keep_fraction, std::uint64_t seed,
                      MaskMode mode) {
  if (!(keep_fraction >= 0.0 && keep_fraction <= 1.0)) {
    throw ContractError("mask_coverage: keep_fraction must lie in [0, 1]");
  }
  auto words = lex.covered_words();
  Rng rng(seed);
  for (std::size_t i = words.size(); i > 1; --i) {
    std::swap(words[i - 1], words[rng.below(i)]);
  }
  const auto keep = static_cast<std::size_t>(std::llround(keep_fraction * double(words.size())));

  Lexicon out(lex.rel_limit(), lex.def_limit());
  for (const auto& [word, entry] : lex.entries()) out.insert(entry);
  for (std::size_t i = keep; i < words.size(); ++i) {
    LexiconEntry entry = *lex.find(words[i]);
    if (mode != MaskMode::definitions) entry.relations.clear();
    if (mode != MaskMode::relations) entry.definition.clear();
    out.insert(std::move(entry));
  }
  return out;
}

Lexicon strip_forms(const Lexicon& lex, bool keep_relations, bool keep_definitions) {
  Lexicon out(lex.rel_limit(), lex.def_limit());
  for (const auto& [word, entry] : lex.entries()) {
    LexiconEntry e = entry;
    if (!keep_relations) e.relations.clear();
    if (!keep_definitions) e.definition.clear();
    out.insert(std::move(e));
  }
  return out;
}

CoverageStats coverage(const Lexicon& lex, const Vocabulary& vocab) {
  CoverageStats stats;
  for (const auto& token : vocab.tokens()) {
    if (token == kEos) continue;
    ++stats.types;
    auto forms = lex.lookup(token);
    const bool rel = !forms.relations.empty();
    const bool def = !forms.definition.empty();
    stats.with_relations += rel;
    stats.with_definition += def;
    stats.with_any += rel || def;
  }
  return stats;
}

}  // namespace groc
