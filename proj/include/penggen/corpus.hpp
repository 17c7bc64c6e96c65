// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "penggen/common.hpp"

namespace penggen {

enum class Role { dougen, penggen };

inline std::string role_name(Role r) { return r == Role::dougen ? "dougen" : "penggen"; }

struct DialogueTurn {
  std::string dialogue_id;
  int turn_index = 0;
  Role role = Role::dougen;
  std::string text;
};

struct UtterancePair {
  TokenSeq source;     // dougen words
  TokenSeq reference;  // penggen words, the single reference
  std::string dialogue_id;
  int turn_index = 0;  // turn index of the source
};

struct CorpusSplit {
  std::vector<UtterancePair> train, dev, test;
  uint64_t seed = 0;
};

struct ExtractStats {
  size_t pairs = 0;
  size_t unpaired_dougen = 0;  // dougen turns with no following penggen turn
};

// ---------------------------------------------------------------------------
// loading

// One JSON object per line: {"dialogue_id": str, "turn": int, "role": str, "text": str}.
// Turns are grouped by dialogue_id (first-appearance order) and ordered by turn index.
inline std::vector<DialogueTurn> load_corpus(const std::string& path) {
  std::ifstream in = open_input(path);
  std::vector<DialogueTurn> turns;
  std::vector<std::string> dialogue_order;
  std::map<std::string, std::vector<DialogueTurn>> by_dialogue;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": bad JSON: " + e.what());
    }
    DialogueTurn t;
    try {
      t.dialogue_id = rec.at("dialogue_id").get<std::string>();
      t.turn_index = rec.at("turn").get<int>();
      std::string role = rec.at("role").get<std::string>();
      if (role == "dougen") {
        t.role = Role::dougen;
      } else if (role == "penggen") {
        t.role = Role::penggen;
      } else {
        throw ParseError(path + ":" + std::to_string(line_no) + ": unknown role '" + role + "'");
      }
      t.text = rec.at("text").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": missing or mistyped field: " +
                       e.what());
    }
    if (t.turn_index < 0) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": negative turn index");
    }
    auto it = by_dialogue.find(t.dialogue_id);
    if (it == by_dialogue.end()) dialogue_order.push_back(t.dialogue_id);
    by_dialogue[t.dialogue_id].push_back(std::move(t));
  }
  for (const auto& id : dialogue_order) {
    auto& dlg = by_dialogue[id];
    std::stable_sort(dlg.begin(), dlg.end(),
                     [](const DialogueTurn& a, const DialogueTurn& b) {
                       return a.turn_index < b.turn_index;
                     });
    for (size_t i = 1; i < dlg.size(); ++i) {
      if (dlg[i].turn_index <= dlg[i - 1].turn_index) {
        throw DataError("dialogue '" + id + "': turn indices not strictly increasing");
      }
      if (dlg[i].role == dlg[i - 1].role) {
        throw DataError("dialogue '" + id + "': roles do not alternate at turn " +
                        std::to_string(dlg[i].turn_index));
      }
    }
    turns.insert(turns.end(), dlg.begin(), dlg.end());
  }
  return turns;
}

// ---------------------------------------------------------------------------
// segmentation

// Greedy longest match against the lexicon, left to right over code points.
// Whitespace always splits; characters starting no lexicon word stand alone.
inline TokenSeq segment(const std::string& text, const std::set<std::string>& lexicon) {
  size_t max_word_chars = 1;
  for (const auto& w : lexicon) max_word_chars = std::max(max_word_chars, utf8_chars(w).size());

  TokenSeq out;
  for (const auto& chunk : split_ws(text)) {
    std::vector<std::string> chars = utf8_chars(chunk);
    size_t i = 0;
    while (i < chars.size()) {
      size_t best = 1;
      if (!lexicon.empty()) {
        std::string cand;
        size_t limit = std::min(max_word_chars, chars.size() - i);
        for (size_t len = 1; len <= limit; ++len) {
          cand += chars[i + len - 1];
          if (len > 1 && lexicon.count(cand)) best = len;
        }
        // length-1 matches need no lookup: a lone character is emitted either way
      }
      std::string tok;
      for (size_t k = 0; k < best; ++k) tok += chars[i + k];
      out.push_back(std::move(tok));
      i += best;
    }
  }
  return out;
}

inline std::set<std::string> load_lexicon(const std::string& path) {
  std::set<std::string> words;
  for (const auto& line : read_lines(path)) {
    std::string w = trim(line);
    if (!w.empty()) words.insert(w);
  }
  return words;
}

// ---------------------------------------------------------------------------
// pair extraction

// One pair per adjacent (dougen, penggen) turn; texts are segmented here.
inline std::vector<UtterancePair> extract_pairs(const std::vector<DialogueTurn>& turns,
                                                const std::set<std::string>& lexicon,
                                                ExtractStats* stats = nullptr) {
  std::vector<UtterancePair> pairs;
  ExtractStats local;
  for (size_t i = 0; i < turns.size(); ++i) {
    if (turns[i].role != Role::dougen) continue;
    bool paired = i + 1 < turns.size() &&
                  turns[i + 1].dialogue_id == turns[i].dialogue_id &&
                  turns[i + 1].role == Role::penggen;
    if (!paired) {
      ++local.unpaired_dougen;
      continue;
    }
    UtterancePair p;
    p.source = segment(turns[i].text, lexicon);
    p.reference = segment(turns[i + 1].text, lexicon);
    p.dialogue_id = turns[i].dialogue_id;
    p.turn_index = turns[i].turn_index;
    pairs.push_back(std::move(p));
    ++local.pairs;
  }
  if (stats) *stats = local;
  return pairs;
}

// ---------------------------------------------------------------------------
// filtering and splitting

inline std::vector<UtterancePair> filter_pairs(const std::vector<UtterancePair>& pairs,
                                               size_t max_response_words = 60,
                                               size_t min_response_words = 2) {
  if (max_response_words < min_response_words) {
    throw ConfigError("max_response_words < min_response_words");
  }
  std::vector<UtterancePair> kept;
  for (const auto& p : pairs) {
    if (p.source.empty()) continue;
    if (p.reference.size() < min_response_words || p.reference.size() > max_response_words) {
      continue;
    }
    kept.push_back(p);
  }
  return kept;
}

// Seeded partition into (train, dev, test); each part keeps the input order.
inline CorpusSplit split_corpus(const std::vector<UtterancePair>& pairs, size_t test_size,
                                size_t dev_size, uint64_t seed) {
  if (test_size + dev_size > pairs.size()) {
    throw DataError("split sizes exceed corpus: test " + std::to_string(test_size) + " + dev " +
                    std::to_string(dev_size) + " > " + std::to_string(pairs.size()));
  }
  std::vector<size_t> idx(pairs.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  Rng rng(seed);
  shuffle_seq(idx, rng);

  std::vector<size_t> test_idx(idx.begin(), idx.begin() + test_size);
  std::vector<size_t> dev_idx(idx.begin() + test_size, idx.begin() + test_size + dev_size);
  std::vector<size_t> train_idx(idx.begin() + test_size + dev_size, idx.end());
  std::sort(test_idx.begin(), test_idx.end());
  std::sort(dev_idx.begin(), dev_idx.end());
  std::sort(train_idx.begin(), train_idx.end());

  CorpusSplit out;
  out.seed = seed;
  for (size_t i : train_idx) out.train.push_back(pairs[i]);
  for (size_t i : dev_idx) out.dev.push_back(pairs[i]);
  for (size_t i : test_idx) out.test.push_back(pairs[i]);
  return out;
}

// ---------------------------------------------------------------------------
// pair files: TSV "dialogue_id<TAB>turn<TAB>source tokens<TAB>reference tokens"

inline void save_pairs(const std::string& path, const std::vector<UtterancePair>& pairs) {
  std::ofstream out = open_output(path);
  for (const auto& p : pairs) {
    out << p.dialogue_id << '\t' << p.turn_index << '\t' << join(p.source) << '\t'
        << join(p.reference) << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

inline std::vector<UtterancePair> load_pairs(const std::string& path) {
  std::vector<UtterancePair> pairs;
  size_t line_no = 0;
  for (const auto& line : read_lines(path)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cols = split_on(line, '\t');
    if (cols.size() != 4) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": expected 4 tab-separated fields");
    }
    UtterancePair p;
    p.dialogue_id = cols[0];
    p.turn_index = static_cast<int>(parse_int(cols[1], path));
    p.source = split_ws(cols[2]);
    p.reference = split_ws(cols[3]);
    pairs.push_back(std::move(p));
  }
  return pairs;
}

}  // namespace penggen
