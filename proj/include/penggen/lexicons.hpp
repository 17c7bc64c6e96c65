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

#include <cmath>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "penggen/common.hpp"

namespace penggen {

// ---------------------------------------------------------------------------
// word embeddings

struct EmbeddingTable {
  std::map<std::string, std::vector<double>> vectors;
  size_t dim = 0;

  const std::vector<double>* find(const std::string& word) const {
    auto it = vectors.find(word);
    return it == vectors.end() ? nullptr : &it->second;
  }
};

// Text format: "word v1 v2 ... vD", optional first header line "COUNT D".
inline EmbeddingTable load_embeddings(const std::string& path) {
  EmbeddingTable table;
  auto lines = read_lines(path);
  size_t start = 0;
  if (!lines.empty()) {
    auto head = split_ws(lines[0]);
    if (head.size() == 2) {
      try {
        (void)parse_int(head[0], path);
        table.dim = static_cast<size_t>(parse_int(head[1], path));
        start = 1;
      } catch (const ParseError&) {
        // not a header, fall through to data
      }
    }
  }
  for (size_t i = start; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    auto f = split_ws(lines[i]);
    if (f.size() < 2) {
      throw ParseError(path + ":" + std::to_string(i + 1) + ": expected word and vector");
    }
    std::vector<double> v;
    v.reserve(f.size() - 1);
    for (size_t k = 1; k < f.size(); ++k) {
      double x = parse_double(f[k], path + ":" + std::to_string(i + 1));
      if (std::isnan(x)) {
        throw ParseError(path + ":" + std::to_string(i + 1) + ": NaN embedding entry");
      }
      v.push_back(x);
    }
    if (table.dim == 0) table.dim = v.size();
    if (v.size() != table.dim) {
      throw ParseError(path + ":" + std::to_string(i + 1) + ": vector length " +
                       std::to_string(v.size()) + ", expected " + std::to_string(table.dim));
    }
    table.vectors[f[0]] = std::move(v);
  }
  return table;
}

// Zero vectors get similarity 0 so degenerate embeddings never abort scoring.
inline double cosine(const std::vector<double>& u, const std::vector<double>& v) {
  if (u.size() != v.size()) {
    throw DataError("cosine: dimension mismatch " + std::to_string(u.size()) + " vs " +
                    std::to_string(v.size()));
  }
  double dot = 0, nu = 0, nv = 0;
  for (size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  if (nu == 0 || nv == 0) return 0.0;
  return dot / (std::sqrt(nu) * std::sqrt(nv));
}

// ---------------------------------------------------------------------------
// pinyin

inline constexpr const char* kPinyinSentinel = "?";  // never matches anything, itself included

struct PinyinTable {
  std::map<std::string, std::vector<std::string>> readings;  // per character, first = default
  bool tone_sensitive = false;
};

// TSV "char<TAB>syll1[,syll2...]". Tone digits are accepted and kept verbatim.
inline PinyinTable load_pinyin(const std::string& path, bool tone_sensitive = false) {
  PinyinTable table;
  table.tone_sensitive = tone_sensitive;
  size_t line_no = 0;
  for (const auto& line : read_lines(path)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto cols = split_on(line, '\t');
    if (cols.size() != 2) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": expected char<TAB>readings");
    }
    std::vector<std::string> readings;
    for (auto& r : split_on(cols[1], ',')) {
      std::string s = trim(r);
      if (!s.empty()) readings.push_back(s);
    }
    if (readings.empty()) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": no readings for " + cols[0]);
    }
    table.readings[cols[0]] = std::move(readings);
  }
  return table;
}

inline std::string strip_tone(const std::string& syllable) {
  std::string s = syllable;
  while (!s.empty() && s.back() >= '0' && s.back() <= '9') s.pop_back();
  return s;
}

// Per-character first-reading lookup; unmapped characters give the sentinel.
inline std::vector<std::string> pinyin_of(const std::string& word, const PinyinTable& table) {
  std::vector<std::string> out;
  for (const auto& ch : utf8_chars(word)) {
    auto it = table.readings.find(ch);
    if (it == table.readings.end()) {
      out.push_back(kPinyinSentinel);
    } else {
      std::string r = it->second.front();
      out.push_back(table.tone_sensitive ? r : strip_tone(r));
    }
  }
  return out;
}

inline bool same_pronunciation(const std::string& w1, const std::string& w2,
                               const PinyinTable& table) {
  auto p1 = pinyin_of(w1, table);
  auto p2 = pinyin_of(w2, table);
  if (p1.empty() || p1.size() != p2.size()) return false;
  for (size_t i = 0; i < p1.size(); ++i) {
    if (p1[i] == kPinyinSentinel || p2[i] == kPinyinSentinel) return false;
    if (p1[i] != p2[i]) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// rhyme classes
//
// Syllables rhyme when their underlying finals fall in the same traditional
// rhyme category (a / ia / ua rhyme, an / ian / uan / üan rhyme, and so on).
// The written form is first undone: initial stripped, y/w spellings and the
// j/q/x + u convention expanded. ü is carried as 'v'.

namespace detail {

inline const std::vector<std::string>& pinyin_initials() {
  static const std::vector<std::string> kInitials = {
      "zh", "ch", "sh", "b", "p", "m", "f", "d", "t", "n", "l",
      "g",  "k",  "h",  "j", "q", "x", "r", "z", "c", "s"};
  return kInitials;
}

// Written final -> underlying final, given the initial it followed.
inline std::string underlying_final(const std::string& initial, std::string fin) {
  for (auto& c : fin) {
    if (c == ':') c = 'v';  // "u:" convention for ü
  }
  if (initial == "j" || initial == "q" || initial == "x") {
    if (!fin.empty() && fin[0] == 'u') fin[0] = 'v';  // ju = jü
  } else if (!initial.empty()) {
    if (fin == "iu") fin = "iou";
    else if (fin == "ui") fin = "uei";
    else if (fin == "un") fin = "uen";
  }
  return fin;
}

// Rhyme category of an underlying final, named by its plainest member.
inline std::string rhyme_class(const std::string& fin) {
  static const std::map<std::string, std::string> kClass = {
      {"a", "a"},      {"ia", "a"},     {"ua", "a"},
      {"o", "o"},      {"e", "o"},      {"uo", "o"},    {"io", "o"},
      {"ie", "ie"},    {"ve", "ie"},
      {"i", "i"},      {"v", "i"},
      {"u", "u"},
      {"ai", "ai"},    {"uai", "ai"},
      {"ei", "ei"},    {"uei", "ei"},
      {"ao", "ao"},    {"iao", "ao"},
      {"ou", "ou"},    {"iou", "ou"},
      {"an", "an"},    {"ian", "an"},   {"uan", "an"},  {"van", "an"},
      {"en", "en"},    {"in", "en"},    {"uen", "en"},  {"vn", "en"},
      {"ang", "ang"},  {"iang", "ang"}, {"uang", "ang"},
      {"eng", "eng"},  {"ing", "eng"},  {"ueng", "eng"}, {"ong", "eng"}, {"iong", "eng"},
      {"er", "er"}};
  auto it = kClass.find(fin);
  return it == kClass.end() ? std::string(kPinyinSentinel) : it->second;
}

}  // namespace detail

// Rhyme category of one toneless syllable; sentinel when not parseable.
inline std::string rhyme_final(const std::string& syllable) {
  std::string s = strip_tone(syllable);
  if (s.empty() || s == kPinyinSentinel) return kPinyinSentinel;

  if (s[0] == 'y') {
    std::string rest = s.substr(1);
    if (rest.empty()) return kPinyinSentinel;
    if (rest[0] == 'u') rest[0] = 'v';        // yu, yue, yuan, yun
    else if (rest[0] != 'i') rest = "i" + rest;  // ya -> ia, you -> iou, yong -> iong
    return detail::rhyme_class(rest);
  }
  if (s[0] == 'w') {
    std::string rest = s.substr(1);
    if (rest.empty()) return kPinyinSentinel;
    if (rest[0] != 'u') rest = "u" + rest;    // wa -> ua, wen -> uen
    return detail::rhyme_class(rest);
  }

  std::string initial;
  for (const auto& ini : detail::pinyin_initials()) {
    if (s.rfind(ini, 0) == 0) {
      initial = ini;
      break;
    }
  }
  std::string fin = detail::underlying_final(initial, s.substr(initial.size()));
  if (fin.empty()) return kPinyinSentinel;
  return detail::rhyme_class(fin);
}

// True iff the last syllables of both words share a rhyme category.
inline bool same_rhyme(const std::string& w1, const std::string& w2, const PinyinTable& table) {
  auto p1 = pinyin_of(w1, table);
  auto p2 = pinyin_of(w2, table);
  if (p1.empty() || p2.empty()) return false;
  std::string f1 = rhyme_final(p1.back());
  std::string f2 = rhyme_final(p2.back());
  if (f1 == kPinyinSentinel || f2 == kPinyinSentinel) return false;
  return f1 == f2;
}

// ---------------------------------------------------------------------------
// sentiment, word pairs, slang

struct SentimentLexicon {
  std::map<std::string, double> polarity;

  double of(const std::string& word) const {
    auto it = polarity.find(word);
    return it == polarity.end() ? 0.0 : it->second;
  }
};

inline SentimentLexicon load_sentiment(const std::string& path) {
  SentimentLexicon lex;
  size_t line_no = 0;
  for (const auto& line : read_lines(path)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto cols = split_on(line, '\t');
    if (cols.size() != 2) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": expected word<TAB>polarity");
    }
    lex.polarity[cols[0]] = parse_double(cols[1], path + ":" + std::to_string(line_no));
  }
  return lex;
}

// Unordered word pairs (antonyms or synonyms).
struct PairLexicon {
  std::set<std::pair<std::string, std::string>> pairs;

  void insert(const std::string& a, const std::string& b) {
    pairs.insert(a <= b ? std::make_pair(a, b) : std::make_pair(b, a));
  }
  bool contains(const std::string& a, const std::string& b) const {
    return pairs.count(a <= b ? std::make_pair(a, b) : std::make_pair(b, a)) > 0;
  }
};

inline PairLexicon load_word_pairs(const std::string& path) {
  PairLexicon lex;
  size_t line_no = 0;
  for (const auto& line : read_lines(path)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto cols = split_on(line, '\t');
    if (cols.size() != 2) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": expected w1<TAB>w2");
    }
    lex.insert(cols[0], cols[1]);
  }
  return lex;
}

struct SlangList {
  std::set<std::string> words;
  bool contains(const std::string& w) const { return words.count(w) > 0; }
};

inline SlangList load_slang(const std::string& path) {
  SlangList lex;
  for (const auto& line : read_lines(path)) {
    std::string w = trim(line);
    if (!w.empty()) lex.words.insert(w);
  }
  return lex;
}

}  // namespace penggen
