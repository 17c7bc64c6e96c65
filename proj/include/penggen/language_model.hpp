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
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "penggen/common.hpp"

namespace penggen {

inline constexpr const char* kBos = "<s>";
inline constexpr const char* kEos = "</s>";
inline constexpr const char* kUnk = "<unk>";

// N-grams are counted only in windows that end at a predicted position: the
// start marker is context, never a target; the end marker is always a target.
// Scoring interpolates each maximum-likelihood level with the next shorter
// one (weight mu on the longer level), bottoming out in a uniform floor over
// the surface vocabulary plus the unknown word, so every query has positive
// probability.
struct NGramModel {
  int order = 4;
  double mu = 0.75;
  std::set<std::string> vocab;  // surface types seen in training
  // counts[n]: space-joined n-gram -> count, n = 1..order (index 0 unused)
  std::vector<std::map<std::string, long long>> counts;
  // histories[k]: space-joined k-token context -> predictions seen after it
  std::vector<std::map<std::string, long long>> histories;

  double uniform_floor() const { return 1.0 / static_cast<double>(vocab.size() + 1); }
};

namespace detail {

// histories are the per-context totals of the counts one level up
inline void rebuild_histories(NGramModel& m) {
  m.histories.assign(m.order, {});
  for (int n = 1; n <= m.order; ++n) {
    for (const auto& [gram, c] : m.counts[n]) {
      size_t cut = gram.rfind(' ');
      std::string h = cut == std::string::npos ? std::string() : gram.substr(0, cut);
      m.histories[n - 1][h] += c;
    }
  }
}

}  // namespace detail

inline NGramModel train_lm(const std::vector<TokenSeq>& sentences, int order = 4,
                           double mu = 0.75) {
  if (order < 1 || order > 4) throw ConfigError("language model order must be 1..4");
  if (!(mu > 0.0 && mu < 1.0)) throw ConfigError("interpolation weight must lie in (0,1)");
  if (sentences.empty()) throw DataError("language model training needs sentences");

  NGramModel m;
  m.order = order;
  m.mu = mu;
  m.counts.assign(order + 1, {});
  for (const auto& sent : sentences) {
    for (const auto& w : sent) m.vocab.insert(w);
    TokenSeq padded(order - 1, kBos);
    padded.insert(padded.end(), sent.begin(), sent.end());
    padded.push_back(kEos);
    for (size_t pos = order - 1; pos < padded.size(); ++pos) {
      std::string gram;
      for (int n = 1; n <= order; ++n) {
        gram = n == 1 ? padded[pos] : padded[pos - n + 1] + " " + gram;
        m.counts[n][gram] += 1;
      }
    }
  }
  detail::rebuild_histories(m);
  return m;
}

namespace detail {

inline std::string map_target(const NGramModel& m, const std::string& w) {
  if (w == kEos || m.vocab.count(w)) return w;
  return kUnk;
}

inline std::string map_context(const NGramModel& m, const std::string& w) {
  if (w == kBos || m.vocab.count(w)) return w;
  return kUnk;
}

}  // namespace detail

// p(w | history), recursively interpolated. history may be any length; only
// its last order-1 tokens matter and a shorter history starts lower.
inline double cond_prob(const NGramModel& m, const std::string& word, const TokenSeq& history) {
  std::string w = detail::map_target(m, word);

  TokenSeq h;
  size_t keep = std::min(history.size(), static_cast<size_t>(m.order - 1));
  for (size_t i = history.size() - keep; i < history.size(); ++i) {
    h.push_back(detail::map_context(m, history[i]));
  }

  double uniform = m.uniform_floor();
  // level 0: uniform over surface vocabulary + unknown; end marker excluded
  double p = (w == kEos) ? 0.0 : uniform;
  // walk levels bottom-up; level k uses the last k-1 context tokens
  for (int k = 1; k <= static_cast<int>(h.size()) + 1; ++k) {
    std::string hkey;
    for (size_t i = h.size() - (k - 1); i < h.size(); ++i) {
      hkey += (hkey.empty() ? "" : " ") + h[i];
    }
    auto hit = m.histories[k - 1].find(hkey);
    if (hit == m.histories[k - 1].end()) continue;  // unseen context: keep shorter estimate
    std::string gram = hkey.empty() ? w : hkey + " " + w;
    auto cit = m.counts[k].find(gram);
    double ml = cit == m.counts[k].end()
                    ? 0.0
                    : static_cast<double>(cit->second) / static_cast<double>(hit->second);
    p = m.mu * ml + (1.0 - m.mu) * p;
  }
  return p;
}

inline double cond_log_prob(const NGramModel& m, const std::string& word,
                            const TokenSeq& history) {
  return std::log(cond_prob(m, word, history));
}

// Full-sequence log probability, end marker included. Always finite.
inline double lm_log_prob(const NGramModel& m, const TokenSeq& tokens) {
  TokenSeq h(m.order - 1, kBos);
  double total = 0.0;
  auto shift_in = [&](const std::string& w) {
    if (m.order == 1) return;
    h.erase(h.begin());
    h.push_back(detail::map_context(m, w));
  };
  for (const auto& w : tokens) {
    total += cond_log_prob(m, w, h);
    shift_in(w);
  }
  total += cond_log_prob(m, kEos, h);
  return total;
}

// ---------------------------------------------------------------------------
// serialization: header "order<TAB>V<TAB>mu", rows "n<TAB>tokens<TAB>count"
// sorted by (n, tokens)

inline void save_lm(const std::string& path, const NGramModel& m) {
  std::ofstream out = open_output(path);
  out << m.order << '\t' << m.vocab.size() << '\t' << fmt_double(m.mu) << '\n';
  for (int n = 1; n <= m.order; ++n) {
    for (const auto& [gram, c] : m.counts[n]) {
      out << n << '\t' << gram << '\t' << c << '\n';
    }
  }
  if (!out) throw IoError("write failed: " + path);
}

inline NGramModel load_lm(const std::string& path) {
  auto lines = read_lines(path);
  if (lines.empty()) throw ParseError(path + ": empty model file");
  auto head = split_on(lines[0], '\t');
  if (head.size() != 3) throw ParseError(path + ":1: expected order, vocabulary size, weight");

  NGramModel m;
  m.order = static_cast<int>(parse_int(head[0], path + ":1"));
  if (m.order < 1 || m.order > 4) throw ParseError(path + ":1: order out of range");
  size_t vocab_size = static_cast<size_t>(parse_int(head[1], path + ":1"));
  m.mu = parse_double(head[2], path + ":1");
  if (!(m.mu > 0.0 && m.mu < 1.0)) throw ParseError(path + ":1: weight out of range");

  m.counts.assign(m.order + 1, {});
  for (size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    auto cols = split_on(lines[i], '\t');
    if (cols.size() != 3) {
      throw ParseError(path + ":" + std::to_string(i + 1) + ": expected n, tokens, count");
    }
    int n = static_cast<int>(parse_int(cols[0], path + ":" + std::to_string(i + 1)));
    if (n < 1 || n > m.order) {
      throw ParseError(path + ":" + std::to_string(i + 1) + ": n-gram length out of range");
    }
    auto toks = split_ws(cols[1]);
    if (toks.size() != static_cast<size_t>(n)) {
      throw ParseError(path + ":" + std::to_string(i + 1) + ": token count does not match n");
    }
    long long c = parse_int(cols[2], path + ":" + std::to_string(i + 1));
    if (c <= 0) throw ParseError(path + ":" + std::to_string(i + 1) + ": nonpositive count");
    m.counts[n][join(toks)] += c;
    if (n == 1 && toks[0] != kEos) m.vocab.insert(toks[0]);
  }
  if (m.vocab.size() != vocab_size) {
    throw ParseError(path + ": header vocabulary size " + std::to_string(vocab_size) +
                     " does not match " + std::to_string(m.vocab.size()) + " unigram types");
  }
  detail::rebuild_histories(m);
  return m;
}

}  // namespace penggen
