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
#include <string>
#include <vector>

#include "penggen/common.hpp"
#include "penggen/corpus.hpp"

namespace penggen {

inline constexpr const char* kNullToken = "<NULL>";

// Per response position: 1-based source position whose word produced it,
// or 0 for the null word. Word-based, so start and end coincide (b_i = a_i).
using Alignment = std::vector<int>;

struct TranslationTable {
  // phi[s][r] = p(response word r | source word s); rows sum to 1
  std::map<std::string, std::map<std::string, double>> phi;
  double alpha = 0.6;  // distortion base, in (0,1)

  double lookup(const std::string& s, const std::string& r) const {
    auto row = phi.find(s);
    if (row == phi.end()) return 0.0;
    auto it = row->second.find(r);
    return it == row->second.end() ? 0.0 : it->second;
  }
};

struct AlignmentResult {
  std::vector<Alignment> alignments;                       // one per input pair
  std::map<std::string, std::map<std::string, double>> t;  // EM lexical table t(r|s)
  std::vector<double> log_likelihood;                      // one entry per iteration
};

// ---------------------------------------------------------------------------
// alignment training: lexical EM with a null source word, then per-word argmax

inline AlignmentResult train_alignment(const std::vector<UtterancePair>& pairs, int iterations) {
  if (pairs.empty()) throw DataError("alignment training needs a non-empty corpus");
  if (iterations < 1) throw ConfigError("alignment training needs at least one iteration");

  std::set<std::string> response_vocab;
  for (const auto& p : pairs) {
    for (const auto& r : p.reference) response_vocab.insert(r);
  }
  if (response_vocab.empty()) throw DataError("alignment training corpus has no response words");
  double uniform = 1.0 / static_cast<double>(response_vocab.size());

  AlignmentResult res;
  auto& t = res.t;
  auto t_of = [&](const std::string& s, const std::string& r) {
    auto row = t.find(s);
    if (row == t.end()) return uniform;
    auto it = row->second.find(r);
    return it == row->second.end() ? uniform : it->second;
  };

  for (int iter = 0; iter < iterations; ++iter) {
    std::map<std::string, std::map<std::string, double>> count;
    std::map<std::string, double> total;
    double ll = 0.0;
    for (const auto& p : pairs) {
      size_t l = p.source.size();
      for (const auto& r : p.reference) {
        double denom = t_of(kNullToken, r);
        for (const auto& s : p.source) denom += t_of(s, r);
        ll += std::log(denom / static_cast<double>(l + 1));
        double w = t_of(kNullToken, r) / denom;
        count[kNullToken][r] += w;
        total[kNullToken] += w;
        for (const auto& s : p.source) {
          w = t_of(s, r) / denom;
          count[s][r] += w;
          total[s] += w;
        }
      }
    }
    res.log_likelihood.push_back(ll);
    std::map<std::string, std::map<std::string, double>> next;
    for (auto& [s, row] : count) {
      for (auto& [r, c] : row) next[s][r] = c / total[s];
    }
    t = std::move(next);
  }

  // Viterbi step: real source positions win ties (leftmost first); the null
  // word takes a response word only when strictly more probable.
  for (const auto& p : pairs) {
    Alignment a(p.reference.size(), 0);
    for (size_t i = 0; i < p.reference.size(); ++i) {
      const std::string& r = p.reference[i];
      int best_j = 0;
      double best = -1.0;
      for (size_t j = 0; j < p.source.size(); ++j) {
        double v = t_of(p.source[j], r);
        if (v > best) {
          best = v;
          best_j = static_cast<int>(j + 1);
        }
      }
      if (t_of(kNullToken, r) > best) best_j = 0;
      a[i] = best_j;
    }
    res.alignments.push_back(std::move(a));
  }
  return res;
}

// ---------------------------------------------------------------------------
// relative-frequency table over aligned word pairs, unsmoothed

inline TranslationTable estimate_phi(const std::vector<UtterancePair>& pairs,
                                     const std::vector<Alignment>& alignments,
                                     double alpha = 0.6) {
  if (alignments.size() != pairs.size()) {
    throw DataError("alignment count does not match pair count");
  }
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("distortion base must lie in (0,1)");

  std::map<std::string, std::map<std::string, double>> count;
  std::map<std::string, double> total;
  for (size_t k = 0; k < pairs.size(); ++k) {
    const auto& p = pairs[k];
    const auto& a = alignments[k];
    if (a.size() != p.reference.size()) {
      throw DataError("alignment length does not match response length");
    }
    for (size_t i = 0; i < a.size(); ++i) {
      if (a[i] < 0 || a[i] > static_cast<int>(p.source.size())) {
        throw DataError("alignment position out of range");
      }
      const std::string& s = a[i] == 0 ? kNullToken : p.source[a[i] - 1];
      count[s][p.reference[i]] += 1.0;
      total[s] += 1.0;
    }
  }
  TranslationTable table;
  table.alpha = alpha;
  for (auto& [s, row] : count) {
    for (auto& [r, c] : row) table.phi[s][r] = c / total[s];
  }
  return table;
}

// ---------------------------------------------------------------------------
// distortion and scoring

// alpha^{|a_i - b_prev - 1|}; reading a null-aligned word costs nothing.
inline double distortion(int a_i, int b_prev, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("distortion base must lie in (0,1)");
  if (a_i == 0) return 1.0;
  return std::pow(alpha, std::abs(a_i - b_prev - 1));
}

// Sum of log phi and log distortion over response positions. A zero phi
// factor collapses the lexical component to the -inf sentinel.
inline std::pair<double, double> tm_log_score(const TokenSeq& source, const TokenSeq& response,
                                              const Alignment& alignment,
                                              const TranslationTable& table) {
  if (alignment.size() != response.size()) {
    throw DataError("alignment length does not match response length");
  }
  double phi_log = 0.0, ds_log = 0.0;
  int b_prev = 0;
  for (size_t i = 0; i < response.size(); ++i) {
    int a_i = alignment[i];
    if (a_i < 0 || a_i > static_cast<int>(source.size())) {
      throw DataError("alignment position out of range");
    }
    const std::string& s = a_i == 0 ? kNullToken : source[a_i - 1];
    double p = table.lookup(s, response[i]);
    if (p <= 0.0) {
      phi_log = kNegInf;
    } else if (phi_log != kNegInf) {
      phi_log += std::log(p);
    }
    ds_log += std::log(distortion(a_i, b_prev, table.alpha));
    if (a_i != 0) b_prev = a_i;
  }
  return {phi_log, ds_log};
}

// ---------------------------------------------------------------------------
// serialization: "#alpha<TAB>value" header, then "source<TAB>response<TAB>phi"
// rows sorted by (source, response)

inline void save_translation_table(const std::string& path, const TranslationTable& table) {
  std::ofstream out = open_output(path);
  out << "#alpha\t" << fmt_double(table.alpha) << '\n';
  for (const auto& [s, row] : table.phi) {
    for (const auto& [r, p] : row) {
      out << s << '\t' << r << '\t' << fmt_double(p) << '\n';
    }
  }
  if (!out) throw IoError("write failed: " + path);
}

inline TranslationTable load_translation_table(const std::string& path) {
  TranslationTable table;
  size_t line_no = 0;
  for (const auto& line : read_lines(path)) {
    ++line_no;
    if (line.empty()) continue;
    auto cols = split_on(line, '\t');
    if (cols.size() == 2 && cols[0] == "#alpha") {
      table.alpha = parse_double(cols[1], path + ":" + std::to_string(line_no));
      if (!(table.alpha > 0.0 && table.alpha < 1.0)) {
        throw ParseError(path + ":" + std::to_string(line_no) + ": distortion base out of range");
      }
      continue;
    }
    if (cols.size() != 3) {
      throw ParseError(path + ":" + std::to_string(line_no) +
                       ": expected source<TAB>response<TAB>phi");
    }
    table.phi[cols[0]][cols[1]] = parse_double(cols[2], path + ":" + std::to_string(line_no));
  }
  return table;
}

}  // namespace penggen
