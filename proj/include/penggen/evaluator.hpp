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

namespace penggen {

// ---------------------------------------------------------------------------
// corpus BLEU via additive sufficient statistics, unsmoothed

struct BleuStats {
  static constexpr int kMaxN = 4;
  long long matches[kMaxN] = {0, 0, 0, 0};  // clipped n-gram hits, n = index+1
  long long totals[kMaxN] = {0, 0, 0, 0};   // hypothesis n-gram counts
  long long hyp_len = 0;
  long long ref_len = 0;

  BleuStats& operator+=(const BleuStats& o) {
    for (int i = 0; i < kMaxN; ++i) {
      matches[i] += o.matches[i];
      totals[i] += o.totals[i];
    }
    hyp_len += o.hyp_len;
    ref_len += o.ref_len;
    return *this;
  }
  friend BleuStats operator+(BleuStats a, const BleuStats& b) { return a += b; }

  // Removes a previously added contribution; only valid for stats that were
  // summed in earlier.
  BleuStats& operator-=(const BleuStats& o) {
    for (int i = 0; i < kMaxN; ++i) {
      matches[i] -= o.matches[i];
      totals[i] -= o.totals[i];
    }
    hyp_len -= o.hyp_len;
    ref_len -= o.ref_len;
    return *this;
  }
};

inline BleuStats sentence_stats(const TokenSeq& hyp, const TokenSeq& ref, int max_n = 4) {
  BleuStats st;
  st.hyp_len = static_cast<long long>(hyp.size());
  st.ref_len = static_cast<long long>(ref.size());
  for (int n = 1; n <= max_n; ++n) {
    if (hyp.size() < static_cast<size_t>(n)) break;
    std::map<std::string, long long> ref_grams;
    for (size_t i = 0; i + n <= ref.size(); ++i) {
      TokenSeq g(ref.begin() + i, ref.begin() + i + n);
      ref_grams[join(g)] += 1;
    }
    std::map<std::string, long long> hyp_grams;
    for (size_t i = 0; i + n <= hyp.size(); ++i) {
      TokenSeq g(hyp.begin() + i, hyp.begin() + i + n);
      hyp_grams[join(g)] += 1;
    }
    for (const auto& [g, c] : hyp_grams) {
      st.totals[n - 1] += c;
      auto it = ref_grams.find(g);
      if (it != ref_grams.end()) st.matches[n - 1] += std::min(c, it->second);
    }
  }
  return st;
}

// Geometric mean of clipped precisions up to n, times the brevity penalty,
// scaled to [0, 100]. A missing or zero precision makes the level score 0.
inline double bleu_from_stats(const BleuStats& st, int n) {
  if (st.hyp_len == 0) return 0.0;
  double log_sum = 0.0;
  for (int k = 1; k <= n; ++k) {
    if (st.totals[k - 1] == 0 || st.matches[k - 1] == 0) return 0.0;
    log_sum += std::log(static_cast<double>(st.matches[k - 1]) /
                        static_cast<double>(st.totals[k - 1]));
  }
  double bp = std::min(1.0, std::exp(1.0 - static_cast<double>(st.ref_len) /
                                               static_cast<double>(st.hyp_len)));
  return 100.0 * bp * std::exp(log_sum / n);
}

// Scores for n = 1..max_n over aligned hypothesis/reference lists.
inline std::vector<double> bleu(const std::vector<TokenSeq>& hypotheses,
                                const std::vector<TokenSeq>& references, int max_n = 4) {
  if (max_n < 1 || max_n > BleuStats::kMaxN) throw ConfigError("bleu order must be 1..4");
  if (hypotheses.size() != references.size()) {
    throw DataError("hypothesis count " + std::to_string(hypotheses.size()) +
                    " does not match reference count " + std::to_string(references.size()));
  }
  if (references.empty()) throw DataError("bleu needs at least one sentence");
  BleuStats st;
  for (size_t i = 0; i < hypotheses.size(); ++i) {
    if (references[i].empty()) {
      throw DataError("empty reference at line " + std::to_string(i + 1));
    }
    st += sentence_stats(hypotheses[i], references[i], max_n);
  }
  std::vector<double> scores;
  for (int n = 1; n <= max_n; ++n) scores.push_back(bleu_from_stats(st, n));
  return scores;
}

// One tokenized sentence per line.
inline std::vector<TokenSeq> load_sentences(const std::string& path) {
  std::vector<TokenSeq> out;
  for (const auto& line : read_lines(path)) out.push_back(split_ws(line));
  return out;
}

inline void save_sentences(const std::string& path, const std::vector<TokenSeq>& sentences) {
  std::ofstream out = open_output(path);
  for (const auto& s : sentences) out << join(s) << '\n';
  if (!out) throw IoError("write failed: " + path);
}

// ---------------------------------------------------------------------------
// human rating aggregation

struct RatingRecord {
  std::string system;
  std::string aspect;
  std::string item_id;
  std::string rater_id;
  int score = 0;  // 0..2
};

// TSV "system<TAB>aspect<TAB>item_id<TAB>rater_id<TAB>score"
inline std::vector<RatingRecord> load_ratings(const std::string& path) {
  std::vector<RatingRecord> records;
  size_t line_no = 0;
  for (const auto& line : read_lines(path)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto cols = split_on(line, '\t');
    if (cols.size() != 5) {
      throw ParseError(path + ":" + std::to_string(line_no) +
                       ": expected system, aspect, item, rater, score");
    }
    RatingRecord r;
    r.system = cols[0];
    r.aspect = cols[1];
    r.item_id = cols[2];
    r.rater_id = cols[3];
    r.score = static_cast<int>(parse_int(cols[4], path + ":" + std::to_string(line_no)));
    if (r.score < 0 || r.score > 2) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": score outside 0..2");
    }
    records.push_back(std::move(r));
  }
  return records;
}

// Mean score per (system, aspect): raters averaged within each item first,
// then items averaged.
inline std::map<std::string, std::map<std::string, double>> rating_means(
    const std::vector<RatingRecord>& records) {
  std::map<std::string, std::map<std::string, std::map<std::string, std::pair<double, int>>>>
      acc;  // system -> aspect -> item -> (sum, n)
  for (const auto& r : records) {
    auto& cell = acc[r.system][r.aspect][r.item_id];
    cell.first += r.score;
    cell.second += 1;
  }
  std::map<std::string, std::map<std::string, double>> means;
  for (const auto& [sys, aspects] : acc) {
    for (const auto& [aspect, items] : aspects) {
      double sum = 0.0;
      for (const auto& [item, cell] : items) sum += cell.first / cell.second;
      means[sys][aspect] = sum / static_cast<double>(items.size());
    }
  }
  return means;
}

// 100 x mean(system, aspect) / mean(baseline, aspect); aspects whose baseline
// mean is zero or missing are left out.
inline std::map<std::string, std::map<std::string, double>> rating_ratios(
    const std::vector<RatingRecord>& records, const std::string& baseline_system) {
  auto means = rating_means(records);
  auto base_it = means.find(baseline_system);
  if (base_it == means.end()) {
    throw DataError("baseline system '" + baseline_system + "' has no ratings");
  }
  std::map<std::string, std::map<std::string, double>> ratios;
  for (const auto& [sys, aspects] : means) {
    for (const auto& [aspect, mean] : aspects) {
      auto b = base_it->second.find(aspect);
      if (b == base_it->second.end() || b->second == 0.0) continue;
      ratios[sys][aspect] = 100.0 * mean / b->second;
    }
  }
  return ratios;
}

}  // namespace penggen
