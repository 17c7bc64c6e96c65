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
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "penggen/common.hpp"
#include "penggen/decoder.hpp"
#include "penggen/evaluator.hpp"

namespace penggen {

struct TuningCandidate {
  std::array<double, 4> feat{};  // tm, ds, lm, hm log scores
  BleuStats stats;               // against the sentence's single reference
};

struct TuningInstance {
  std::vector<TuningCandidate> candidates;  // never empty
};

inline double weight_at(const WeightVector& w, int coord) {
  switch (coord) {
    case 0: return w.tm;
    case 1: return w.ds;
    case 2: return w.lm;
    default: return w.hm;
  }
}

inline void set_weight(WeightVector& w, int coord, double value) {
  switch (coord) {
    case 0: w.tm = value; break;
    case 1: w.ds = value; break;
    case 2: w.lm = value; break;
    default: w.hm = value; break;
  }
}

namespace detail {

inline double dot(const WeightVector& w, const std::array<double, 4>& feat) {
  return w.tm * feat[0] + w.ds * feat[1] + w.lm * feat[2] + w.hm * feat[3];
}

// First candidate with the maximal weighted score.
inline size_t argmax_candidate(const TuningInstance& inst, const WeightVector& w) {
  size_t best = 0;
  double best_score = dot(w, inst.candidates[0].feat);
  for (size_t i = 1; i < inst.candidates.size(); ++i) {
    double s = dot(w, inst.candidates[i].feat);
    if (s > best_score) {
      best_score = s;
      best = i;
    }
  }
  return best;
}

}  // namespace detail

// Corpus BLEU-4 of the top-1 selections under the given weights.
inline double corpus_bleu_at(const std::vector<TuningInstance>& instances,
                             const WeightVector& weights) {
  if (instances.empty()) throw DataError("tuning needs at least one sentence");
  BleuStats total;
  for (const auto& inst : instances) {
    if (inst.candidates.empty()) throw DataError("tuning instance without candidates");
    total += inst.candidates[detail::argmax_candidate(inst, weights)].stats;
  }
  return bleu_from_stats(total, 4);
}

// Midpoint of the best-scoring interval; an unbounded end is clamped 10 away
// from the nearest threshold, so no thresholds at all yields 0. Ties go to
// the smaller value.
inline double select_by_interval(const std::vector<double>& thresholds,
                                 const std::vector<BleuStats>& per_interval) {
  if (per_interval.size() != thresholds.size() + 1) {
    throw DataError("interval sweep produced mismatched lists");
  }
  auto midpoint = [&](size_t i) {
    if (thresholds.empty()) return 0.0;
    double lo = (i == 0) ? thresholds.front() - 10.0 : thresholds[i - 1];
    double hi = (i == thresholds.size()) ? thresholds.back() + 10.0 : thresholds[i];
    return (lo + hi) / 2.0;
  };
  size_t best = 0;
  double best_bleu = bleu_from_stats(per_interval[0], 4);
  for (size_t i = 1; i < per_interval.size(); ++i) {
    double b = bleu_from_stats(per_interval[i], 4);
    if (b > best_bleu) {
      best_bleu = b;
      best = i;
    }
  }
  return midpoint(best);
}

struct LineSearchResult {
  double lambda = 0.0;
  double bleu = 0.0;
};

// Exact single-coordinate search: every candidate's score is linear in the
// coordinate, so per sentence the winner as a function of it is the upper
// envelope of lines. Sweeping the merged breakpoints left to right updates
// corpus sufficient statistics incrementally and scores each interval.
inline LineSearchResult line_search(const std::vector<TuningInstance>& instances,
                                    const WeightVector& weights, int coord) {
  if (instances.empty()) throw DataError("tuning needs at least one sentence");
  WeightVector rest = weights;
  set_weight(rest, coord, 0.0);

  struct EnvLine {
    double slope, intercept;
    size_t idx;
  };
  struct Event {
    double x;
    size_t sentence;
    size_t hull_pos;  // winner becomes hull[hull_pos] at x
  };

  std::vector<std::vector<size_t>> hulls(instances.size());
  std::vector<Event> events;
  BleuStats total;
  std::vector<size_t> winner(instances.size());

  for (size_t s = 0; s < instances.size(); ++s) {
    const auto& cands = instances[s].candidates;
    if (cands.empty()) throw DataError("tuning instance without candidates");
    std::vector<EnvLine> lines;
    lines.reserve(cands.size());
    for (size_t i = 0; i < cands.size(); ++i) {
      lines.push_back({cands[i].feat[coord], detail::dot(rest, cands[i].feat), i});
    }
    std::sort(lines.begin(), lines.end(), [](const EnvLine& a, const EnvLine& b) {
      if (a.slope != b.slope) return a.slope < b.slope;
      if (a.intercept != b.intercept) return a.intercept > b.intercept;
      return a.idx < b.idx;
    });
    // One line per slope: the highest intercept, lowest index on ties.
    std::vector<EnvLine> distinct;
    for (const auto& ln : lines) {
      if (distinct.empty() || distinct.back().slope != ln.slope) distinct.push_back(ln);
    }
    std::vector<EnvLine> hull;
    std::vector<double> cross;
    for (const auto& ln : distinct) {
      for (;;) {
        if (hull.empty()) {
          hull.push_back(ln);
          break;
        }
        double x = (hull.back().intercept - ln.intercept) / (ln.slope - hull.back().slope);
        if (!cross.empty() && x <= cross.back()) {
          hull.pop_back();
          cross.pop_back();
          continue;
        }
        hull.push_back(ln);
        cross.push_back(x);
        break;
      }
    }
    for (const auto& ln : hull) hulls[s].push_back(ln.idx);
    for (size_t i = 0; i < cross.size(); ++i) events.push_back({cross[i], s, i + 1});
    winner[s] = 0;
    total += cands[hulls[s][0]].stats;
  }

  std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
    if (a.x != b.x) return a.x < b.x;
    if (a.sentence != b.sentence) return a.sentence < b.sentence;
    return a.hull_pos < b.hull_pos;
  });

  std::vector<double> thresholds;
  std::vector<BleuStats> per_interval;
  per_interval.push_back(total);
  size_t e = 0;
  while (e < events.size()) {
    double x = events[e].x;
    thresholds.push_back(x);
    while (e < events.size() && events[e].x == x) {
      const Event& ev = events[e];
      const auto& cands = instances[ev.sentence].candidates;
      total -= cands[hulls[ev.sentence][winner[ev.sentence]]].stats;
      winner[ev.sentence] = ev.hull_pos;
      total += cands[hulls[ev.sentence][winner[ev.sentence]]].stats;
      ++e;
    }
    per_interval.push_back(total);
  }

  LineSearchResult out;
  out.lambda = select_by_interval(thresholds, per_interval);
  for (const auto& st : per_interval) {
    out.bleu = std::max(out.bleu, bleu_from_stats(st, 4));
  }
  return out;
}

// Coordinate ascent from a fixed start; each accepted move is a strict corpus
// BLEU improvement. Appends the BLEU after every outer iteration to trace.
inline WeightVector coordinate_ascent(const std::vector<TuningInstance>& instances,
                                      WeightVector w, int max_outer_iterations,
                                      std::vector<double>* trace = nullptr,
                                      double* out_bleu = nullptr) {
  double cur = corpus_bleu_at(instances, w);
  for (int iter = 0; iter < max_outer_iterations; ++iter) {
    bool changed = false;
    for (int d = 0; d < 4; ++d) {
      LineSearchResult r = line_search(instances, w, d);
      if (r.bleu > cur + 1e-9) {
        set_weight(w, d, r.lambda);
        cur = r.bleu;
        changed = true;
      }
    }
    if (trace) trace->push_back(cur);
    if (!changed) break;
  }
  if (out_bleu) *out_bleu = cur;
  return w;
}

// MERT against corpus BLEU-4: coordinate ascent from the given start plus
// seeded random restarts, returning the best endpoint. The start itself is
// restart 0, so the result never scores below it.
inline WeightVector mert(const std::vector<TuningInstance>& instances,
                         const WeightVector& init_weights = {},
                         int max_outer_iterations = 30, uint64_t seed = 0,
                         int restarts = 8, int jobs = 1,
                         double* out_bleu = nullptr) {
  if (instances.empty()) throw DataError("tuning needs at least one sentence");
  if (max_outer_iterations < 1) throw ConfigError("need at least one outer iteration");
  if (restarts < 1) throw ConfigError("need at least one restart");

  std::vector<WeightVector> results(restarts);
  std::vector<double> bleus(restarts);
  parallel_for(static_cast<size_t>(restarts), jobs, [&](size_t r) {
    WeightVector start = init_weights;
    if (r > 0) {
      Rng rng(derive_seed(seed, r));
      for (int d = 0; d < 4; ++d) set_weight(start, d, 2.0 * unit_real(rng) - 1.0);
    }
    results[r] = coordinate_ascent(instances, start, max_outer_iterations, nullptr, &bleus[r]);
  });

  size_t best = 0;
  for (size_t r = 1; r < results.size(); ++r) {
    if (bleus[r] > bleus[best]) best = r;
  }
  if (out_bleu) *out_bleu = bleus[best];
  return results[best];
}

// ---------------------------------------------------------------------------
// External interfaces: n-best lists + references in, weights file out

inline std::vector<TuningInstance> make_tuning_instances(const std::vector<NBestList>& lists,
                                                         const std::vector<TokenSeq>& refs) {
  if (lists.size() != refs.size()) {
    throw DataError("n-best list count does not match reference count");
  }
  std::vector<TuningInstance> out;
  for (size_t i = 0; i < lists.size(); ++i) {
    if (lists[i].candidates.empty()) continue;  // nothing to select for this sentence
    if (refs[i].empty()) {
      throw DataError("empty reference for sentence " + std::to_string(i));
    }
    TuningInstance inst;
    for (const auto& c : lists[i].candidates) {
      TuningCandidate tc;
      tc.feat = {c.tm, c.ds, c.lm, c.hm};
      for (double f : tc.feat) {
        if (!std::isfinite(f)) {
          throw DataError("non-finite feature in n-best entry for sentence " +
                          std::to_string(i));
        }
      }
      tc.stats = sentence_stats(c.tokens, refs[i]);
      inst.candidates.push_back(std::move(tc));
    }
    out.push_back(std::move(inst));
  }
  return out;
}

inline void save_weights(const std::string& path, const WeightVector& w) {
  std::ofstream out = open_output(path);
  out << "lambda_tm=" << fmt_double(w.tm) << '\n'
      << "lambda_ds=" << fmt_double(w.ds) << '\n'
      << "lambda_lm=" << fmt_double(w.lm) << '\n'
      << "lambda_hm=" << fmt_double(w.hm) << '\n';
  if (!out) throw IoError("write failed: " + path);
}

inline WeightVector load_weights(const std::string& path) {
  WeightVector w;
  bool seen[4] = {false, false, false, false};
  size_t line_no = 0;
  for (const auto& raw : read_lines(path)) {
    ++line_no;
    std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    const std::string where = path + ":" + std::to_string(line_no);
    size_t eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(where + ": expected key=value");
    std::string key = trim(line.substr(0, eq));
    double value = parse_double(trim(line.substr(eq + 1)), where);
    int coord;
    if (key == "lambda_tm") coord = 0;
    else if (key == "lambda_ds") coord = 1;
    else if (key == "lambda_lm") coord = 2;
    else if (key == "lambda_hm") coord = 3;
    else throw ParseError(where + ": unknown weight '" + key + "'");
    if (seen[coord]) throw ParseError(where + ": duplicate weight '" + key + "'");
    seen[coord] = true;
    set_weight(w, coord, value);
  }
  for (int d = 0; d < 4; ++d) {
    if (!seen[d]) throw ParseError(path + ": missing one of the four lambda_* weights");
  }
  return w;
}

}  // namespace penggen
