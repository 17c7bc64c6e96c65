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
#include <cstdint>
#include <cstdlib>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "penggen/common.hpp"
#include "penggen/humor_model.hpp"
#include "penggen/language_model.hpp"
#include "penggen/translation_model.hpp"

namespace penggen {

struct WeightVector {
  double tm = 1.0, ds = 1.0, lm = 1.0, hm = 1.0;
};

// Weighted sum of component log scores. Zero-weight components are ignored
// entirely; a -inf component with any live weight sinks the candidate.
inline double combined_score(double tm, double ds, double lm, double hm,
                             const WeightVector& w) {
  const double comps[4] = {tm, ds, lm, hm};
  const double lambdas[4] = {w.tm, w.ds, w.lm, w.hm};
  double total = 0.0;
  for (int i = 0; i < 4; ++i) {
    if (lambdas[i] == 0.0) continue;
    if (comps[i] == kNegInf) return kNegInf;
    total += lambdas[i] * comps[i];
  }
  return total;
}

struct Candidate {
  TokenSeq tokens;
  double tm = 0.0, ds = 0.0, lm = 0.0, hm = 0.0;  // component log scores
  double combined = 0.0;
};

struct NBestList {
  std::vector<Candidate> candidates;  // non-increasing combined, unique token sequences
  std::string diagnostic;             // set when the list is empty for a stated reason
};

// Bundles the classifier with the resources its features need, and floors the
// probability so a zero never reaches the log.
struct HumorScorer {
  HumorForest forest;
  HumorLexicons lexicons;
  double floor = 1e-12;

  double log_prob(const TokenSeq& input_utt, const TokenSeq& response) const {
    double p = humor_prob(forest, extract_features(input_utt, response, lexicons));
    return std::log(std::max(p, floor));
  }
};

struct DecodeOptions {
  int beam_width = 100;
  int distortion_limit = 4;
  int options_per_word = 20;        // translation candidates kept per source word
  bool allow_null_insertions = false;
  int null_insertion_budget = 2;    // max inserted words per hypothesis when enabled
};

namespace detail {

struct Hyp {
  TokenSeq tokens;
  uint64_t coverage = 0;
  int b = 0;  // last covered source position
  double tm = 0.0, ds = 0.0, lm = 0.0;
  double partial = 0.0;  // weighted tm+ds+lm, used for pruning
  int nulls = 0;
};

inline double lm_continuation(const NGramModel& m, const TokenSeq& produced,
                              const std::string& next) {
  TokenSeq h(m.order - 1, kBos);
  h.insert(h.end(), produced.begin(), produced.end());
  return cond_log_prob(m, next, h);
}

inline std::string recombination_key(const Hyp& h) {
  std::string key = std::to_string(h.coverage) + "#" + std::to_string(h.b) + "#";
  size_t from = h.tokens.size() > 3 ? h.tokens.size() - 3 : 0;
  for (size_t i = from; i < h.tokens.size(); ++i) key += h.tokens[i] + "\x1f";
  return key;
}

// Merge hypotheses that share (coverage, last position, recent words), then
// keep the beam_width best by partial score.
inline void recombine_and_prune(std::vector<Hyp>& stack, int beam_width) {
  std::map<std::string, size_t> best;
  std::vector<Hyp> merged;
  for (auto& h : stack) {
    std::string key = recombination_key(h);
    auto it = best.find(key);
    if (it == best.end()) {
      best.emplace(std::move(key), merged.size());
      merged.push_back(std::move(h));
    } else {
      Hyp& kept = merged[it->second];
      if (h.partial > kept.partial ||
          (h.partial == kept.partial && h.tokens < kept.tokens)) {
        kept = std::move(h);
      }
    }
  }
  std::sort(merged.begin(), merged.end(), [](const Hyp& a, const Hyp& b) {
    if (a.partial != b.partial) return a.partial > b.partial;
    return a.tokens < b.tokens;
  });
  if (merged.size() > static_cast<size_t>(beam_width)) merged.resize(beam_width);
  stack = std::move(merged);
}

using Options = std::vector<std::pair<std::string, double>>;  // (word, phi), best first

inline Options top_options(const TranslationTable& table, const std::string& source_word,
                           int k) {
  Options opts;
  auto row = table.phi.find(source_word);
  if (row == table.phi.end()) return opts;
  for (const auto& [r, p] : row->second) {
    if (p > 0.0) opts.emplace_back(r, p);
  }
  std::sort(opts.begin(), opts.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (opts.size() > static_cast<size_t>(k)) opts.resize(k);
  return opts;
}

}  // namespace detail

// Stack decoding over source coverage: each step covers one more source word
// and emits one translation option for it; optional null-sourced insertions
// add words without consuming coverage. Completed candidates get the end-of-
// sentence term and the humor score, then everything is ranked by the
// combined model.
inline NBestList decode_nbest(const TokenSeq& source, const TranslationTable& table,
                              const NGramModel& lm, const HumorScorer* humor,
                              const WeightVector& weights, const DecodeOptions& opts = {}) {
  if (source.empty()) throw DataError("decoder needs a non-empty source");
  if (opts.beam_width < 1) throw ConfigError("beam width must be positive");
  if (opts.options_per_word < 1) throw ConfigError("per-word option cap must be positive");

  NBestList out;
  size_t l = source.size();
  if (l > 64) {
    out.diagnostic = "source longer than 64 words exceeds the coverage mask";
    return out;
  }

  std::vector<detail::Options> options(l);
  for (size_t j = 0; j < l; ++j) {
    options[j] = detail::top_options(table, source[j], opts.options_per_word);
    if (options[j].empty()) {
      out.diagnostic = "no translation options for source word '" + source[j] + "'";
      return out;
    }
  }
  detail::Options null_options;
  if (opts.allow_null_insertions) {
    null_options = detail::top_options(table, kNullToken, opts.options_per_word);
  }

  auto weigh = [&](const detail::Hyp& h) {
    return weights.tm * h.tm + weights.ds * h.ds + weights.lm * h.lm;
  };

  std::vector<std::vector<detail::Hyp>> stacks(l + 1);
  stacks[0].emplace_back();

  for (size_t k = 0; k <= l; ++k) {
    auto& stack = stacks[k];
    detail::recombine_and_prune(stack, opts.beam_width);

    if (!null_options.empty()) {
      std::vector<detail::Hyp> frontier = stack;
      for (int round = 0; round < opts.null_insertion_budget; ++round) {
        std::vector<detail::Hyp> next;
        for (const auto& h : frontier) {
          if (h.nulls != round) continue;
          for (const auto& [r, p] : null_options) {
            detail::Hyp child = h;
            child.tokens.push_back(r);
            child.tm += std::log(p);
            child.lm += detail::lm_continuation(lm, h.tokens, r);
            child.nulls = round + 1;
            child.partial = weigh(child);
            next.push_back(std::move(child));
          }
        }
        if (next.empty()) break;
        stack.insert(stack.end(), next.begin(), next.end());
        frontier = std::move(next);
      }
      detail::recombine_and_prune(stack, opts.beam_width);
    }
    if (k == l) break;

    for (const auto& h : stacks[k]) {
      for (size_t j = 1; j <= l; ++j) {
        if (h.coverage & (uint64_t{1} << (j - 1))) continue;
        if (std::abs(static_cast<int>(j) - h.b - 1) > opts.distortion_limit) continue;
        for (const auto& [r, p] : options[j - 1]) {
          detail::Hyp child = h;
          child.tokens.push_back(r);
          child.coverage |= uint64_t{1} << (j - 1);
          child.tm += std::log(p);
          child.ds += std::log(distortion(static_cast<int>(j), h.b, table.alpha));
          child.lm += detail::lm_continuation(lm, h.tokens, r);
          child.b = static_cast<int>(j);
          child.partial = weigh(child);
          stacks[k + 1].push_back(std::move(child));
        }
      }
    }
  }

  for (const auto& h : stacks[l]) {
    Candidate c;
    c.tokens = h.tokens;
    c.tm = h.tm;
    c.ds = h.ds;
    c.lm = h.lm + detail::lm_continuation(lm, h.tokens, kEos);
    c.hm = humor ? humor->log_prob(source, h.tokens) : 0.0;
    c.combined = combined_score(c.tm, c.ds, c.lm, c.hm, weights);
    out.candidates.push_back(std::move(c));
  }
  std::sort(out.candidates.begin(), out.candidates.end(),
            [](const Candidate& a, const Candidate& b) {
              if (a.combined != b.combined) return a.combined > b.combined;
              return a.tokens < b.tokens;
            });
  std::vector<Candidate> unique;
  std::set<TokenSeq> seen;
  for (auto& c : out.candidates) {
    if (seen.insert(c.tokens).second) unique.push_back(std::move(c));
    if (unique.size() == static_cast<size_t>(opts.beam_width)) break;
  }
  out.candidates = std::move(unique);
  if (out.candidates.empty() && out.diagnostic.empty()) {
    out.diagnostic = "no candidate reached full coverage";
  }
  return out;
}

// Among the first `depth` candidates, pick the one the humor model likes
// best; the original order breaks ties. Returns its index in the list.
inline size_t rerank_top5(const NBestList& nbest, int depth = 5) {
  if (nbest.candidates.empty()) throw DataError("rerank needs a non-empty candidate list");
  size_t limit = std::min(nbest.candidates.size(), static_cast<size_t>(depth));
  size_t best = 0;
  for (size_t i = 1; i < limit; ++i) {
    if (nbest.candidates[i].hm > nbest.candidates[best].hm) best = i;
  }
  return best;
}

// ---------------------------------------------------------------------------
// n-best files: "sent_id ||| tokens ||| tm ds lm hm ||| combined", grouped by
// sentence in rank order

inline void save_nbest(const std::string& path, const std::vector<NBestList>& lists) {
  std::ofstream out = open_output(path);
  for (size_t id = 0; id < lists.size(); ++id) {
    for (const auto& c : lists[id].candidates) {
      out << id << " ||| " << join(c.tokens) << " ||| " << fmt_double(c.tm) << ' '
          << fmt_double(c.ds) << ' ' << fmt_double(c.lm) << ' ' << fmt_double(c.hm) << " ||| "
          << fmt_double(c.combined) << '\n';
    }
  }
  if (!out) throw IoError("write failed: " + path);
}

inline std::vector<NBestList> load_nbest(const std::string& path) {
  std::vector<NBestList> lists;
  size_t line_no = 0;
  for (const auto& line : read_lines(path)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::string where = path + ":" + std::to_string(line_no);
    std::vector<std::string> parts;
    size_t start = 0;
    for (;;) {
      size_t sep = line.find(" ||| ", start);
      if (sep == std::string::npos) {
        parts.push_back(line.substr(start));
        break;
      }
      parts.push_back(line.substr(start, sep - start));
      start = sep + 5;
    }
    if (parts.size() != 4) throw ParseError(where + ": expected 4 |||-separated fields");
    size_t id = static_cast<size_t>(parse_int(parts[0], where));
    auto scores = split_ws(parts[2]);
    if (scores.size() != 4) throw ParseError(where + ": expected tm ds lm hm scores");
    Candidate c;
    c.tokens = split_ws(parts[1]);
    c.tm = parse_double(scores[0], where);
    c.ds = parse_double(scores[1], where);
    c.lm = parse_double(scores[2], where);
    c.hm = parse_double(scores[3], where);
    c.combined = parse_double(parts[3], where);
    if (id >= lists.size()) lists.resize(id + 1);
    lists[id].candidates.push_back(std::move(c));
  }
  return lists;
}

}  // namespace penggen
