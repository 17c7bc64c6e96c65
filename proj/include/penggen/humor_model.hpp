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
#include "penggen/lexicons.hpp"

namespace penggen {

struct HumorLexicons {
  EmbeddingTable embeddings;
  PinyinTable pinyin;
  SentimentLexicon sentiment;
  PairLexicon antonyms;
  PairLexicon synonyms;
  SlangList slang;
};

// Feature order: embedding-distance extrema, antonym / synonym / sentiment /
// homophone / rhyme statistics, each for the response alone and for the whole
// turn (input followed by response), then the response slang count.
inline constexpr int kNumFeatures = 15;
enum FeatureIndex {
  kMinDistResp = 0,
  kMaxDistResp,
  kMinDistTurn,
  kMaxDistTurn,
  kAntonymResp,
  kAntonymTurn,
  kSynonymResp,
  kSynonymTurn,
  kPolarityResp,
  kPolarityTurn,
  kHomophoneResp,
  kHomophoneTurn,
  kRhymeResp,
  kRhymeTurn,
  kSlangResp,
};

using FeatureVector = std::array<double, kNumFeatures>;

struct LabeledExample {
  FeatureVector features{};
  bool humorous = false;
};

namespace detail {

// min and max of 1 - cosine over unordered position pairs of embedded tokens;
// both 0 when fewer than two tokens carry vectors
inline void distance_extrema(const TokenSeq& tokens, const EmbeddingTable& emb, double* out_min,
                             double* out_max) {
  std::vector<const std::vector<double>*> vecs;
  for (const auto& t : tokens) {
    if (const auto* v = emb.find(t)) vecs.push_back(v);
  }
  if (vecs.size() < 2) {
    *out_min = 0.0;
    *out_max = 0.0;
    return;
  }
  double lo = 2.0, hi = 0.0;
  for (size_t i = 0; i < vecs.size(); ++i) {
    for (size_t j = i + 1; j < vecs.size(); ++j) {
      double d = 1.0 - cosine(*vecs[i], *vecs[j]);
      lo = std::min(lo, d);
      hi = std::max(hi, d);
    }
  }
  *out_min = lo;
  *out_max = hi;
}

inline double pair_count(const TokenSeq& tokens, const PairLexicon& lex) {
  double n = 0;
  for (size_t i = 0; i < tokens.size(); ++i) {
    for (size_t j = i + 1; j < tokens.size(); ++j) {
      if (lex.contains(tokens[i], tokens[j])) n += 1;
    }
  }
  return n;
}

inline double polarity_sum(const TokenSeq& tokens, const SentimentLexicon& lex) {
  double sum = 0;
  for (const auto& t : tokens) sum += lex.of(t);
  return sum;
}

inline double homophone_pairs(const TokenSeq& tokens, const PinyinTable& table) {
  double n = 0;
  for (size_t i = 0; i < tokens.size(); ++i) {
    for (size_t j = i + 1; j < tokens.size(); ++j) {
      if (same_pronunciation(tokens[i], tokens[j], table)) n += 1;
    }
  }
  return n;
}

inline double rhyme_pairs(const TokenSeq& tokens, const PinyinTable& table) {
  double n = 0;
  for (size_t i = 0; i < tokens.size(); ++i) {
    for (size_t j = i + 1; j < tokens.size(); ++j) {
      if (same_rhyme(tokens[i], tokens[j], table)) n += 1;
    }
  }
  return n;
}

}  // namespace detail

inline FeatureVector extract_features(const TokenSeq& input_utt, const TokenSeq& response,
                                      const HumorLexicons& lex) {
  TokenSeq turn = input_utt;
  turn.insert(turn.end(), response.begin(), response.end());

  FeatureVector f{};
  detail::distance_extrema(response, lex.embeddings, &f[kMinDistResp], &f[kMaxDistResp]);
  detail::distance_extrema(turn, lex.embeddings, &f[kMinDistTurn], &f[kMaxDistTurn]);
  f[kAntonymResp] = detail::pair_count(response, lex.antonyms);
  f[kAntonymTurn] = detail::pair_count(turn, lex.antonyms);
  f[kSynonymResp] = detail::pair_count(response, lex.synonyms);
  f[kSynonymTurn] = detail::pair_count(turn, lex.synonyms);
  f[kPolarityResp] = detail::polarity_sum(response, lex.sentiment);
  f[kPolarityTurn] = detail::polarity_sum(turn, lex.sentiment);
  f[kHomophoneResp] = detail::homophone_pairs(response, lex.pinyin);
  f[kHomophoneTurn] = detail::homophone_pairs(turn, lex.pinyin);
  f[kRhymeResp] = detail::rhyme_pairs(response, lex.pinyin);
  f[kRhymeTurn] = detail::rhyme_pairs(turn, lex.pinyin);
  double slang = 0;
  for (const auto& t : response) {
    if (lex.slang.contains(t)) slang += 1;
  }
  f[kSlangResp] = slang;
  return f;
}

// ---------------------------------------------------------------------------
// class rebalancing: replicate the minority, down-sample the majority

inline std::vector<LabeledExample> rebalance(const std::vector<LabeledExample>& examples,
                                             uint64_t seed) {
  size_t pos = 0;
  for (const auto& e : examples) pos += e.humorous ? 1 : 0;
  size_t neg = examples.size() - pos;
  if (pos == 0 || neg == 0) throw DataError("rebalance needs both classes present");

  size_t minority = std::min(pos, neg), majority = std::max(pos, neg);
  double ratio = static_cast<double>(majority) / static_cast<double>(minority);
  if (ratio <= 1.25) return examples;  // already inside the accepted band

  bool minority_is_positive = pos < neg;
  size_t rep = std::max<size_t>(1, static_cast<size_t>(std::llround(std::sqrt(ratio))));
  size_t keep = std::min(majority, minority * rep);

  // choose which majority examples survive
  std::vector<size_t> maj_idx;
  for (size_t i = 0; i < examples.size(); ++i) {
    if (examples[i].humorous != minority_is_positive) maj_idx.push_back(i);
  }
  Rng rng(seed);
  shuffle_seq(maj_idx, rng);
  maj_idx.resize(keep);
  std::vector<bool> survives(examples.size(), false);
  for (size_t i : maj_idx) survives[i] = true;

  std::vector<LabeledExample> out;
  out.reserve(minority * rep + keep);
  for (size_t i = 0; i < examples.size(); ++i) {
    if (examples[i].humorous == minority_is_positive) {
      for (size_t k = 0; k < rep; ++k) out.push_back(examples[i]);
    } else if (survives[i]) {
      out.push_back(examples[i]);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// random forest: axis-aligned Gini splits on bootstrap samples

struct ForestNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1, right = -1;
  double p_humorous = 0.0;  // class proportion at this node
};

struct DecisionTree {
  std::vector<ForestNode> nodes;  // node 0 is the root
};

struct HumorForest {
  std::vector<DecisionTree> trees;
  uint64_t seed = 0;
};

struct SplitChoice {
  bool found = false;
  int feature = -1;
  double threshold = 0.0;
  double child_gini = 0.0;  // size-weighted mean over both children
};

namespace detail {

inline double gini(size_t pos, size_t total) {
  if (total == 0) return 0.0;
  double p = static_cast<double>(pos) / static_cast<double>(total);
  return 1.0 - p * p - (1.0 - p) * (1.0 - p);
}

}  // namespace detail

// Best threshold on one feature, or not-found when no threshold lowers the
// parent impurity. Ties prefer the smaller threshold.
inline SplitChoice find_best_split(const std::vector<LabeledExample>& data,
                                   const std::vector<int>& idx, int feature) {
  std::vector<std::pair<double, bool>> vals;
  vals.reserve(idx.size());
  size_t pos_total = 0;
  for (int i : idx) {
    vals.emplace_back(data[i].features[feature], data[i].humorous);
    pos_total += data[i].humorous ? 1 : 0;
  }
  std::sort(vals.begin(), vals.end());
  double parent = detail::gini(pos_total, vals.size());

  SplitChoice best;
  best.feature = feature;
  size_t left_pos = 0;
  for (size_t i = 0; i + 1 < vals.size(); ++i) {
    left_pos += vals[i].second ? 1 : 0;
    if (vals[i].first == vals[i + 1].first) continue;  // no boundary here
    size_t nl = i + 1, nr = vals.size() - nl;
    double g = (static_cast<double>(nl) * detail::gini(left_pos, nl) +
                static_cast<double>(nr) * detail::gini(pos_total - left_pos, nr)) /
               static_cast<double>(vals.size());
    if (g >= parent - 1e-12) continue;  // must strictly improve
    if (!best.found || g < best.child_gini) {
      best.found = true;
      best.threshold = (vals[i].first + vals[i + 1].first) / 2.0;
      best.child_gini = g;
    }
  }
  return best;
}

namespace detail {

inline constexpr int kFeatureSubsample = 4;  // smallest integer >= sqrt(feature count)

inline int build_tree_node(DecisionTree& tree, const std::vector<LabeledExample>& data,
                           const std::vector<int>& idx, int depth, int max_depth, Rng& rng) {
  size_t pos = 0;
  for (int i : idx) pos += data[i].humorous ? 1 : 0;

  int id = static_cast<int>(tree.nodes.size());
  tree.nodes.emplace_back();
  tree.nodes[id].p_humorous = static_cast<double>(pos) / static_cast<double>(idx.size());

  bool pure = pos == 0 || pos == idx.size();
  if (pure || depth >= max_depth || idx.size() < 2) return id;

  // Candidate features arrive in a random order; the search keeps going past
  // the nominal subsample until some feature yields an improving split.
  std::vector<int> order(kNumFeatures);
  for (int f = 0; f < kNumFeatures; ++f) order[f] = f;
  shuffle_seq(order, rng);

  SplitChoice best;
  int examined = 0;
  for (int f : order) {
    SplitChoice s = find_best_split(data, idx, f);
    ++examined;
    if (s.found) {
      bool take = !best.found || s.child_gini < best.child_gini ||
                  (s.child_gini == best.child_gini &&
                   (s.feature < best.feature ||
                    (s.feature == best.feature && s.threshold < best.threshold)));
      if (take) best = s;
    }
    if (examined >= kFeatureSubsample && best.found) break;
  }
  if (!best.found) return id;  // constant or inseparable in every feature

  std::vector<int> left_idx, right_idx;
  for (int i : idx) {
    (data[i].features[best.feature] <= best.threshold ? left_idx : right_idx).push_back(i);
  }
  tree.nodes[id].feature = best.feature;
  tree.nodes[id].threshold = best.threshold;
  int l = build_tree_node(tree, data, left_idx, depth + 1, max_depth, rng);
  int r = build_tree_node(tree, data, right_idx, depth + 1, max_depth, rng);
  tree.nodes[id].left = l;
  tree.nodes[id].right = r;
  return id;
}

}  // namespace detail

inline HumorForest train_forest(const std::vector<LabeledExample>& examples, int trees = 100,
                                int max_depth = 12, uint64_t seed = 0) {
  if (examples.size() < 2) throw DataError("forest training needs at least two examples");
  size_t pos = 0;
  for (const auto& e : examples) pos += e.humorous ? 1 : 0;
  if (pos == 0 || pos == examples.size()) {
    throw DataError("forest training needs both classes present");
  }
  if (trees < 1) throw ConfigError("forest needs at least one tree");
  if (max_depth < 1) throw ConfigError("forest depth must be at least one");

  HumorForest forest;
  forest.seed = seed;
  forest.trees.resize(trees);
  for (int t = 0; t < trees; ++t) {
    Rng rng(derive_seed(seed, static_cast<uint64_t>(t)));
    std::vector<int> sample(examples.size());
    for (auto& s : sample) s = static_cast<int>(bounded(rng, examples.size()));
    detail::build_tree_node(forest.trees[t], examples, sample, 0, max_depth, rng);
  }
  return forest;
}

inline double tree_prob(const DecisionTree& tree, const FeatureVector& f) {
  int node = 0;
  while (tree.nodes[node].feature >= 0) {
    const ForestNode& n = tree.nodes[node];
    node = f[n.feature] <= n.threshold ? n.left : n.right;
  }
  return tree.nodes[node].p_humorous;
}

// Soft vote: mean leaf proportion of the humorous class across trees.
inline double humor_prob(const HumorForest& forest, const FeatureVector& f) {
  if (forest.trees.empty()) throw DataError("humor probability needs a trained forest");
  double sum = 0.0;
  for (const auto& t : forest.trees) sum += tree_prob(t, f);
  return sum / static_cast<double>(forest.trees.size());
}

// ---------------------------------------------------------------------------
// serialization: versioned flat node table
// header "#humor-forest<TAB>v1<TAB>tree count", rows
// "tree<TAB>node<TAB>feature<TAB>threshold<TAB>left<TAB>right<TAB>p_humorous"

inline void save_forest(const std::string& path, const HumorForest& forest) {
  std::ofstream out = open_output(path);
  out << "#humor-forest\tv1\t" << forest.trees.size() << '\n';
  for (size_t t = 0; t < forest.trees.size(); ++t) {
    const auto& nodes = forest.trees[t].nodes;
    for (size_t i = 0; i < nodes.size(); ++i) {
      out << t << '\t' << i << '\t' << nodes[i].feature << '\t' << fmt_double(nodes[i].threshold)
          << '\t' << nodes[i].left << '\t' << nodes[i].right << '\t'
          << fmt_double(nodes[i].p_humorous) << '\n';
    }
  }
  if (!out) throw IoError("write failed: " + path);
}

inline HumorForest load_forest(const std::string& path) {
  auto lines = read_lines(path);
  if (lines.empty()) throw ParseError(path + ": empty forest file");
  auto head = split_on(lines[0], '\t');
  if (head.size() != 3 || head[0] != "#humor-forest" || head[1] != "v1") {
    throw ParseError(path + ":1: bad forest header");
  }
  size_t n_trees = static_cast<size_t>(parse_int(head[2], path + ":1"));

  HumorForest forest;
  forest.trees.resize(n_trees);
  for (size_t ln = 1; ln < lines.size(); ++ln) {
    if (lines[ln].empty()) continue;
    auto cols = split_on(lines[ln], '\t');
    if (cols.size() != 7) {
      throw ParseError(path + ":" + std::to_string(ln + 1) + ": expected 7 fields");
    }
    const std::string where = path + ":" + std::to_string(ln + 1);
    size_t t = static_cast<size_t>(parse_int(cols[0], where));
    size_t node = static_cast<size_t>(parse_int(cols[1], where));
    if (t >= n_trees) throw ParseError(where + ": tree index out of range");
    auto& nodes = forest.trees[t].nodes;
    if (node != nodes.size()) throw ParseError(where + ": node rows must be dense and in order");
    ForestNode n;
    n.feature = static_cast<int>(parse_int(cols[2], where));
    if (n.feature < -1 || n.feature >= kNumFeatures) {
      throw ParseError(where + ": feature index out of range");
    }
    n.threshold = parse_double(cols[3], where);
    n.left = static_cast<int>(parse_int(cols[4], where));
    n.right = static_cast<int>(parse_int(cols[5], where));
    n.p_humorous = parse_double(cols[6], where);
    if (n.p_humorous < 0.0 || n.p_humorous > 1.0) {
      throw ParseError(where + ": class proportion outside [0,1]");
    }
    nodes.push_back(n);
  }
  for (size_t t = 0; t < n_trees; ++t) {
    const auto& nodes = forest.trees[t].nodes;
    if (nodes.empty()) throw ParseError(path + ": tree " + std::to_string(t) + " has no nodes");
    for (const auto& n : nodes) {
      if (n.feature >= 0) {
        if (n.left < 0 || n.right < 0 || n.left >= static_cast<int>(nodes.size()) ||
            n.right >= static_cast<int>(nodes.size())) {
          throw ParseError(path + ": child index out of range in tree " + std::to_string(t));
        }
      }
    }
  }
  return forest;
}

// ---------------------------------------------------------------------------
// labeled data: either "label<TAB>f1<TAB>...<TAB>f15" or
// "label<TAB>input tokens<TAB>response tokens" (features computed on load)

inline std::vector<LabeledExample> load_labeled_examples(const std::string& path,
                                                         const HumorLexicons* lex = nullptr) {
  std::vector<LabeledExample> out;
  size_t line_no = 0;
  for (const auto& line : read_lines(path)) {
    ++line_no;
    if (trim(line).empty() || line[0] == '#') continue;
    auto cols = split_on(line, '\t');
    const std::string where = path + ":" + std::to_string(line_no);
    LabeledExample e;
    if (cols[0] == "1") {
      e.humorous = true;
    } else if (cols[0] == "0") {
      e.humorous = false;
    } else {
      throw ParseError(where + ": label must be 0 or 1");
    }
    if (cols.size() == 1 + kNumFeatures) {
      for (int f = 0; f < kNumFeatures; ++f) e.features[f] = parse_double(cols[1 + f], where);
    } else if (cols.size() == 3) {
      if (!lex) throw ConfigError("raw labeled rows need the humor lexicons: " + where);
      e.features = extract_features(split_ws(cols[1]), split_ws(cols[2]), *lex);
    } else {
      throw ParseError(where + ": expected label plus features or label, input, response");
    }
    out.push_back(e);
  }
  return out;
}

inline void save_labeled_examples(const std::string& path,
                                  const std::vector<LabeledExample>& examples) {
  std::ofstream out = open_output(path);
  out << "# label then " << kNumFeatures << " features: distance extrema (response, turn), "
      << "antonym/synonym/polarity/homophone/rhyme (response, turn), slang count; "
      << "distance slots hold 0 when fewer than two tokens have vectors\n";
  for (const auto& e : examples) {
    out << (e.humorous ? '1' : '0');
    for (int f = 0; f < kNumFeatures; ++f) out << '\t' << fmt_double(e.features[f]);
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace penggen
