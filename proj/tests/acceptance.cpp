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

// End-to-end acceptance checks. Each criterion prints one [PASS]/[FAIL] line;
// the exit code is the number of failures. Criteria 10 and 11 drive the
// command-line binary; the rest call the library directly.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "penggen/common.hpp"
#include "penggen/corpus.hpp"
#include "penggen/decoder.hpp"
#include "penggen/evaluator.hpp"
#include "penggen/humor_model.hpp"
#include "penggen/language_model.hpp"
#include "penggen/lexicons.hpp"
#include "penggen/mert.hpp"
#include "penggen/retrieval.hpp"
#include "penggen/translation_model.hpp"
#include "test_util.hpp"

using namespace penggen;

namespace {

struct Failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void check(bool cond, const std::string& msg) {
  if (!cond) throw Failure(msg);
}

std::string fmt(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

// ---------------------------------------------------------------------------
// scratch dirs and binary invocation

std::filesystem::path scratch_dir(const std::string& name) {
  std::filesystem::path dir = std::filesystem::temp_directory_path() /
                              ("penggen-accept-" + std::to_string(::getpid())) / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  check(in.good(), "cannot open " + p.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// Runs the binary with stdout+stderr captured; any nonzero exit fails.
void run_cli(const std::string& args, const std::filesystem::path& log) {
  std::string cmd = std::string(PENGGEN_BIN) + " " + args + " > " + log.string() + " 2>&1";
  int status = std::system(cmd.c_str());
  int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  if (code != 0) {
    std::string tail = read_file(log);
    if (tail.size() > 300) tail = tail.substr(tail.size() - 300);
    throw Failure("command failed (exit " + std::to_string(code) + "): " + args + "\n" + tail);
  }
}

// ---------------------------------------------------------------------------
// criterion 1: corpus bleu fixtures

void bleu_fixtures() {
  std::vector<TokenSeq> refs = {{"a", "b", "c", "d"}, {"e", "f", "g", "h", "i"}};
  std::vector<double> identity = bleu(refs, refs);
  for (double s : identity) check(s == 100.0, "identity bleu is " + fmt(s));

  // Three of four reference tokens, full unigram overlap: the score is the
  // brevity penalty alone, 100 * exp(1 - 4/3).
  std::vector<double> bp = bleu({{"a", "b", "c"}}, {{"a", "b", "c", "d"}}, 1);
  check(std::abs(bp[0] - 71.653) < 0.01, "brevity fixture gave " + fmt(bp[0]));

  std::vector<double> disjoint = bleu({{"x", "y"}}, {{"a", "b"}});
  for (double s : disjoint) check(s == 0.0, "disjoint bleu is " + fmt(s));
}

// ---------------------------------------------------------------------------
// criterion 2: translation table row normalization

void table_normalization() {
  Rng rng(4242);
  std::vector<std::string> svoc = {"s1", "s2", "s3", "s4"};
  std::vector<std::string> rvoc = {"r1", "r2", "r3", "r4", "r5"};
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<UtterancePair> pairs;
    std::vector<Alignment> alignments;
    size_t n = 1 + bounded(rng, 5);
    for (size_t k = 0; k < n; ++k) {
      UtterancePair p;
      size_t sl = 1 + bounded(rng, 4), rl = 1 + bounded(rng, 4);
      for (size_t i = 0; i < sl; ++i) p.source.push_back(svoc[bounded(rng, svoc.size())]);
      for (size_t i = 0; i < rl; ++i) p.reference.push_back(rvoc[bounded(rng, rvoc.size())]);
      Alignment a;
      for (size_t i = 0; i < rl; ++i) a.push_back(static_cast<int>(bounded(rng, sl + 1)));
      pairs.push_back(std::move(p));
      alignments.push_back(std::move(a));
    }
    TranslationTable t = estimate_phi(pairs, alignments, 0.6);
    for (const auto& [s, row] : t.phi) {
      double sum = 0.0;
      for (const auto& [r, v] : row) sum += v;
      check(std::abs(sum - 1.0) <= 1e-9, "row for " + s + " sums to " + fmt(sum));
    }
  }

  // Hand count: s links to r1 twice and r2 once, t always to r3.
  std::vector<UtterancePair> pairs = {{{"s", "t"}, {"r1", "r3"}, "d", 0},
                                      {{"s"}, {"r1"}, "d", 2},
                                      {{"s"}, {"r2"}, "d", 4}};
  std::vector<Alignment> alignments = {{1, 2}, {1}, {1}};
  TranslationTable t = estimate_phi(pairs, alignments, 0.6);
  check(t.phi["s"]["r1"] == 2.0 / 3.0, "phi(r1|s) is " + fmt(t.phi["s"]["r1"]));
  check(t.phi["s"]["r2"] == 1.0 / 3.0, "phi(r2|s) is " + fmt(t.phi["s"]["r2"]));
  check(t.phi["t"]["r3"] == 1.0, "phi(r3|t) is " + fmt(t.phi["t"]["r3"]));
}

// ---------------------------------------------------------------------------
// criterion 3: alignment EM log-likelihood is monotone

void em_monotone() {
  std::vector<UtterancePair> pairs;
  std::vector<std::string> svoc = {"sa", "sb", "sc", "sd"};
  std::vector<std::string> rvoc = {"ta", "tb", "tc", "td", "te"};
  Rng rng(77);
  for (int k = 0; k < 20; ++k) {
    UtterancePair p;
    size_t sl = 1 + bounded(rng, 3), rl = 1 + bounded(rng, 4);
    for (size_t i = 0; i < sl; ++i) p.source.push_back(svoc[bounded(rng, svoc.size())]);
    for (size_t i = 0; i < rl; ++i) p.reference.push_back(rvoc[bounded(rng, rvoc.size())]);
    pairs.push_back(std::move(p));
  }
  AlignmentResult res = train_alignment(pairs, 15);
  check(res.log_likelihood.size() == 15, "expected one log-likelihood per iteration");
  for (size_t i = 1; i < res.log_likelihood.size(); ++i) {
    check(res.log_likelihood[i] >= res.log_likelihood[i - 1] - 1e-10,
          "log-likelihood dropped at iteration " + std::to_string(i));
  }
}

// ---------------------------------------------------------------------------
// criterion 4: language model normalizes exactly

void lm_normalization() {
  std::vector<TokenSeq> corpus{{"a", "b", "a"}, {"b", "c", "a", "a"}, {"c"}, {"a", "b"}};
  NGramModel m = train_lm(corpus, 4);
  std::set<std::string> support(m.vocab.begin(), m.vocab.end());
  support.insert(kEos);
  support.insert(kUnk);
  TokenSeq words{"a", "b", "c", "zzz", kBos};
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    TokenSeq h;
    size_t len = bounded(rng, 5);
    for (size_t i = 0; i < len; ++i) h.push_back(words[bounded(rng, words.size())]);
    double total = 0.0;
    for (const auto& w : support) total += cond_prob(m, w, h);
    check(std::abs(total - 1.0) <= 1e-6, "history sums to " + fmt(total));
  }
}

// ---------------------------------------------------------------------------
// criterion 5: decoder matches exhaustive enumeration

std::vector<Candidate> enumerate_all(const TokenSeq& source, const TranslationTable& table,
                                     const NGramModel& lm, const WeightVector& w,
                                     int beam_width) {
  size_t l = source.size();
  std::vector<std::vector<std::pair<std::string, double>>> options(l);
  for (size_t j = 0; j < l; ++j) options[j] = detail::top_options(table, source[j], 20);
  std::vector<int> perm(l);
  std::iota(perm.begin(), perm.end(), 1);
  std::vector<Candidate> all;
  do {
    std::vector<size_t> pick(l, 0);
    for (;;) {
      Candidate c;
      int b = 0;
      for (size_t i = 0; i < l; ++i) {
        int pos = perm[i];
        const auto& [word, phi] = options[pos - 1][pick[i]];
        c.tm += std::log(phi);
        c.ds += std::log(distortion(pos, b, table.alpha));
        c.lm += detail::lm_continuation(lm, c.tokens, word);
        c.tokens.push_back(word);
        b = pos;
      }
      c.lm += detail::lm_continuation(lm, c.tokens, kEos);
      c.combined = combined_score(c.tm, c.ds, c.lm, c.hm, w);
      all.push_back(std::move(c));
      size_t i = 0;
      while (i < l && ++pick[i] == options[perm[i] - 1].size()) pick[i++] = 0;
      if (i == l) break;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  std::sort(all.begin(), all.end(), [](const Candidate& a, const Candidate& b) {
    if (a.combined != b.combined) return a.combined > b.combined;
    return a.tokens < b.tokens;
  });
  std::vector<Candidate> unique;
  std::set<TokenSeq> seen;
  for (auto& c : all) {
    if (seen.insert(c.tokens).second) unique.push_back(std::move(c));
    if (unique.size() == static_cast<size_t>(beam_width)) break;
  }
  return unique;
}

void decoder_vs_oracle() {
  for (uint64_t seed = 1; seed <= 220; ++seed) {
    Rng rng(seed);
    TokenSeq source;
    TranslationTable table;
    size_t l = 1 + bounded(rng, 3);
    std::vector<std::string> svoc = {"s1", "s2", "s3"};
    std::vector<std::string> tvoc = {"t1", "t2", "t3", "t4"};
    for (size_t i = 0; i < l; ++i) source.push_back(svoc[bounded(rng, 3)]);
    for (const auto& s : svoc) {
      size_t n_opts = 1 + bounded(rng, 3);
      auto shuffled = tvoc;
      shuffle_seq(shuffled, rng);
      for (size_t k = 0; k < n_opts; ++k) {
        table.phi[s][shuffled[k]] = (1.0 + bounded(rng, 100)) / 101.0;
      }
    }
    table.alpha = (1.0 + bounded(rng, 8)) / 10.0;
    std::vector<TokenSeq> sents;
    for (int s = 0; s < 3; ++s) {
      TokenSeq sent;
      size_t n = 1 + bounded(rng, 4);
      for (size_t i = 0; i < n; ++i) sent.push_back(tvoc[bounded(rng, 4)]);
      sents.push_back(sent);
    }
    NGramModel lm = train_lm(sents, 2 + bounded(rng, 2), 0.75);
    WeightVector w;
    w.tm = (1.0 + bounded(rng, 20)) / 10.0;
    w.ds = (1.0 + bounded(rng, 20)) / 10.0;
    w.lm = (1.0 + bounded(rng, 20)) / 10.0;
    w.hm = 0.0;

    DecodeOptions opts;
    opts.beam_width = 1000;  // more than the 162 sequences three words can reach
    std::vector<Candidate> expected = enumerate_all(source, table, lm, w, 1000);
    NBestList got = decode_nbest(source, table, lm, nullptr, w, opts);
    check(got.candidates.size() == expected.size(),
          "seed " + std::to_string(seed) + ": size " + std::to_string(got.candidates.size()) +
              " vs " + std::to_string(expected.size()));
    for (size_t i = 0; i < expected.size(); ++i) {
      const Candidate& g = got.candidates[i];
      const Candidate& e = expected[i];
      check(g.tokens == e.tokens && g.tm == e.tm && g.ds == e.ds && g.lm == e.lm &&
                g.combined == e.combined,
            "seed " + std::to_string(seed) + ": rank " + std::to_string(i) + " differs");
    }
  }
}

// ---------------------------------------------------------------------------
// criterion 6: weight tuning

std::vector<TuningInstance> random_instances(uint64_t seed, size_t n_sents, size_t max_cands) {
  Rng rng(seed);
  std::vector<std::string> vocab = {"a", "b", "c", "d", "e"};
  std::vector<TuningInstance> out;
  for (size_t s = 0; s < n_sents; ++s) {
    TokenSeq ref;
    size_t rl = 3 + bounded(rng, 4);
    for (size_t i = 0; i < rl; ++i) ref.push_back(vocab[bounded(rng, vocab.size())]);
    TuningInstance inst;
    size_t nc = 1 + bounded(rng, max_cands);
    for (size_t c = 0; c < nc; ++c) {
      TokenSeq hyp;
      size_t hl = 2 + bounded(rng, 5);
      for (size_t i = 0; i < hl; ++i) hyp.push_back(vocab[bounded(rng, vocab.size())]);
      TuningCandidate tc;
      for (int d = 0; d < 4; ++d) tc.feat[d] = -5.0 * unit_real(rng);
      tc.stats = sentence_stats(hyp, ref);
      inst.candidates.push_back(tc);
    }
    out.push_back(std::move(inst));
  }
  return out;
}

double grid_best(const std::vector<TuningInstance>& instances, WeightVector w, int coord,
                 double lo, double hi, double step) {
  double best = -1.0;
  long long n = std::llround((hi - lo) / step);
  for (long long i = 0; i <= n; ++i) {
    set_weight(w, coord, lo + step * static_cast<double>(i));
    best = std::max(best, corpus_bleu_at(instances, w));
  }
  return best;
}

void tuning_contract() {
  // (a) tuning never loses to the starting point on a 50-sentence set.
  std::vector<TuningInstance> dev = random_instances(101, 50, 20);
  WeightVector init;
  double before = corpus_bleu_at(dev, init);
  double after = 0.0;
  WeightVector tuned = mert(dev, init, 30, 5, 8, 2, &after);
  check(after >= before - 1e-12,
        "tuning went from " + fmt(before) + " to " + fmt(after));
  check(corpus_bleu_at(dev, tuned) == after, "reported bleu disagrees with the weights");

  // (b) exact line search against a 0.001-step grid on small instance sets.
  for (uint64_t seed = 201; seed <= 210; ++seed) {
    std::vector<TuningInstance> instances = random_instances(seed, 4, 3);
    for (int coord = 0; coord < 4; ++coord) {
      WeightVector w;
      LineSearchResult ls = line_search(instances, w, coord);
      double grid = grid_best(instances, w, coord, ls.lambda - 10.0, ls.lambda + 10.0, 0.001);
      check(ls.bleu >= grid - 1e-9, "seed " + std::to_string(seed) + " coord " +
                                        std::to_string(coord) + ": grid beat the search");
      check(ls.bleu <= grid + 1e-6, "seed " + std::to_string(seed) + " coord " +
                                        std::to_string(coord) + ": search bleu " +
                                        fmt(ls.bleu) + " vs grid " + fmt(grid));
    }
  }

  // (c) same seed, same result, regardless of the job count.
  double b1 = 0.0, b2 = 0.0;
  WeightVector t1 = mert(dev, init, 30, 5, 8, 1, &b1);
  WeightVector t2 = mert(dev, init, 30, 5, 8, 3, &b2);
  check(b1 == b2 && t1.tm == t2.tm && t1.ds == t2.ds && t1.lm == t2.lm && t1.hm == t2.hm,
        "same seed produced different weights");
}

// ---------------------------------------------------------------------------
// criterion 7: humor features and forest

void humor_fixtures() {
  HumorLexicons lex = toy_lexicons();
  FeatureVector f = extract_features({}, {"高", "低"}, lex);
  check(f[kAntonymResp] == 1.0, "antonym count is " + fmt(f[kAntonymResp]));
  f = extract_features({}, {"好", "好", "坏"}, lex);
  check(f[kPolarityResp] == 1.0, "polarity sum is " + fmt(f[kPolarityResp]));
  f = extract_features({"猪尾"}, {"注意"}, lex);
  check(f[kHomophoneTurn] >= 1.0, "sound-alike pair missed");

  TokenSeq input{"好", "w1"};
  TokenSeq response{"高", "低", "w1", "w2", "好", "坏", "花", "家", "给力", "注意"};
  FeatureVector base = extract_features(input, response, lex);
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    TokenSeq shuffled = response;
    shuffle_seq(shuffled, rng);
    FeatureVector g = extract_features(input, shuffled, lex);
    for (int i = 0; i < kNumFeatures; ++i) {
      check(g[i] == base[i], "feature " + std::to_string(i) + " moved under reordering");
    }
  }

  // Separable 1-D data: negatives in [-2,-1], positives in [1,2].
  std::vector<LabeledExample> ex;
  for (int i = 0; i < 25; ++i) {
    ex.push_back(example_1d(-2.0 + i * 0.04, false));
    ex.push_back(example_1d(1.0 + i * 0.04, true));
  }
  HumorForest forest = train_forest(ex, 30, 6, 9);
  size_t correct = 0;
  for (const auto& e : ex) correct += ((humor_prob(forest, e.features) >= 0.5) == e.humorous);
  double acc = static_cast<double>(correct) / static_cast<double>(ex.size());
  check(acc >= 0.95, "training accuracy " + fmt(acc));

  Rng prng(31);
  for (int trial = 0; trial < 100; ++trial) {
    FeatureVector v{};
    for (int i = 0; i < kNumFeatures; ++i) v[i] = 6.0 * unit_real(prng) - 3.0;
    double p = humor_prob(forest, v);
    check(p >= 0.0 && p <= 1.0, "probability " + fmt(p) + " out of range");
  }

  std::filesystem::path dir = scratch_dir("forest");
  HumorForest again = train_forest(ex, 30, 6, 9);
  save_forest((dir / "a.txt").string(), forest);
  save_forest((dir / "b.txt").string(), again);
  check(read_file(dir / "a.txt") == read_file(dir / "b.txt"),
        "same seed produced different forests");
}

// ---------------------------------------------------------------------------
// criterion 8: rerank picks the humor argmax within the head

void rerank_contract() {
  Rng rng(505);
  for (int trial = 0; trial < 1000; ++trial) {
    NBestList nb;
    size_t n = 1 + bounded(rng, 12);
    for (size_t i = 0; i < n; ++i) {
      Candidate c;
      c.tokens = {"t" + std::to_string(i)};
      c.combined = -static_cast<double>(bounded(rng, 5));
      c.hm = -static_cast<double>(bounded(rng, 4));
      nb.candidates.push_back(std::move(c));
    }
    // Decoder output arrives sorted by combined score.
    std::stable_sort(nb.candidates.begin(), nb.candidates.end(),
                     [](const Candidate& a, const Candidate& b) { return a.combined > b.combined; });
    size_t head = std::min<size_t>(5, n);
    size_t expected = 0;
    for (size_t i = 1; i < head; ++i) {
      if (nb.candidates[i].hm > nb.candidates[expected].hm) expected = i;
    }
    size_t got = rerank_top5(nb, 5);
    check(got < head, "picked rank " + std::to_string(got) + " outside the head");
    check(got == expected, "picked " + std::to_string(got) + ", direct computation says " +
                               std::to_string(expected));
  }
}

// ---------------------------------------------------------------------------
// criterion 9: retrieval exact-match and empty-context equivalence

void retrieval_contract() {
  Rng rng(606);
  std::vector<std::string> vocab = {"qa", "qb", "qc", "qd", "qe", "qf"};
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<UtterancePair> train;
    size_t n = 5 + bounded(rng, 16);
    for (size_t i = 0; i < n; ++i) {
      UtterancePair p;
      p.dialogue_id = "d" + std::to_string(i);
      p.source = {"u" + std::to_string(i)};  // unique token pins the exact match
      size_t sl = bounded(rng, 3);
      for (size_t k = 0; k < sl; ++k) p.source.push_back(vocab[bounded(rng, vocab.size())]);
      size_t rl = 1 + bounded(rng, 3);
      for (size_t k = 0; k < rl; ++k) p.reference.push_back(vocab[bounded(rng, vocab.size())]);
      train.push_back(std::move(p));
    }
    RetrievalIndex index = build_index(train, {});
    size_t probe = bounded(rng, train.size());
    RetrievalResult r = ir_uu(train[probe].source, index);
    check(r.response == train[probe].reference,
          "query equal to a stored utterance missed its response");
  }

  std::vector<UtterancePair> pool;
  for (size_t i = 0; i < 40; ++i) {
    UtterancePair p;
    p.dialogue_id = "d" + std::to_string(i);
    size_t sl = 1 + bounded(rng, 4), rl = 1 + bounded(rng, 4);
    for (size_t k = 0; k < sl; ++k) p.source.push_back(vocab[bounded(rng, vocab.size())]);
    for (size_t k = 0; k < rl; ++k) p.reference.push_back(vocab[bounded(rng, vocab.size())]);
    pool.push_back(std::move(p));
  }
  RetrievalIndex index = build_index(pool, {});
  std::vector<std::string> qvoc = vocab;
  qvoc.push_back("zz");
  for (int trial = 0; trial < 500; ++trial) {
    TokenSeq q;
    size_t ql = 1 + bounded(rng, 5);
    for (size_t k = 0; k < ql; ++k) q.push_back(qvoc[bounded(rng, qvoc.size())]);
    RetrievalResult a = ir_ur(q, index);
    RetrievalResult b = ir_cxt(q, {}, index);
    check(a.response == b.response && a.no_overlap == b.no_overlap,
          "empty context diverged from the plain query");
  }
}

// ---------------------------------------------------------------------------
// criterion 10: cipher corpus end to end

void write_sides(const std::vector<UtterancePair>& pairs, const std::filesystem::path& src,
                 const std::filesystem::path& ref) {
  std::vector<TokenSeq> sources, refs;
  for (const auto& p : pairs) {
    sources.push_back(p.source);
    refs.push_back(p.reference);
  }
  save_sentences(src.string(), sources);
  save_sentences(ref.string(), refs);
}

void cipher_end_to_end() {
  std::filesystem::path dir = scratch_dir("cipher");
  std::filesystem::path log = dir / "log.txt";
  std::string corpus = testutil::data_file("cipher_corpus.jsonl");
  std::string lexicon = testutil::data_file("cipher_lexicon.txt");

  run_cli("split --corpus " + corpus + " --lexicon " + lexicon +
              " --seed 13 --test 50 --dev 100 --train-out " + (dir / "train.tsv").string() +
              " --dev-out " + (dir / "dev.tsv").string() + " --test-out " +
              (dir / "test.tsv").string(),
          log);
  run_cli("train-tm --pairs " + (dir / "train.tsv").string() + " --iterations 15 --output " +
              (dir / "tt.txt").string(),
          log);
  run_cli("train-lm --pairs " + (dir / "train.tsv").string() + " --order 4 --output " +
              (dir / "lm.txt").string(),
          log);

  std::vector<UtterancePair> train = load_pairs((dir / "train.tsv").string());
  std::vector<UtterancePair> dev = load_pairs((dir / "dev.tsv").string());
  std::vector<UtterancePair> test = load_pairs((dir / "test.tsv").string());
  std::set<std::string> seen;
  for (const auto& p : train) seen.insert(p.source.begin(), p.source.end());
  std::vector<UtterancePair> held;
  for (const auto& p : test) {
    bool ok = true;
    for (const auto& w : p.source) ok = ok && seen.count(w) > 0;
    if (ok) held.push_back(p);
  }
  check(held.size() >= 20, "only " + std::to_string(held.size()) + " test items have seen words");
  write_sides(dev, dir / "dev_src.txt", dir / "dev_ref.txt");
  write_sides(held, dir / "test_src.txt", dir / "test_ref.txt");

  run_cli("decode --input " + (dir / "dev_src.txt").string() + " --ttable " +
              (dir / "tt.txt").string() + " --lm " + (dir / "lm.txt").string() + " --nbest " +
              (dir / "dev_nbest.txt").string() + " --jobs 2",
          log);
  run_cli("tune --nbest " + (dir / "dev_nbest.txt").string() + " --refs " +
              (dir / "dev_ref.txt").string() + " --seed 29 --jobs 2 --output " +
              (dir / "weights.txt").string(),
          log);
  run_cli("decode --input " + (dir / "test_src.txt").string() + " --ttable " +
              (dir / "tt.txt").string() + " --lm " + (dir / "lm.txt").string() + " --weights " +
              (dir / "weights.txt").string() + " --best " + (dir / "test_best.txt").string() +
              " --jobs 2",
          log);
  run_cli("baseline --method rnd --train " + (dir / "train.tsv").string() + " --input " +
              (dir / "test_src.txt").string() + " --seed 31 --output " +
              (dir / "rnd_out.txt").string(),
          log);

  std::vector<TokenSeq> refs = load_sentences((dir / "test_ref.txt").string());
  std::vector<double> smt = bleu(load_sentences((dir / "test_best.txt").string()), refs);
  std::vector<double> rnd_scores = bleu(load_sentences((dir / "rnd_out.txt").string()), refs);
  check(smt[0] >= 95.0, "held-out unigram bleu " + fmt(smt[0]));
  check(smt[3] - rnd_scores[3] >= 30.0, "tuned 4-gram bleu " + fmt(smt[3]) +
                                            " does not clear random " + fmt(rnd_scores[3]) +
                                            " by 30");
}

// ---------------------------------------------------------------------------
// criterion 11: determinism and round-trips

void write_humor_fixture_files(const std::filesystem::path& dir) {
  std::vector<std::string> emb;
  for (int i = 0; i < 28; ++i) {
    emb.push_back(std::string(i < 10 ? "v0" : "v") + std::to_string(i) + " " +
                  fmt_double((i % 5) / 4.0) + " " + fmt_double((i / 5) / 6.0));
  }
  write_lines((dir / "emb.txt").string(), emb);
  write_lines((dir / "pinyin.tsv").string(),
              {"猪\tzhu1", "尾\tyi3", "注\tzhu4", "意\tyi4", "花\thua1", "家\tjia1"});
  write_lines((dir / "senti.tsv").string(), {"v01\t1", "v02\t-1"});
  write_lines((dir / "anto.tsv").string(), {"v03\tv04"});
  write_lines((dir / "syno.tsv").string(), {"v05\tv06"});
  write_lines((dir / "slang.txt").string(), {"v07"});
}

std::string lexicon_flags(const std::filesystem::path& dir) {
  return " --embeddings " + (dir / "emb.txt").string() + " --pinyin " +
         (dir / "pinyin.tsv").string() + " --sentiment " + (dir / "senti.tsv").string() +
         " --antonyms " + (dir / "anto.tsv").string() + " --synonyms " +
         (dir / "syno.tsv").string() + " --slang " + (dir / "slang.txt").string();
}

void run_pipeline(const std::filesystem::path& dir) {
  std::filesystem::path logs = dir / "logs";
  std::filesystem::create_directories(logs);
  auto at = [&](const std::string& name) { return (dir / name).string(); };
  std::string corpus = testutil::data_file("cipher_corpus.jsonl");
  std::string lexicon = testutil::data_file("cipher_lexicon.txt");

  write_lines(at("raw.txt"), {"w00w01w02", "w03w04", "w05w06w07w08", "w09w10", "w11", "w12w13"});
  run_cli("segment --input " + at("raw.txt") + " --lexicon " + lexicon + " --output " +
              at("seg.txt"),
          logs / "segment.log");
  run_cli("split --corpus " + corpus + " --lexicon " + lexicon +
              " --seed 13 --test 40 --dev 80 --train-out " + at("train.tsv") + " --dev-out " +
              at("dev.tsv") + " --test-out " + at("test.tsv"),
          logs / "split.log");
  run_cli("train-tm --pairs " + at("train.tsv") + " --iterations 10 --output " + at("tt.txt"),
          logs / "tm.log");
  run_cli("train-lm --pairs " + at("train.tsv") + " --order 3 --output " + at("lm.txt"),
          logs / "lm.log");

  std::vector<LabeledExample> examples;
  for (int i = 0; i < 20; ++i) {
    examples.push_back(example_1d(-2.0 + i * 0.05, false));
    examples.push_back(example_1d(1.0 + i * 0.05, true));
  }
  save_labeled_examples(at("examples.tsv"), examples);
  run_cli("train-humor --examples " + at("examples.tsv") +
              " --seed 17 --trees 20 --max-depth 6 --output " + at("forest.txt"),
          logs / "humor.log");
  write_humor_fixture_files(dir);

  write_sides(load_pairs(at("dev.tsv")), dir / "dev_src.txt", dir / "dev_ref.txt");
  write_sides(load_pairs(at("test.tsv")), dir / "test_src.txt", dir / "test_ref.txt");

  run_cli("decode --input " + at("dev_src.txt") + " --ttable " + at("tt.txt") + " --lm " +
              at("lm.txt") + " --nbest " + at("nbest.txt") + " --jobs 2",
          logs / "decode-dev.log");
  run_cli("tune --nbest " + at("nbest.txt") + " --refs " + at("dev_ref.txt") +
              " --seed 19 --jobs 2 --output " + at("weights.txt"),
          logs / "tune.log");
  run_cli("decode --input " + at("test_src.txt") + " --ttable " + at("tt.txt") + " --lm " +
              at("lm.txt") + " --weights " + at("weights.txt") + " --forest " + at("forest.txt") +
              lexicon_flags(dir) + " --nbest " + at("nbest2.txt") + " --best " + at("best.txt") +
              " --jobs 2",
          logs / "decode-test.log");
  run_cli("rerank --nbest " + at("nbest2.txt") + " --sources " + at("test_src.txt") +
              " --top 5 --output " + at("rr.txt"),
          logs / "rerank.log");

  std::vector<TokenSeq> queries = load_sentences(at("test_src.txt"));
  std::vector<std::string> ctx_lines(queries.size());
  ctx_lines[0] = "w00 w01\tw02 w03";
  ctx_lines[1] = "w04";
  ctx_lines[2] = "w05 w06\tw07\tw08 w09";
  write_lines(at("ctx.txt"), ctx_lines);
  for (const std::string method : {"ir-uu", "ir-ur"}) {
    run_cli("baseline --method " + method + " --train " + at("train.tsv") + " --dev " +
                at("dev.tsv") + " --input " + at("test_src.txt") + " --output " +
                at("base_" + method + ".txt"),
            logs / ("base-" + method + ".log"));
  }
  run_cli("baseline --method ir-cxt --train " + at("train.tsv") + " --input " +
              at("test_src.txt") + " --context " + at("ctx.txt") + " --output " +
              at("base_ir-cxt.txt"),
          logs / "base-cxt.log");
  run_cli("baseline --method rnd --train " + at("train.tsv") + " --input " + at("test_src.txt") +
              " --seed 23 --output " + at("base_rnd.txt"),
          logs / "base-rnd.log");

  run_cli("evaluate --hyp " + at("rr.txt") + " --ref " + at("test_ref.txt") + " --jobs 2 --json " +
              at("bleu.json"),
          logs / "eval-bleu.log");
  write_lines(at("ratings.tsv"),
              {"sysA\tfunny\ti1\tr1\t2", "sysA\tfunny\ti1\tr2\t1", "sysA\tfluent\ti1\tr1\t2",
               "sysB\tfunny\ti1\tr1\t1", "sysB\tfunny\ti1\tr2\t0", "sysB\tfluent\ti1\tr1\t2"});
  run_cli("evaluate --ratings " + at("ratings.tsv") + " --baseline sysB --json " +
              at("ratings.json"),
          logs / "eval-ratings.log");
}

void compare_trees(const std::filesystem::path& a, const std::filesystem::path& b) {
  std::vector<std::string> names;
  for (const auto& entry : std::filesystem::directory_iterator(a)) {
    if (entry.is_regular_file()) names.push_back(entry.path().filename().string());
  }
  std::sort(names.begin(), names.end());
  check(!names.empty(), "first run produced no artifacts");
  for (const auto& name : names) {
    check(std::filesystem::exists(b / name), "second run is missing " + name);
    check(read_file(a / name) == read_file(b / name), name + " differs between runs");
  }
}

void determinism_and_round_trip() {
  std::filesystem::path a = scratch_dir("pipe-a");
  std::filesystem::path b = scratch_dir("pipe-b");
  run_pipeline(a);
  run_pipeline(b);
  compare_trees(a, b);

  // Each artifact, read back and re-written, must reproduce its bytes.
  std::filesystem::path rt = scratch_dir("round-trip");
  auto same = [&](const std::string& name, const std::string& again) {
    check(read_file(a / name) == read_file(rt / again), name + " round-trip changed bytes");
  };
  for (const std::string name : {"train.tsv", "dev.tsv", "test.tsv"}) {
    save_pairs((rt / name).string(), load_pairs((a / name).string()));
    same(name, name);
  }
  save_translation_table((rt / "tt.txt").string(),
                         load_translation_table((a / "tt.txt").string()));
  same("tt.txt", "tt.txt");
  save_lm((rt / "lm.txt").string(), load_lm((a / "lm.txt").string()));
  same("lm.txt", "lm.txt");
  save_forest((rt / "forest.txt").string(), load_forest((a / "forest.txt").string()));
  same("forest.txt", "forest.txt");
  save_labeled_examples((rt / "examples.tsv").string(),
                        load_labeled_examples((a / "examples.tsv").string()));
  same("examples.tsv", "examples.tsv");
  for (const std::string name : {"nbest.txt", "nbest2.txt"}) {
    save_nbest((rt / name).string(), load_nbest((a / name).string()));
    same(name, name);
  }
  save_weights((rt / "weights.txt").string(), load_weights((a / "weights.txt").string()));
  same("weights.txt", "weights.txt");
  for (const std::string name : {"seg.txt", "best.txt", "rr.txt", "base_ir-uu.txt",
                                 "base_ir-ur.txt", "base_ir-cxt.txt", "base_rnd.txt",
                                 "dev_src.txt", "dev_ref.txt", "test_src.txt", "test_ref.txt"}) {
    save_sentences((rt / name).string(), load_sentences((a / name).string()));
    same(name, name);
  }
  for (const std::string name : {"bleu.json", "ratings.json"}) {
    nlohmann::json parsed = nlohmann::json::parse(read_file(a / name));
    std::ofstream out((rt / name), std::ios::binary);
    out << parsed.dump(2) << "\n";
    out.close();
    same(name, name);
  }
}

// ---------------------------------------------------------------------------

struct Criterion {
  int id;
  std::string name;
  double budget_seconds;
  std::function<void()> body;
};

}  // namespace

int main() {
  std::vector<Criterion> criteria = {
      {1, "bleu fixtures match hand-derived scores", 1, bleu_fixtures},
      {2, "translation table rows are normalized", 5, table_normalization},
      {3, "alignment EM log-likelihood is monotone", 1, em_monotone},
      {4, "language model normalizes exactly", 2, lm_normalization},
      {5, "decoder matches exhaustive enumeration", 30, decoder_vs_oracle},
      {6, "weight tuning improves dev bleu and matches a fine grid", 60, tuning_contract},
      {7, "humor features and forest behave on fixtures", 10, humor_fixtures},
      {8, "rerank picks the humor argmax within the head", 5, rerank_contract},
      {9, "retrieval exact-match and empty-context equivalence", 5, retrieval_contract},
      {10, "cipher pipeline reaches high held-out bleu", 180, cipher_end_to_end},
      {11, "pipeline is deterministic and artifacts round-trip", 180, determinism_and_round_trip},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    auto start = std::chrono::steady_clock::now();
    std::string error;
    try {
      c.body();
    } catch (const std::exception& e) {
      error = e.what();
    }
    double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (error.empty() && elapsed > c.budget_seconds) {
      error = "took " + fmt(elapsed) + "s, budget " + fmt(c.budget_seconds) + "s";
    }
    std::ostringstream line;
    line << (error.empty() ? "[PASS]" : "[FAIL]") << " criterion " << c.id << ": " << c.name;
    if (!error.empty()) line << ": " << error;
    line << " (" << std::fixed << std::setprecision(2) << elapsed << "s)";
    std::cout << line.str() << std::endl;
    failures += error.empty() ? 0 : 1;
  }
  return failures;
}
