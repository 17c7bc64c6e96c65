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

#include <algorithm>
#include <iomanip>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
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

namespace {

using namespace penggen;

struct LexiconPaths {
  std::string embeddings, pinyin, sentiment, antonyms, synonyms, slang;

  bool any() const {
    return !(embeddings.empty() && pinyin.empty() && sentiment.empty() && antonyms.empty() &&
             synonyms.empty() && slang.empty());
  }
  bool all() const {
    return !embeddings.empty() && !pinyin.empty() && !sentiment.empty() && !antonyms.empty() &&
           !synonyms.empty() && !slang.empty();
  }
  HumorLexicons load() const {
    HumorLexicons lex;
    lex.embeddings = load_embeddings(embeddings);
    lex.pinyin = load_pinyin(pinyin);
    lex.sentiment = load_sentiment(sentiment);
    lex.antonyms = load_word_pairs(antonyms);
    lex.synonyms = load_word_pairs(synonyms);
    lex.slang = load_slang(slang);
    return lex;
  }
};

void add_lexicon_options(CLI::App* cmd, LexiconPaths& p) {
  cmd->add_option("--embeddings", p.embeddings, "word embedding table");
  cmd->add_option("--pinyin", p.pinyin, "character-to-pinyin table");
  cmd->add_option("--sentiment", p.sentiment, "word polarity lexicon");
  cmd->add_option("--antonyms", p.antonyms, "antonym pair list");
  cmd->add_option("--synonyms", p.synonyms, "synonym pair list");
  cmd->add_option("--slang", p.slang, "network slang word list");
}

// Shared decode-side configuration for `decode` and `repl`.
struct PipelineConfig {
  std::string ttable_path, lm_path, forest_path, weights_path, segment_lexicon_path;
  LexiconPaths lexicons;
  int beam_width = 100;
  int rerank_depth = 5;
  int distortion_limit = 4;
  int options_per_word = 20;
  bool allow_null_insertions = false;

  TranslationTable table;
  NGramModel lm;
  HumorScorer scorer;
  bool use_humor = false;
  WeightVector weights;

  void validate() const {
    if (rerank_depth < 1) throw ConfigError("rerank depth must be positive");
    if (rerank_depth > beam_width) {
      throw ConfigError("rerank depth " + std::to_string(rerank_depth) +
                        " exceeds beam width " + std::to_string(beam_width));
    }
  }

  void load_artifacts() {
    validate();
    table = load_translation_table(ttable_path);
    lm = load_lm(lm_path);
    if (!weights_path.empty()) weights = load_weights(weights_path);
    if (!forest_path.empty()) {
      if (!lexicons.all()) {
        throw ConfigError("--forest needs all six lexicon files for feature extraction");
      }
      scorer.forest = load_forest(forest_path);
      scorer.lexicons = lexicons.load();
      use_humor = true;
    } else if (lexicons.any()) {
      throw ConfigError("lexicon files are only used together with --forest");
    }
  }

  DecodeOptions decode_options() const {
    DecodeOptions opts;
    opts.beam_width = beam_width;
    opts.distortion_limit = distortion_limit;
    opts.options_per_word = options_per_word;
    opts.allow_null_insertions = allow_null_insertions;
    return opts;
  }

  NBestList decode(const TokenSeq& source) const {
    if (source.empty()) {
      NBestList empty;
      empty.diagnostic = "empty source";
      return empty;
    }
    return decode_nbest(source, table, lm, use_humor ? &scorer : nullptr, weights,
                        decode_options());
  }
};

void add_pipeline_options(CLI::App* cmd, PipelineConfig& cfg, bool with_rerank_depth) {
  cmd->add_option("--ttable", cfg.ttable_path, "translation table")->required();
  cmd->add_option("--lm", cfg.lm_path, "n-gram language model")->required();
  cmd->add_option("--weights", cfg.weights_path, "log-linear weights (default all 1)");
  cmd->add_option("--forest", cfg.forest_path, "humor forest; enables the fourth component");
  add_lexicon_options(cmd, cfg.lexicons);
  cmd->add_option("--beam", cfg.beam_width, "beam width / n-best size")
      ->capture_default_str();
  cmd->add_option("--distortion-limit", cfg.distortion_limit,
                  "max jump between consecutively covered source positions")
      ->capture_default_str();
  cmd->add_option("--options-per-word", cfg.options_per_word,
                  "translation candidates kept per source word")
      ->capture_default_str();
  cmd->add_flag("--allow-null", cfg.allow_null_insertions,
                "enable null-sourced word insertions");
  if (with_rerank_depth) {
    cmd->add_option("--top", cfg.rerank_depth, "rerank depth over the n-best head")
        ->capture_default_str();
  }
}

std::vector<std::vector<TokenSeq>> load_contexts(const std::string& path) {
  std::vector<std::vector<TokenSeq>> out;
  for (const auto& line : read_lines(path)) {
    std::vector<TokenSeq> ctx;
    if (!trim(line).empty()) {
      for (const auto& part : split_on(line, '\t')) {
        TokenSeq utt = split_ws(part);
        if (!utt.empty()) ctx.push_back(std::move(utt));
      }
    }
    out.push_back(std::move(ctx));
  }
  return out;
}

// ---------------------------------------------------------------------------
// subcommand bodies

struct SegmentArgs {
  std::string input, lexicon, output;
};

int run_segment(const SegmentArgs& a) {
  std::set<std::string> lexicon = load_lexicon(a.lexicon);
  std::vector<std::string> out;
  for (const auto& line : read_lines(a.input)) out.push_back(join(segment(line, lexicon)));
  write_lines(a.output, out);
  std::cerr << "segmented " << out.size() << " lines\n";
  return 0;
}

struct SplitArgs {
  std::string corpus, lexicon, train_out, dev_out, test_out;
  size_t test_size = 2000, dev_size = 4000;
  size_t max_response = 60, min_response = 2;
  uint64_t seed = 0;
};

int run_split(const SplitArgs& a) {
  std::vector<DialogueTurn> turns = load_corpus(a.corpus);
  std::set<std::string> lexicon = load_lexicon(a.lexicon);
  ExtractStats stats;
  std::vector<UtterancePair> pairs = extract_pairs(turns, lexicon, &stats);
  std::vector<UtterancePair> kept = filter_pairs(pairs, a.max_response, a.min_response);
  CorpusSplit split = split_corpus(kept, a.test_size, a.dev_size, a.seed);
  save_pairs(a.train_out, split.train);
  save_pairs(a.dev_out, split.dev);
  save_pairs(a.test_out, split.test);
  std::cerr << "extracted " << stats.pairs << " pairs (dropped " << stats.unpaired_dougen
            << " unpaired leading utterances), kept " << kept.size() << " after length filter; "
            << "train " << split.train.size() << ", dev " << split.dev.size() << ", test "
            << split.test.size() << "\n";
  return 0;
}

struct TrainTmArgs {
  std::string pairs, output;
  int iterations = 15;
  double alpha = 0.6;
};

int run_train_tm(const TrainTmArgs& a) {
  if (a.alpha <= 0.0 || a.alpha >= 1.0) {
    throw ConfigError("alpha must lie strictly between 0 and 1");
  }
  std::vector<UtterancePair> pairs = load_pairs(a.pairs);
  AlignmentResult result = train_alignment(pairs, a.iterations);
  TranslationTable table = estimate_phi(pairs, result.alignments, a.alpha);
  save_translation_table(a.output, table);
  std::cerr << "trained on " << pairs.size() << " pairs, " << a.iterations << " iterations";
  if (!result.log_likelihood.empty()) {
    std::cerr << ", final log-likelihood " << fmt_double(result.log_likelihood.back());
  }
  std::cerr << "\n";
  return 0;
}

struct TrainLmArgs {
  std::string pairs, text, output;
  int order = 4;
  double mu = 0.75;
};

int run_train_lm(const TrainLmArgs& a) {
  std::vector<TokenSeq> sentences;
  if (!a.pairs.empty()) {
    for (const auto& p : load_pairs(a.pairs)) sentences.push_back(p.reference);
  } else {
    sentences = load_sentences(a.text);
  }
  NGramModel model = train_lm(sentences, a.order, a.mu);
  save_lm(a.output, model);
  std::cerr << "trained order-" << model.order << " model on " << sentences.size()
            << " sentences, vocabulary " << model.vocab.size() << "\n";
  return 0;
}

struct TrainHumorArgs {
  std::string examples, output;
  LexiconPaths lexicons;
  int trees = 100, max_depth = 12;
  uint64_t seed = 0;
  bool rebalance_classes = true;
};

int run_train_humor(const TrainHumorArgs& a) {
  HumorLexicons lex;
  const HumorLexicons* lex_ptr = nullptr;
  if (a.lexicons.any()) {
    if (!a.lexicons.all()) {
      throw ConfigError("raw-text examples need all six lexicon files");
    }
    lex = a.lexicons.load();
    lex_ptr = &lex;
  }
  std::vector<LabeledExample> examples = load_labeled_examples(a.examples, lex_ptr);
  if (a.rebalance_classes) examples = rebalance(examples, derive_seed(a.seed, 0));
  HumorForest forest = train_forest(examples, a.trees, a.max_depth, derive_seed(a.seed, 1));
  size_t correct = 0;
  for (const auto& e : examples) {
    correct += ((humor_prob(forest, e.features) >= 0.5) == e.humorous) ? 1 : 0;
  }
  save_forest(a.output, forest);
  std::cerr << "trained " << a.trees << " trees on " << examples.size()
            << " examples, training accuracy "
            << static_cast<double>(correct) / static_cast<double>(examples.size()) << "\n";
  return 0;
}

struct DecodeArgs {
  PipelineConfig cfg;
  std::string input, nbest_out, best_out;
  int jobs = 1;
};

int run_decode(DecodeArgs& a) {
  a.cfg.load_artifacts();
  std::vector<TokenSeq> sources = load_sentences(a.input);
  std::vector<NBestList> results(sources.size());
  parallel_for(sources.size(), a.jobs, [&](size_t i) { results[i] = a.cfg.decode(sources[i]); });
  if (!a.nbest_out.empty()) save_nbest(a.nbest_out, results);
  size_t fallbacks = 0;
  if (!a.best_out.empty()) {
    std::vector<std::string> lines;
    for (size_t i = 0; i < results.size(); ++i) {
      if (results[i].candidates.empty()) {
        ++fallbacks;
        std::cerr << "sentence " << i << ": " << results[i].diagnostic
                  << "; echoing the input\n";
        lines.push_back(join(sources[i]));
      } else {
        lines.push_back(join(results[i].candidates[0].tokens));
      }
    }
    write_lines(a.best_out, lines);
  }
  std::cerr << "decoded " << sources.size() << " sentences";
  if (!a.best_out.empty()) std::cerr << ", " << fallbacks << " echo fallbacks";
  std::cerr << "\n";
  return 0;
}

struct TuneArgs {
  std::string nbest, refs, init, output;
  int iterations = 30, restarts = 8, jobs = 1;
  uint64_t seed = 0;
};

int run_tune(const TuneArgs& a) {
  std::vector<NBestList> lists = load_nbest(a.nbest);
  std::vector<TokenSeq> refs = load_sentences(a.refs);
  if (lists.size() > refs.size()) {
    throw DataError("n-best file has more sentences than the reference file");
  }
  lists.resize(refs.size());  // trailing sentences may have produced no candidates
  std::vector<TuningInstance> instances = make_tuning_instances(lists, refs);
  WeightVector init;
  if (!a.init.empty()) init = load_weights(a.init);
  double init_bleu = corpus_bleu_at(instances, init);
  double tuned_bleu = 0.0;
  WeightVector tuned =
      mert(instances, init, a.iterations, a.seed, a.restarts, a.jobs, &tuned_bleu);
  save_weights(a.output, tuned);
  std::cerr << "tuned on " << instances.size() << " sentences: BLEU-4 "
            << fmt_double(init_bleu) << " -> " << fmt_double(tuned_bleu) << "\n";
  return 0;
}

struct EvaluateArgs {
  std::string hyp, ref, ratings, baseline, json_out;
  int jobs = 1;
};

int run_evaluate_bleu(const EvaluateArgs& a) {
  std::vector<TokenSeq> hyps = load_sentences(a.hyp);
  std::vector<TokenSeq> refs = load_sentences(a.ref);
  if (hyps.size() != refs.size()) {
    throw DataError("hypothesis count " + std::to_string(hyps.size()) +
                    " does not match reference count " + std::to_string(refs.size()));
  }
  if (refs.empty()) throw DataError("bleu needs at least one sentence");
  std::vector<BleuStats> per_sentence(refs.size());
  parallel_for(refs.size(), a.jobs, [&](size_t i) {
    if (refs[i].empty()) throw DataError("empty reference at line " + std::to_string(i + 1));
    per_sentence[i] = sentence_stats(hyps[i], refs[i], 4);
  });
  BleuStats total;
  for (const auto& st : per_sentence) total += st;

  std::cout << "  n    BLEU\n";
  nlohmann::json report;
  for (int n = 1; n <= 4; ++n) {
    double score = bleu_from_stats(total, n);
    std::cout << "  " << n << "  " << std::fixed << std::setprecision(3) << std::setw(7)
              << score << "\n";
    report["bleu"][std::to_string(n)] = score;
  }
  report["sentences"] = refs.size();
  report["hyp_len"] = total.hyp_len;
  report["ref_len"] = total.ref_len;
  if (!a.json_out.empty()) {
    std::ofstream out = open_output(a.json_out);
    out << report.dump(2) << "\n";
    if (!out) throw IoError("write failed: " + a.json_out);
  }
  return 0;
}

int run_evaluate_ratings(const EvaluateArgs& a) {
  std::vector<RatingRecord> records = load_ratings(a.ratings);
  auto means = rating_means(records);
  auto ratios = rating_ratios(records, a.baseline);
  std::cout << std::left << std::setw(16) << "system" << std::setw(16) << "aspect"
            << std::right << std::setw(8) << "mean" << std::setw(10) << "ratio%" << "\n";
  nlohmann::json report;
  for (const auto& [system, by_aspect] : means) {
    for (const auto& [aspect, mean] : by_aspect) {
      std::cout << std::left << std::setw(16) << system << std::setw(16) << aspect
                << std::right << std::setw(8) << std::fixed << std::setprecision(3) << mean;
      report["means"][system][aspect] = mean;
      auto sys_it = ratios.find(system);
      if (sys_it != ratios.end() && sys_it->second.count(aspect)) {
        double ratio = sys_it->second.at(aspect);
        std::cout << std::setw(10) << std::setprecision(2) << ratio;
        report["ratios"][system][aspect] = ratio;
      }
      std::cout << "\n";
    }
  }
  report["baseline"] = a.baseline;
  if (!a.json_out.empty()) {
    std::ofstream out = open_output(a.json_out);
    out << report.dump(2) << "\n";
    if (!out) throw IoError("write failed: " + a.json_out);
  }
  return 0;
}

struct BaselineArgs {
  std::string method, train, dev, input, context, output;
  uint64_t seed = 0;
  bool seed_given = false;
  bool raw_tf = false;
  int jobs = 1;
};

int run_baseline(const BaselineArgs& a) {
  if (a.method == "rnd" && !a.seed_given) {
    throw ConfigError("the rnd baseline needs an explicit --seed");
  }
  std::vector<UtterancePair> train = load_pairs(a.train);
  std::vector<UtterancePair> dev;
  if (!a.dev.empty()) dev = load_pairs(a.dev);
  RetrievalIndex index = build_index(train, dev, !a.raw_tf);
  std::vector<TokenSeq> queries = load_sentences(a.input);
  std::vector<std::vector<TokenSeq>> contexts;
  if (!a.context.empty()) {
    contexts = load_contexts(a.context);
    if (contexts.size() != queries.size()) {
      throw DataError("context line count does not match query count");
    }
  }
  std::vector<TokenSeq> responses(queries.size());
  std::vector<char> flagged(queries.size(), 0);
  parallel_for(queries.size(), a.jobs, [&](size_t i) {
    if (a.method == "ir-uu") {
      RetrievalResult r = ir_uu(queries[i], index);
      responses[i] = r.response;
      flagged[i] = r.no_overlap;
    } else if (a.method == "ir-ur") {
      RetrievalResult r = ir_ur(queries[i], index);
      responses[i] = r.response;
      flagged[i] = r.no_overlap;
    } else if (a.method == "ir-cxt") {
      RetrievalResult r = ir_cxt(queries[i], contexts.empty() ? std::vector<TokenSeq>{}
                                                              : contexts[i],
                                 index);
      responses[i] = r.response;
      flagged[i] = r.no_overlap;
    } else {
      responses[i] = rnd(queries[i], index, derive_seed(a.seed, i));
    }
  });
  std::vector<std::string> lines;
  for (const auto& r : responses) lines.push_back(join(r));
  write_lines(a.output, lines);
  size_t n_flagged = 0;
  for (char f : flagged) n_flagged += f;
  std::cerr << a.method << " answered " << queries.size() << " queries";
  if (a.method != "rnd") std::cerr << ", " << n_flagged << " no-overlap fallbacks";
  std::cerr << "\n";
  return 0;
}

struct RerankArgs {
  std::string nbest, sources, output;
  int depth = 5;
};

int run_rerank(const RerankArgs& a) {
  if (a.depth < 1) throw ConfigError("rerank depth must be positive");
  std::vector<NBestList> lists = load_nbest(a.nbest);
  std::vector<TokenSeq> sources;
  size_t n = lists.size();
  if (!a.sources.empty()) {
    sources = load_sentences(a.sources);
    if (lists.size() > sources.size()) {
      throw DataError("n-best file has more sentences than the source file");
    }
    n = sources.size();
    lists.resize(n);
  }
  std::vector<std::string> lines;
  size_t fallbacks = 0;
  for (size_t i = 0; i < n; ++i) {
    if (lists[i].candidates.empty()) {
      if (sources.empty()) {
        throw DataError("sentence " + std::to_string(i) +
                        " has no candidates; pass --sources for the echo fallback");
      }
      ++fallbacks;
      std::cerr << "sentence " << i << ": empty candidate list; echoing the input\n";
      lines.push_back(join(sources[i]));
    } else {
      lines.push_back(join(lists[i].candidates[rerank_top5(lists[i], a.depth)].tokens));
    }
  }
  write_lines(a.output, lines);
  std::cerr << "reranked " << n << " sentences, " << fallbacks << " echo fallbacks\n";
  return 0;
}

struct ReplArgs {
  PipelineConfig cfg;
  bool verbose = false;
};

int run_repl(ReplArgs& a) {
  a.cfg.load_artifacts();
  std::set<std::string> seg_lexicon;
  bool do_segment = !a.cfg.segment_lexicon_path.empty();
  if (do_segment) seg_lexicon = load_lexicon(a.cfg.segment_lexicon_path);
  std::string line;
  while (true) {
    std::cerr << "> " << std::flush;
    if (!std::getline(std::cin, line)) break;
    if (trim(line).empty()) continue;
    TokenSeq tokens = do_segment ? segment(line, seg_lexicon) : split_ws(line);
    NBestList nb = a.cfg.decode(tokens);
    if (nb.candidates.empty()) {
      std::cerr << "warning: " << nb.diagnostic << "; echoing the input\n";
      std::cout << join(tokens) << "\n" << std::flush;
      continue;
    }
    size_t pick = a.cfg.use_humor ? rerank_top5(nb, a.cfg.rerank_depth) : 0;
    std::cout << join(nb.candidates[pick].tokens) << "\n" << std::flush;
    if (a.verbose) {
      size_t show = std::min(nb.candidates.size(), static_cast<size_t>(a.cfg.rerank_depth));
      for (size_t i = 0; i < show; ++i) {
        const Candidate& c = nb.candidates[i];
        std::cout << "  [" << (i + 1) << (i == pick ? "*" : "") << "] " << join(c.tokens)
                  << "  tm=" << fmt_double(c.tm) << " ds=" << fmt_double(c.ds)
                  << " lm=" << fmt_double(c.lm) << " hm=" << fmt_double(c.hm)
                  << " combined=" << fmt_double(c.combined) << "\n";
      }
      std::cout << std::flush;
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dialogue response generation via monolingual translation"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key=value config file; flags take precedence")
      ->envname("PENGGEN_CONFIG");

  SegmentArgs segment_args;
  CLI::App* c_segment = app.add_subcommand("segment", "tokenize raw text lines");
  c_segment->add_option("--input", segment_args.input, "raw text, one sentence per line")
      ->required();
  c_segment->add_option("--lexicon", segment_args.lexicon, "word list")->required();
  c_segment->add_option("--output", segment_args.output, "tokenized output")->required();

  SplitArgs split_args;
  CLI::App* c_split = app.add_subcommand("split", "extract pairs and split the corpus");
  c_split->add_option("--corpus", split_args.corpus, "dialogue corpus (JSONL)")->required();
  c_split->add_option("--lexicon", split_args.lexicon, "word list")->required();
  c_split->add_option("--test", split_args.test_size, "test pair count")
      ->capture_default_str();
  c_split->add_option("--dev", split_args.dev_size, "dev pair count")->capture_default_str();
  c_split->add_option("--max-response", split_args.max_response, "max response words")
      ->capture_default_str();
  c_split->add_option("--min-response", split_args.min_response, "min response words")
      ->capture_default_str();
  c_split->add_option("--seed", split_args.seed, "shuffle seed")->required();
  c_split->add_option("--train-out", split_args.train_out, "train pairs out")->required();
  c_split->add_option("--dev-out", split_args.dev_out, "dev pairs out")->required();
  c_split->add_option("--test-out", split_args.test_out, "test pairs out")->required();

  TrainTmArgs tm_args;
  CLI::App* c_tm = app.add_subcommand("train-tm", "train the word translation table");
  c_tm->add_option("--pairs", tm_args.pairs, "training pairs (TSV)")->required();
  c_tm->add_option("--iterations", tm_args.iterations, "EM iterations")
      ->capture_default_str();
  c_tm->add_option("--alpha", tm_args.alpha, "distortion base in (0,1)")
      ->capture_default_str();
  c_tm->add_option("--output", tm_args.output, "translation table out")->required();

  TrainLmArgs lm_args;
  CLI::App* c_lm = app.add_subcommand("train-lm", "train the n-gram language model");
  CLI::Option* lm_pairs =
      c_lm->add_option("--pairs", lm_args.pairs, "training pairs; uses the response side");
  c_lm->add_option("--text", lm_args.text, "tokenized sentences, one per line")
      ->excludes(lm_pairs);
  c_lm->add_option("--order", lm_args.order, "n-gram order (1..4)")->capture_default_str();
  c_lm->add_option("--mu", lm_args.mu, "interpolation weight in (0,1)")
      ->capture_default_str();
  c_lm->add_option("--output", lm_args.output, "language model out")->required();

  TrainHumorArgs humor_args;
  CLI::App* c_humor = app.add_subcommand("train-humor", "train the humor forest");
  c_humor->add_option("--examples", humor_args.examples,
                      "labeled examples (features or raw text)")
      ->required();
  add_lexicon_options(c_humor, humor_args.lexicons);
  c_humor->add_option("--trees", humor_args.trees, "tree count")->capture_default_str();
  c_humor->add_option("--max-depth", humor_args.max_depth, "max tree depth")
      ->capture_default_str();
  c_humor->add_option("--seed", humor_args.seed, "training seed")->required();
  c_humor->add_flag("--rebalance,!--no-rebalance", humor_args.rebalance_classes,
                    "oversample the minority class when imbalanced");
  c_humor->add_option("--output", humor_args.output, "forest out")->required();

  DecodeArgs decode_args;
  CLI::App* c_decode = app.add_subcommand("decode", "translate sources into n-best lists");
  c_decode->add_option("--input", decode_args.input, "tokenized sources, one per line")
      ->required();
  add_pipeline_options(c_decode, decode_args.cfg, false);
  CLI::Option* nbest_opt =
      c_decode->add_option("--nbest", decode_args.nbest_out, "n-best list out");
  c_decode->add_option("--best", decode_args.best_out, "top-1 responses out (echo fallback)");
  c_decode->add_option("--jobs", decode_args.jobs, "worker threads")->capture_default_str();

  TuneArgs tune_args;
  CLI::App* c_tune = app.add_subcommand("tune", "estimate log-linear weights by MERT");
  c_tune->add_option("--nbest", tune_args.nbest, "dev n-best lists")->required();
  c_tune->add_option("--refs", tune_args.refs, "dev references, one per line")->required();
  c_tune->add_option("--init", tune_args.init, "initial weights (default all 1)");
  c_tune->add_option("--iterations", tune_args.iterations, "max outer iterations")
      ->capture_default_str();
  c_tune->add_option("--restarts", tune_args.restarts, "random restarts")
      ->capture_default_str();
  c_tune->add_option("--seed", tune_args.seed, "restart seed")->required();
  c_tune->add_option("--jobs", tune_args.jobs, "worker threads")->capture_default_str();
  c_tune->add_option("--output", tune_args.output, "weights out")->required();

  EvaluateArgs eval_args;
  CLI::App* c_eval = app.add_subcommand("evaluate", "score hypotheses or rating tables");
  CLI::Option* hyp_opt = c_eval->add_option("--hyp", eval_args.hyp, "hypotheses");
  CLI::Option* ref_opt = c_eval->add_option("--ref", eval_args.ref, "references");
  CLI::Option* ratings_opt =
      c_eval->add_option("--ratings", eval_args.ratings, "human rating records (TSV)");
  CLI::Option* baseline_opt =
      c_eval->add_option("--baseline", eval_args.baseline, "baseline system for ratios");
  c_eval->add_option("--json", eval_args.json_out, "also write a JSON report");
  c_eval->add_option("--jobs", eval_args.jobs, "worker threads")->capture_default_str();
  hyp_opt->needs(ref_opt);
  ref_opt->needs(hyp_opt);
  ratings_opt->excludes(hyp_opt)->needs(baseline_opt);
  baseline_opt->needs(ratings_opt);

  BaselineArgs base_args;
  CLI::App* c_base = app.add_subcommand("baseline", "retrieval and random baselines");
  c_base->add_option("--method", base_args.method, "ir-uu | ir-ur | ir-cxt | rnd")
      ->required()
      ->check(CLI::IsMember({"ir-uu", "ir-ur", "ir-cxt", "rnd"}));
  c_base->add_option("--train", base_args.train, "train pairs (TSV)")->required();
  c_base->add_option("--dev", base_args.dev, "dev pairs pooled with train");
  c_base->add_option("--input", base_args.input, "tokenized queries, one per line")
      ->required();
  c_base->add_option("--context", base_args.context,
                     "per-query context: up to 3 tab-separated utterances per line");
  CLI::Option* seed_opt = c_base->add_option("--seed", base_args.seed, "seed for rnd");
  c_base->add_flag("--raw-tf", base_args.raw_tf, "cosine over raw term counts, no idf");
  c_base->add_option("--jobs", base_args.jobs, "worker threads")->capture_default_str();
  c_base->add_option("--output", base_args.output, "responses out")->required();

  RerankArgs rerank_args;
  CLI::App* c_rerank = app.add_subcommand("rerank", "pick the humor-best head candidate");
  c_rerank->add_option("--nbest", rerank_args.nbest, "n-best lists")->required();
  c_rerank->add_option("--top", rerank_args.depth, "rerank depth")->capture_default_str();
  c_rerank->add_option("--sources", rerank_args.sources,
                       "source sentences for the echo fallback");
  c_rerank->add_option("--output", rerank_args.output, "responses out")->required();

  ReplArgs repl_args;
  CLI::App* c_repl = app.add_subcommand("repl", "interactive response generation");
  add_pipeline_options(c_repl, repl_args.cfg, true);
  c_repl->add_option("--segment-lexicon", repl_args.cfg.segment_lexicon_path,
                     "segment raw input with this word list (default: whitespace tokens)");
  c_repl->add_flag("--verbose", repl_args.verbose, "show the reranked head with scores");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 64;
  }

  try {
    if (app.got_subcommand(c_segment)) return run_segment(segment_args);
    if (app.got_subcommand(c_split)) return run_split(split_args);
    if (app.got_subcommand(c_tm)) return run_train_tm(tm_args);
    if (app.got_subcommand(c_lm)) {
      if (lm_args.pairs.empty() && lm_args.text.empty()) {
        throw ConfigError("train-lm needs --pairs or --text");
      }
      return run_train_lm(lm_args);
    }
    if (app.got_subcommand(c_humor)) return run_train_humor(humor_args);
    if (app.got_subcommand(c_decode)) {
      if (decode_args.nbest_out.empty() && decode_args.best_out.empty()) {
        throw ConfigError("decode needs --nbest and/or --best");
      }
      (void)nbest_opt;
      return run_decode(decode_args);
    }
    if (app.got_subcommand(c_tune)) return run_tune(tune_args);
    if (app.got_subcommand(c_eval)) {
      if (!eval_args.ratings.empty()) return run_evaluate_ratings(eval_args);
      if (eval_args.hyp.empty()) {
        throw ConfigError("evaluate needs --hyp/--ref or --ratings/--baseline");
      }
      return run_evaluate_bleu(eval_args);
    }
    if (app.got_subcommand(c_base)) {
      base_args.seed_given = seed_opt->count() > 0;
      return run_baseline(base_args);
    }
    if (app.got_subcommand(c_rerank)) return run_rerank(rerank_args);
    if (app.got_subcommand(c_repl)) return run_repl(repl_args);
    throw ConfigError("no subcommand selected");
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 78;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 66;
  } catch (const ParseError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return 65;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 65;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 70;
  }
}
