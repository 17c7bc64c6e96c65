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
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "penggen/common.hpp"
#include "penggen/corpus.hpp"

namespace penggen {

using SparseVec = std::map<std::string, double>;

// Bag-of-words index over the retrieval pool. Utterances and responses are
// both documents for idf purposes; the vocabulary is frozen at build time, so
// query terms outside it contribute nothing.
struct RetrievalIndex {
  std::vector<UtterancePair> pool;  // pair id = position
  std::map<std::string, double> idf;
  std::vector<SparseVec> utterance_vecs;
  std::vector<SparseVec> response_vecs;
  bool use_idf = true;
};

struct RetrievalResult {
  TokenSeq response;
  bool no_overlap = false;  // nothing in the pool shared a term with the query
};

namespace detail {

inline double sparse_cosine(const SparseVec& a, const SparseVec& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (const auto& [term, w] : a) {
    na += w * w;
    auto it = b.find(term);
    if (it != b.end()) dot += w * it->second;
  }
  for (const auto& [term, w] : b) nb += w * w;
  if (dot == 0.0 || na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

inline SparseVec index_vector(const TokenSeq& tokens, const RetrievalIndex& index) {
  SparseVec v;
  for (const auto& t : tokens) {
    auto it = index.idf.find(t);
    if (it != index.idf.end()) v[t] += index.use_idf ? it->second : 1.0;
  }
  return v;
}

inline size_t argmax_similarity(const SparseVec& query, const std::vector<SparseVec>& docs,
                                bool* no_overlap) {
  size_t best = 0;
  double best_sim = 0.0;
  for (size_t i = 0; i < docs.size(); ++i) {
    double sim = sparse_cosine(query, docs[i]);
    if (sim > best_sim) {
      best_sim = sim;
      best = i;
    }
  }
  *no_overlap = (best_sim == 0.0);
  return best;
}

}  // namespace detail

// idf = ln(1 + N / df) over all pool utterances and responses as documents.
inline RetrievalIndex build_index(const std::vector<UtterancePair>& train,
                                  const std::vector<UtterancePair>& dev,
                                  bool use_idf = true) {
  RetrievalIndex index;
  index.use_idf = use_idf;
  index.pool = train;
  index.pool.insert(index.pool.end(), dev.begin(), dev.end());
  if (index.pool.empty()) throw DataError("retrieval pool is empty");

  std::map<std::string, long long> df;
  auto count_doc = [&](const TokenSeq& tokens) {
    std::set<std::string> uniq(tokens.begin(), tokens.end());
    for (const auto& t : uniq) ++df[t];
  };
  for (const auto& p : index.pool) {
    count_doc(p.source);
    count_doc(p.reference);
  }
  double n_docs = static_cast<double>(index.pool.size()) * 2.0;
  for (const auto& [term, d] : df) {
    index.idf[term] = std::log(1.0 + n_docs / static_cast<double>(d));
  }
  for (const auto& p : index.pool) {
    index.utterance_vecs.push_back(detail::index_vector(p.source, index));
    index.response_vecs.push_back(detail::index_vector(p.reference, index));
  }
  return index;
}

// Most similar pool response to the query.
inline RetrievalResult ir_ur(const TokenSeq& query, const RetrievalIndex& index) {
  if (index.pool.empty()) throw DataError("retrieval pool is empty");
  bool no_overlap = false;
  size_t best =
      detail::argmax_similarity(detail::index_vector(query, index), index.response_vecs,
                                &no_overlap);
  return {index.pool[best].reference, no_overlap};
}

// Most similar pool utterance to the query; returns its paired response.
inline RetrievalResult ir_uu(const TokenSeq& query, const RetrievalIndex& index) {
  if (index.pool.empty()) throw DataError("retrieval pool is empty");
  bool no_overlap = false;
  size_t best =
      detail::argmax_similarity(detail::index_vector(query, index), index.utterance_vecs,
                                &no_overlap);
  return {index.pool[best].reference, no_overlap};
}

// Like ir_ur, but the query vector covers up to three previous utterances
// concatenated ahead of the query itself.
inline RetrievalResult ir_cxt(const TokenSeq& query, const std::vector<TokenSeq>& context,
                              const RetrievalIndex& index) {
  if (context.size() > 3) throw DataError("context is limited to three utterances");
  TokenSeq joined;
  for (const auto& utt : context) joined.insert(joined.end(), utt.begin(), utt.end());
  joined.insert(joined.end(), query.begin(), query.end());
  return ir_ur(joined, index);
}

// Uniform seeded draw from the pool responses; the query is ignored.
inline TokenSeq rnd(const TokenSeq& query, const RetrievalIndex& index, uint64_t seed) {
  (void)query;
  if (index.pool.empty()) throw DataError("retrieval pool is empty");
  Rng rng(seed);
  return index.pool[bounded(rng, index.pool.size())].reference;
}

}  // namespace penggen
