// Copyright 2026 The SkipKV Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <vector>

#include "skipkv/tensor.hpp"
#include "skipkv/trace.hpp"

namespace skipkv {

struct ScoringConfig {
  float sigma = 0.1F;
  float tau = 0.95F;
  float epsilon = 1e-6F;
  std::size_t alpha_window = 32;

  void validate() const;
};

/// Unit-L2 sentence vector.
struct SentenceEmbedding {
  std::vector<float> values;
};

/// Mean of rows [begin, end] of `hidden` ([rows x d_model]), L2-normalized.
/// Throws kInvalidArgument when the mean has zero norm.
SentenceEmbedding sentence_embedding(const Tensor& hidden, std::size_t begin, std::size_t end);

/// Pairwise sentence similarity: dot product of unit embeddings.
float pss(const SentenceEmbedding& a, const SentenceEmbedding& b);

/// Sentences flagged redundant, keyed by their position in the embedding list.
struct RedundantSet {
  std::map<std::size_t, float> lambda;
  float tau = 0.95F;

  bool contains(std::size_t sentence) const { return lambda.contains(sentence); }
  std::size_t size() const { return lambda.size(); }
};

/// Flags the earlier sentence of every pair i < j with pss > tau; lambda_i is
/// the maximum similarity over all such partners j.
RedundantSet redundant_set(std::span<const SentenceEmbedding> embeddings, float tau);

/// Observation-window attention importance per KV head.
///
/// q: [H_q x alpha x d], k: [H_k x N' x d]; one mask per KV head. Returns
/// [H_k x N'] where each row is a distribution over key positions that is
/// zero at padded slots. Throws kInvalidArgument if a head has no valid slot.
Tensor token_importance(const Tensor& q, const Tensor& k, std::span<const AttentionMask> masks,
                        const ModelShape& shape);
Tensor token_importance(const Tensor& q, const Tensor& k, const AttentionMask& mask,
                        const ModelShape& shape);

/// Key self-similarity redundancy per KV head: column means, over valid rows,
/// of the row-softmaxed cosine-similarity matrix. Returns [H_k x N'].
Tensor token_redundancy(const Tensor& k, std::span<const AttentionMask> masks, float epsilon);
Tensor token_redundancy(const Tensor& k, const AttentionMask& mask, float epsilon);

/// One flagged sentence's live range in cache coordinates (inclusive).
struct LookupEntry {
  std::size_t begin = 0;
  std::size_t end = 0;
  float lambda = 0.0F;

  bool operator==(const LookupEntry&) const = default;
};
using CacheLookup = std::vector<LookupEntry>;

/// sigma * I - (1 - sigma) * R, minus lambda over every looked-up range.
/// Throws kInvalidArgument on overlapping or out-of-range entries.
std::vector<float> fuse(std::span<const float> importance, std::span<const float> redundancy,
                        float sigma, const CacheLookup& lookup);
/// Tensor form; the same lookup applies to every head.
Tensor fuse(const Tensor& importance, const Tensor& redundancy, float sigma,
            const CacheLookup& lookup);

}  // namespace skipkv
