// Copyright 2026 The SkipKV Authors
// SPDX-License-Identifier: Apache-2.0

#include "skipkv/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "skipkv/errors.hpp"

namespace skipkv {

void ScoringConfig::validate() const {
  require(sigma >= 0.0F && sigma <= 1.0F, ErrorCode::kConfig, "sigma must lie in [0, 1]");
  require(tau > 0.0F && tau <= 1.0F, ErrorCode::kConfig, "tau must lie in (0, 1]");
  require(epsilon > 0.0F, ErrorCode::kConfig, "epsilon must be positive");
  require(alpha_window >= 1, ErrorCode::kConfig, "alpha_window must be >= 1");
}

SentenceEmbedding sentence_embedding(const Tensor& hidden, std::size_t begin, std::size_t end) {
  require(hidden.rank() == 2, ErrorCode::kInvalidArgument, "hidden states must be a matrix");
  require(begin <= end && end < hidden.dim(0), ErrorCode::kInvalidArgument,
          "sentence span outside hidden-state rows");
  const std::size_t width = hidden.dim(1);
  std::vector<double> mean(width, 0.0);
  for (std::size_t r = begin; r <= end; ++r) {
    for (std::size_t c = 0; c < width; ++c) {
      mean[c] += hidden(r, c);
    }
  }
  const double count = static_cast<double>(end - begin + 1);
  double norm_sq = 0.0;
  for (double& m : mean) {
    m /= count;
    norm_sq += m * m;
  }
  const double norm = std::sqrt(norm_sq);
  require(norm > 0.0, ErrorCode::kInvalidArgument, "sentence mean has zero norm");
  SentenceEmbedding out;
  out.values.resize(width);
  for (std::size_t c = 0; c < width; ++c) {
    out.values[c] = static_cast<float>(mean[c] / norm);
  }
  return out;
}

float pss(const SentenceEmbedding& a, const SentenceEmbedding& b) {
  require(a.values.size() == b.values.size(), ErrorCode::kInvalidArgument,
          "embedding widths differ");
  double dot = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    dot += static_cast<double>(a.values[i]) * static_cast<double>(b.values[i]);
  }
  return static_cast<float>(dot);
}

RedundantSet redundant_set(std::span<const SentenceEmbedding> embeddings, float tau) {
  require(tau > 0.0F && tau <= 1.0F, ErrorCode::kInvalidArgument, "tau must lie in (0, 1]");
  RedundantSet out;
  out.tau = tau;
  for (std::size_t i = 0; i < embeddings.size(); ++i) {
    for (std::size_t j = i + 1; j < embeddings.size(); ++j) {
      const float sim = pss(embeddings[i], embeddings[j]);
      if (sim > tau) {
        auto [it, inserted] = out.lambda.try_emplace(i, sim);
        if (!inserted) {
          it->second = std::max(it->second, sim);
        }
      }
    }
  }
  return out;
}

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// In-place masked softmax; masked entries become exactly zero.
void masked_softmax(std::span<double> logits, const AttentionMask& mask) {
  double peak = kNegInf;
  for (std::size_t j = 0; j < logits.size(); ++j) {
    if (mask.valid(j)) {
      peak = std::max(peak, logits[j]);
    }
  }
  double total = 0.0;
  for (std::size_t j = 0; j < logits.size(); ++j) {
    logits[j] = mask.valid(j) ? std::exp(logits[j] - peak) : 0.0;
    total += logits[j];
  }
  for (double& v : logits) {
    v /= total;
  }
}

void check_masks(std::span<const AttentionMask> masks, std::size_t heads, std::size_t length) {
  require(masks.size() == heads, ErrorCode::kInvalidArgument, "need one mask per KV head");
  for (const auto& mask : masks) {
    require(mask.size() == length, ErrorCode::kInvalidArgument,
            "mask length differs from key count");
  }
}

}  // namespace

Tensor token_importance(const Tensor& q, const Tensor& k, std::span<const AttentionMask> masks,
                        const ModelShape& shape) {
  require(q.rank() == 3 && k.rank() == 3, ErrorCode::kInvalidArgument,
          "queries and keys must be rank 3");
  require(q.dim(0) == shape.num_q_heads && k.dim(0) == shape.num_kv_heads &&
              q.dim(2) == shape.head_dim && k.dim(2) == shape.head_dim,
          ErrorCode::kShapeMismatch,
          "q " + shape_string(q.shape()) + " / k " + shape_string(k.shape()) +
              " inconsistent with model shape");
  const std::size_t window = q.dim(1);
  const std::size_t keys = k.dim(1);
  const std::size_t d = shape.head_dim;
  const std::size_t group = shape.group_size();
  require(window >= 1 && keys >= 1, ErrorCode::kInvalidArgument, "empty window or cache");
  check_masks(masks, shape.num_kv_heads, keys);
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));

  Tensor out({shape.num_kv_heads, keys});
  std::vector<double> pooled(window * keys);
  std::vector<double> row(keys);
  for (std::size_t h = 0; h < shape.num_kv_heads; ++h) {
    const AttentionMask& mask = masks[h];
    require(mask.valid_count() > 0, ErrorCode::kInvalidArgument,
            "every cache slot of KV head " + std::to_string(h) + " is padding");
    std::fill(pooled.begin(), pooled.end(), 0.0);
    for (std::size_t qi = h * group; qi < (h + 1) * group; ++qi) {
      for (std::size_t r = 0; r < window; ++r) {
        auto qrow = q.row(qi, r);
        for (std::size_t j = 0; j < keys; ++j) {
          auto krow = k.row(h, j);
          double dot = 0.0;
          for (std::size_t c = 0; c < d; ++c) {
            dot += static_cast<double>(qrow[c]) * krow[c];
          }
          row[j] = dot * scale;
        }
        masked_softmax(row, mask);
        for (std::size_t j = 0; j < keys; ++j) {
          double& cell = pooled[r * keys + j];
          cell = std::max(cell, row[j]);
        }
      }
    }
    std::vector<double> acc(keys, 0.0);
    for (std::size_t r = 0; r < window; ++r) {
      std::span<double> prow(pooled.data() + r * keys, keys);
      masked_softmax(prow, mask);
      for (std::size_t j = 0; j < keys; ++j) {
        acc[j] += prow[j];
      }
    }
    for (std::size_t j = 0; j < keys; ++j) {
      out(h, j) = static_cast<float>(acc[j] / static_cast<double>(window));
    }
  }
  return out;
}

Tensor token_importance(const Tensor& q, const Tensor& k, const AttentionMask& mask,
                        const ModelShape& shape) {
  std::vector<AttentionMask> masks(shape.num_kv_heads, mask);
  return token_importance(q, k, masks, shape);
}

Tensor token_redundancy(const Tensor& k, std::span<const AttentionMask> masks, float epsilon) {
  require(k.rank() == 3, ErrorCode::kInvalidArgument, "keys must be rank 3");
  require(epsilon > 0.0F, ErrorCode::kInvalidArgument, "epsilon must be positive");
  const std::size_t heads = k.dim(0);
  const std::size_t n = k.dim(1);
  const std::size_t d = k.dim(2);
  check_masks(masks, heads, n);

  Tensor out({heads, n});
  std::vector<double> normed(n * d);
  std::vector<double> row(n);
  for (std::size_t h = 0; h < heads; ++h) {
    const AttentionMask& mask = masks[h];
    for (std::size_t j = 0; j < n; ++j) {
      const double m = mask.valid(j) ? 1.0 : 0.0;
      auto krow = k.row(h, j);
      double norm_sq = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        norm_sq += (krow[c] * m) * (krow[c] * m);
      }
      const double denom = std::sqrt(norm_sq) + epsilon;
      for (std::size_t c = 0; c < d; ++c) {
        normed[j * d + c] = krow[c] * m / denom;
      }
    }
    const std::size_t valid_rows = mask.valid_count();
    std::vector<double> acc(n, 0.0);
    for (std::size_t i = 0; i < n && valid_rows > 0; ++i) {
      if (!mask.valid(i)) {
        continue;
      }
      for (std::size_t j = 0; j < n; ++j) {
        double dot = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
          dot += normed[i * d + c] * normed[j * d + c];
        }
        row[j] = dot;
      }
      masked_softmax(row, mask);
      for (std::size_t j = 0; j < n; ++j) {
        acc[j] += row[j];
      }
    }
    for (std::size_t j = 0; j < n; ++j) {
      out(h, j) = valid_rows == 0 ? 0.0F
                                  : static_cast<float>(acc[j] / static_cast<double>(valid_rows));
    }
  }
  return out;
}

Tensor token_redundancy(const Tensor& k, const AttentionMask& mask, float epsilon) {
  require(k.rank() == 3, ErrorCode::kInvalidArgument, "keys must be rank 3");
  std::vector<AttentionMask> masks(k.dim(0), mask);
  return token_redundancy(k, masks, epsilon);
}

std::vector<float> fuse(std::span<const float> importance, std::span<const float> redundancy,
                        float sigma, const CacheLookup& lookup) {
  require(importance.size() == redundancy.size(), ErrorCode::kInvalidArgument,
          "importance and redundancy lengths differ");
  std::vector<float> out(importance.size());
  for (std::size_t j = 0; j < out.size(); ++j) {
    out[j] = sigma * importance[j] - (1.0F - sigma) * redundancy[j];
  }
  std::vector<LookupEntry> sorted(lookup.begin(), lookup.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const LookupEntry& a, const LookupEntry& b) { return a.begin < b.begin; });
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const auto& e = sorted[i];
    require(e.begin <= e.end && e.end < out.size(), ErrorCode::kInvalidArgument,
            "lookup range outside cache");
    require(i == 0 || sorted[i - 1].end < e.begin, ErrorCode::kInvalidArgument,
            "overlapping lookup ranges");
    for (std::size_t j = e.begin; j <= e.end; ++j) {
      out[j] -= e.lambda;
    }
  }
  return out;
}

Tensor fuse(const Tensor& importance, const Tensor& redundancy, float sigma,
            const CacheLookup& lookup) {
  require(importance.shape() == redundancy.shape() && importance.rank() == 2,
          ErrorCode::kInvalidArgument, "importance and redundancy shapes differ");
  Tensor out(importance.shape());
  for (std::size_t h = 0; h < importance.dim(0); ++h) {
    auto fused = fuse(importance.slab(h), redundancy.slab(h), sigma, lookup);
    std::copy(fused.begin(), fused.end(), out.slab(h).begin());
  }
  return out;
}

}  // namespace skipkv
