// Copyright 2026 The SkipKV Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <vector>

#include "skipkv/range_monitor.hpp"
#include "skipkv/scoring.hpp"
#include "skipkv/trace.hpp"

namespace skipkv {

enum class Method {
  kSkipKv,  // fused score with sentence redundancy
  kRkv,     // token importance and redundancy only
  kFullKv,  // never evict
};

const char* to_string(Method method);
Method parse_method(const std::string& name);

struct EvictionConfig {
  std::size_t budget = 128;
  std::size_t compress_interval = 128;
  bool protect_window = true;
  Method method = Method::kSkipKv;
  ScoringConfig scoring;

  void validate() const;
};

/// Keeps `protected_slots` plus the highest remaining scores up to `budget`.
/// Ties go to the higher (more recent) index. Result is ascending.
/// Throws kInvalidArgument when budget < |protected_slots|.
std::vector<std::size_t> select_survivors(std::span<const float> scores, std::size_t budget,
                                          std::span<const std::size_t> protected_slots = {});

/// Retained keys/values of one KV head with generation-space provenance.
class HeadCache {
 public:
  explicit HeadCache(std::size_t head_dim = 1) : head_dim_(head_dim) {}

  std::size_t size() const { return gs_ids_.size(); }
  std::size_t head_dim() const { return head_dim_; }
  std::span<const float> key(std::size_t slot) const;
  std::span<const float> value(std::size_t slot) const;
  std::span<const float> keys() const { return keys_; }
  std::span<const float> values() const { return values_; }
  std::span<const std::size_t> gs_ids() const { return gs_ids_; }

  void append(std::span<const float> key, std::span<const float> value, std::size_t gs_id);
  /// Keeps only `survivors` (ascending slot indices), preserving order.
  void compact(std::span<const std::size_t> survivors);

 private:
  std::size_t head_dim_;
  std::vector<float> keys_;
  std::vector<float> values_;
  std::vector<std::size_t> gs_ids_;
};

struct LayerCache {
  std::vector<HeadCache> heads;
};

/// Sentence state shared by every head of one sample at a compression step.
struct SentenceContext {
  std::span<const SentenceSpan> closed_spans;  // generation-space coordinates
  const std::map<std::size_t, float>* lookup = nullptr;
  std::size_t generation_length = 0;
  std::size_t padding_len = 0;
};

struct HeadEviction {
  std::size_t head = 0;
  std::size_t pre_length = 0;
  std::size_t post_length = 0;
  std::vector<std::size_t> evicted_gs_ids;
  std::size_t flagged_slots = 0;
  /// Scores of survivors and evictees, for dominance checks.
  float min_kept_score = 0.0F;
  float max_evicted_score = 0.0F;
};

struct LayerEviction {
  std::size_t layer = 0;
  std::vector<HeadEviction> heads;
};

/// Algorithm-1 step for one layer: range pre-update, fused scoring, top-B
/// retention per head, compaction, range remap. `query_window` is
/// [H_q x alpha x d]. `tables` has one entry per KV head.
LayerEviction compression_step(LayerCache& cache, std::vector<RangeTable>& tables,
                               const Tensor& query_window, const SentenceContext& ctx,
                               const ModelShape& shape, const EvictionConfig& config,
                               std::size_t layer = 0);

/// Builds [H_k x N' x d] keys and per-head padding masks from a layer cache.
Tensor stack_keys(const LayerCache& cache);
std::vector<AttentionMask> cache_masks(const LayerCache& cache, std::size_t padding_len);

}  // namespace skipkv
