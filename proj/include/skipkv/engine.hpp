// Copyright 2026 The SkipKV Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "skipkv/eviction.hpp"
#include "skipkv/range_monitor.hpp"
#include "skipkv/scoring.hpp"
#include "skipkv/segmenter.hpp"

namespace skipkv {

struct EngineOptions {
  EvictionConfig eviction;
  TokenSet delimiters = default_delimiters();
  TokenSet keywords = default_keywords();
  bool capture_ranges = false;
};

struct CompressionEvent {
  /// Decode step that triggered the event; 0 marks the post-prefill compression.
  std::size_t decode_step = 0;
  std::size_t position = 0;
  std::size_t pre_length = 0;
  std::size_t post_length = 0;
  std::vector<LayerEviction> layers;
  /// ranges[layer_slot][kv_head] after the event; filled when capture_ranges is set.
  std::vector<std::vector<RangeTable>> ranges;
};

/// Drives SkipKV compression for one sample, position by position.
///
/// For every cache position the caller appends each captured layer's record
/// and then calls finish_position() with the token text and the hidden state
/// used for sentence embeddings. Compression runs when the decode step is a
/// multiple of the compression interval and the cache is over budget, and once
/// after prefill when the prompt alone exceeds the budget.
class SampleEngine {
 public:
  SampleEngine(const ModelShape& shape, std::size_t layer_slots, EngineOptions options,
               std::size_t padding_len, std::size_t prefill_len);

  /// Appends key/value (and remembers the query) of the current position.
  void append(std::size_t slot, const Tensor& query, const Tensor& key, const Tensor& value);

  std::optional<CompressionEvent> finish_position(const std::string& text,
                                                  std::span<const float> embed_hidden);

  const LayerCache& layer(std::size_t slot) const { return caches_[slot]; }
  const std::vector<RangeTable>& tables(std::size_t slot) const { return tables_[slot]; }
  std::size_t position() const { return position_; }
  std::size_t padding_len() const { return padding_len_; }
  std::size_t generation_start() const { return generation_start_; }
  std::size_t cache_length() const { return caches_.front().heads.front().size(); }

  const IncrementalSegmenter& segmenter() const { return segmenter_; }
  std::size_t nonexecution_count() const { return segmenter_.nonexecution_count(); }
  const std::vector<SentenceEmbedding>& embeddings() const { return embeddings_; }
  const RedundantSet& redundant() const { return redundant_; }
  const std::vector<CompressionEvent>& events() const { return events_; }

  /// Evicted-token counts per [layer_slot][kv_head].
  const std::vector<std::vector<std::size_t>>& eviction_counts() const { return evicted_; }
  std::size_t peak_length() const { return peak_length_; }

 private:
  CompressionEvent compress(std::size_t decode_step);
  void check_budget() const;

  ModelShape shape_;
  EngineOptions options_;
  std::size_t padding_len_;
  std::size_t generation_start_;
  std::size_t position_ = 0;
  std::vector<LayerCache> caches_;
  std::vector<std::vector<RangeTable>> tables_;
  std::vector<std::deque<Tensor>> recent_queries_;
  std::vector<std::vector<float>> hidden_rows_;
  IncrementalSegmenter segmenter_;
  std::vector<SentenceEmbedding> embeddings_;
  RedundantSet redundant_;
  std::vector<CompressionEvent> events_;
  std::vector<std::vector<std::size_t>> evicted_;
  std::size_t peak_length_ = 0;
};

}  // namespace skipkv
