// Copyright 2026 The SkipKV Authors
// SPDX-License-Identifier: Apache-2.0

#include "skipkv/engine.hpp"

#include <algorithm>

#include "skipkv/errors.hpp"

namespace skipkv {

SampleEngine::SampleEngine(const ModelShape& shape, std::size_t layer_slots,
                           EngineOptions options, std::size_t padding_len,
                           std::size_t prefill_len)
    : shape_(shape),
      options_(std::move(options)),
      padding_len_(padding_len),
      generation_start_(padding_len + prefill_len),
      caches_(layer_slots),
      tables_(layer_slots),
      recent_queries_(layer_slots),
      segmenter_(options_.delimiters, options_.keywords, padding_len + prefill_len),
      evicted_(layer_slots, std::vector<std::size_t>(shape.num_kv_heads, 0)) {
  shape_.validate();
  options_.eviction.validate();
  require(layer_slots >= 1, ErrorCode::kInvalidArgument, "engine needs at least one layer");
  for (std::size_t s = 0; s < layer_slots; ++s) {
    caches_[s].heads.assign(shape_.num_kv_heads, HeadCache(shape_.head_dim));
    tables_[s].resize(shape_.num_kv_heads);
    for (auto& table : tables_[s]) {
      table.frontier = generation_start_;
    }
  }
  redundant_.tau = options_.eviction.scoring.tau;
}

void SampleEngine::append(std::size_t slot, const Tensor& query, const Tensor& key,
                          const Tensor& value) {
  require(slot < caches_.size(), ErrorCode::kInvalidArgument, "layer slot out of range");
  require(key.shape() == std::vector<std::size_t>{shape_.num_kv_heads, 1, shape_.head_dim} &&
              value.shape() == key.shape() &&
              query.shape() ==
                  std::vector<std::size_t>{shape_.num_q_heads, 1, shape_.head_dim},
          ErrorCode::kShapeMismatch, "step tensors inconsistent with model shape");
  auto& cache = caches_[slot];
  for (std::size_t h = 0; h < shape_.num_kv_heads; ++h) {
    cache.heads[h].append(key.row(h, 0), value.row(h, 0), position_);
  }
  auto& queries = recent_queries_[slot];
  queries.push_back(query);
  while (queries.size() > options_.eviction.scoring.alpha_window) {
    queries.pop_front();
  }
}

std::optional<CompressionEvent> SampleEngine::finish_position(
    const std::string& text, std::span<const float> embed_hidden) {
  for (const auto& cache : caches_) {
    require(cache.heads.front().size() == 0 ||
                cache.heads.front().gs_ids().back() == position_,
            ErrorCode::kInvalidArgument, "finish_position called before every layer appended");
  }
  const std::size_t pos = position_;
  hidden_rows_.emplace_back(embed_hidden.begin(), embed_hidden.end());

  bool closed_sentence = false;
  if (pos >= generation_start_) {
    if (auto span = segmenter_.push(text)) {
      Tensor rows({span->length(), embed_hidden.size()});
      for (std::size_t r = 0; r < span->length(); ++r) {
        const auto& src = hidden_rows_[span->begin + r];
        require(src.size() == embed_hidden.size(), ErrorCode::kShapeMismatch,
                "hidden-state width changed mid-trace");
        std::copy(src.begin(), src.end(), rows.slab(r).begin());
      }
      embeddings_.push_back(sentence_embedding(rows, 0, span->length() - 1));
      closed_sentence = true;
    }
  }
  ++position_;
  peak_length_ = std::max(peak_length_, cache_length());

  std::optional<CompressionEvent> event;
  const auto& cfg = options_.eviction;
  if (cfg.method != Method::kFullKv) {
    if (pos + 1 == generation_start_ && cache_length() > cfg.budget) {
      event = compress(0);
    } else if (pos >= generation_start_) {
      const std::size_t step = pos - generation_start_ + 1;
      if (step % cfg.compress_interval == 0 && cache_length() > cfg.budget) {
        event = compress(step);
      }
    }
  }

  if (closed_sentence) {
    redundant_ = redundant_set(embeddings_, cfg.scoring.tau);
  }
  check_budget();
  if (event) {
    events_.push_back(*event);
  }
  return event;
}

CompressionEvent SampleEngine::compress(std::size_t decode_step) {
  CompressionEvent event;
  event.decode_step = decode_step;
  event.position = position_ - 1;
  event.pre_length = cache_length();

  const auto& closed = segmenter_.closed();
  SentenceContext ctx;
  ctx.closed_spans = closed;
  ctx.lookup = &redundant_.lambda;
  ctx.generation_length = position_;
  ctx.padding_len = padding_len_;

  for (std::size_t slot = 0; slot < caches_.size(); ++slot) {
    const auto& queries = recent_queries_[slot];
    Tensor window({shape_.num_q_heads, queries.size(), shape_.head_dim});
    for (std::size_t h = 0; h < shape_.num_q_heads; ++h) {
      for (std::size_t r = 0; r < queries.size(); ++r) {
        auto src = queries[r].row(h, 0);
        std::copy(src.begin(), src.end(), window.row(h, r).begin());
      }
    }
    auto report = compression_step(caches_[slot], tables_[slot], window, ctx, shape_,
                                   options_.eviction, slot);
    for (const auto& head : report.heads) {
      evicted_[slot][head.head] += head.evicted_gs_ids.size();
      require(head.evicted_gs_ids.empty() || head.min_kept_score >= head.max_evicted_score,
              ErrorCode::kInvariant, "an evicted token outscored a survivor");
    }
    event.layers.push_back(std::move(report));
    for (std::size_t h = 0; h < shape_.num_kv_heads; ++h) {
      const auto problems = audit_ranges(tables_[slot][h], caches_[slot].heads[h].gs_ids());
      require(problems.empty(), ErrorCode::kInvariant,
              problems.empty() ? std::string()
                               : "layer slot " + std::to_string(slot) + " head " +
                                     std::to_string(h) + ": " + problems.front());
    }
  }
  event.post_length = cache_length();
  if (options_.capture_ranges) {
    event.ranges = tables_;
  }
  require(event.post_length <= options_.eviction.budget, ErrorCode::kInvariant,
          "cache exceeds budget after compression");
  return event;
}

void SampleEngine::check_budget() const {
  const auto& cfg = options_.eviction;
  if (cfg.method == Method::kFullKv || position_ <= generation_start_) {
    return;
  }
  for (const auto& cache : caches_) {
    const std::size_t len = cache.heads.front().size();
    for (const auto& head : cache.heads) {
      require(head.size() == len, ErrorCode::kInvariant, "KV heads diverged in length");
    }
    require(len <= cfg.budget + cfg.compress_interval, ErrorCode::kInvariant,
            "cache length " + std::to_string(len) + " exceeds budget + interval");
  }
}

}  // namespace skipkv
