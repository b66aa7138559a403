// Copyright 2026 The SkipKV Authors
// SPDX-License-Identifier: Apache-2.0

#include "skipkv/eviction.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "skipkv/errors.hpp"

namespace skipkv {

const char* to_string(Method method) {
  switch (method) {
    case Method::kSkipKv: return "skipkv";
    case Method::kRkv: return "rkv";
    case Method::kFullKv: return "fullkv";
  }
  return "unknown";
}

Method parse_method(const std::string& name) {
  if (name == "skipkv") return Method::kSkipKv;
  if (name == "rkv") return Method::kRkv;
  if (name == "fullkv") return Method::kFullKv;
  fail(ErrorCode::kConfig, "unknown method '" + name + "' (skipkv | rkv | fullkv)");
}

void EvictionConfig::validate() const {
  scoring.validate();
  require(budget >= 1, ErrorCode::kConfig, "budget must be >= 1");
  require(compress_interval >= 1, ErrorCode::kConfig, "compress_interval must be >= 1");
  require(!protect_window || scoring.alpha_window <= budget, ErrorCode::kConfig,
          "protected observation window exceeds budget");
}

std::vector<std::size_t> select_survivors(std::span<const float> scores, std::size_t budget,
                                          std::span<const std::size_t> protected_slots) {
  const std::size_t n = scores.size();
  std::vector<std::uint8_t> keep(n, 0);
  std::size_t kept = 0;
  for (std::size_t slot : protected_slots) {
    require(slot < n, ErrorCode::kInvalidArgument, "protected slot outside score vector");
    if (keep[slot] == 0) {
      keep[slot] = 1;
      ++kept;
    }
  }
  require(budget >= kept, ErrorCode::kInvalidArgument,
          "budget " + std::to_string(budget) + " smaller than " + std::to_string(kept) +
              " protected slots");
  if (n <= budget) {
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    return all;
  }

  std::vector<std::size_t> candidates;
  candidates.reserve(n - kept);
  for (std::size_t i = 0; i < n; ++i) {
    if (keep[i] == 0) {
      candidates.push_back(i);
    }
  }
  const std::size_t take = std::min(budget - kept, candidates.size());
  auto better = [&](std::size_t a, std::size_t b) {
    return scores[a] != scores[b] ? scores[a] > scores[b] : a > b;
  };
  std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(take),
                    candidates.end(), better);
  for (std::size_t i = 0; i < take; ++i) {
    keep[candidates[i]] = 1;
  }

  std::vector<std::size_t> survivors;
  survivors.reserve(budget);
  for (std::size_t i = 0; i < n; ++i) {
    if (keep[i] != 0) {
      survivors.push_back(i);
    }
  }
  return survivors;
}

std::span<const float> HeadCache::key(std::size_t slot) const {
  return std::span<const float>(keys_).subspan(slot * head_dim_, head_dim_);
}

std::span<const float> HeadCache::value(std::size_t slot) const {
  return std::span<const float>(values_).subspan(slot * head_dim_, head_dim_);
}

void HeadCache::append(std::span<const float> key, std::span<const float> value,
                       std::size_t gs_id) {
  require(key.size() == head_dim_ && value.size() == head_dim_, ErrorCode::kShapeMismatch,
          "key/value width differs from head_dim");
  require(gs_ids_.empty() || gs_ids_.back() < gs_id, ErrorCode::kInvariant,
          "generation-space ids must be strictly increasing");
  keys_.insert(keys_.end(), key.begin(), key.end());
  values_.insert(values_.end(), value.begin(), value.end());
  gs_ids_.push_back(gs_id);
}

void HeadCache::compact(std::span<const std::size_t> survivors) {
  std::size_t out = 0;
  for (std::size_t slot : survivors) {
    require(slot < gs_ids_.size() && slot >= out, ErrorCode::kInvalidArgument,
            "survivor list must be ascending and in range");
    if (slot != out) {
      std::copy_n(keys_.begin() + static_cast<std::ptrdiff_t>(slot * head_dim_), head_dim_,
                  keys_.begin() + static_cast<std::ptrdiff_t>(out * head_dim_));
      std::copy_n(values_.begin() + static_cast<std::ptrdiff_t>(slot * head_dim_), head_dim_,
                  values_.begin() + static_cast<std::ptrdiff_t>(out * head_dim_));
      gs_ids_[out] = gs_ids_[slot];
    }
    ++out;
  }
  keys_.resize(out * head_dim_);
  values_.resize(out * head_dim_);
  gs_ids_.resize(out);
}

Tensor stack_keys(const LayerCache& cache) {
  require(!cache.heads.empty(), ErrorCode::kInvalidArgument, "layer cache has no heads");
  const std::size_t len = cache.heads.front().size();
  const std::size_t d = cache.heads.front().head_dim();
  Tensor keys({cache.heads.size(), len, d});
  for (std::size_t h = 0; h < cache.heads.size(); ++h) {
    require(cache.heads[h].size() == len, ErrorCode::kInvariant,
            "KV heads of one layer differ in length");
    auto src = cache.heads[h].keys();
    std::copy(src.begin(), src.end(), keys.slab(h).begin());
  }
  return keys;
}

std::vector<AttentionMask> cache_masks(const LayerCache& cache, std::size_t padding_len) {
  std::vector<AttentionMask> masks;
  masks.reserve(cache.heads.size());
  for (const auto& head : cache.heads) {
    masks.push_back(AttentionMask::from_ids(head.gs_ids(), padding_len));
  }
  return masks;
}

LayerEviction compression_step(LayerCache& cache, std::vector<RangeTable>& tables,
                               const Tensor& query_window, const SentenceContext& ctx,
                               const ModelShape& shape, const EvictionConfig& config,
                               std::size_t layer) {
  require(cache.heads.size() == shape.num_kv_heads && tables.size() == shape.num_kv_heads,
          ErrorCode::kShapeMismatch, "cache/table head count differs from model");
  LayerEviction report;
  report.layer = layer;
  const std::size_t len = cache.heads.front().size();

  // Pre-eviction range update.
  for (auto& table : tables) {
    table.gs_spans.assign(ctx.closed_spans.begin(), ctx.closed_spans.end());
    if (ctx.lookup != nullptr) {
      table.lookup = *ctx.lookup;
    }
    update_ranges(table, ctx.generation_length, len);
  }

  if (config.method == Method::kFullKv || len <= config.budget) {
    for (std::size_t h = 0; h < cache.heads.size(); ++h) {
      report.heads.push_back({h, len, len, {}, 0, 0.0F, 0.0F});
    }
    return report;
  }

  const Tensor keys = stack_keys(cache);
  const auto masks = cache_masks(cache, ctx.padding_len);
  const Tensor importance = token_importance(query_window, keys, masks, shape);
  const Tensor redundancy = token_redundancy(keys, masks, config.scoring.epsilon);

  std::vector<std::size_t> protected_slots;
  if (config.protect_window) {
    const std::size_t window = std::min(config.scoring.alpha_window, len);
    for (std::size_t j = len - window; j < len; ++j) {
      protected_slots.push_back(j);
    }
  }

  for (std::size_t h = 0; h < cache.heads.size(); ++h) {
    auto& head = cache.heads[h];
    auto& table = tables[h];
    const CacheLookup lookup =
        config.method == Method::kSkipKv ? align_lookup(table) : CacheLookup{};
    const auto scores = fuse(importance.slab(h), redundancy.slab(h), config.scoring.sigma, lookup);
    const auto survivors = select_survivors(scores, config.budget, protected_slots);

    HeadEviction he;
    he.head = h;
    he.pre_length = len;
    he.post_length = survivors.size();
    for (const auto& e : lookup) {
      he.flagged_slots += e.end - e.begin + 1;
    }
    he.min_kept_score = std::numeric_limits<float>::infinity();
    he.max_evicted_score = -std::numeric_limits<float>::infinity();
    std::size_t next = 0;
    for (std::size_t j = 0; j < len; ++j) {
      if (next < survivors.size() && survivors[next] == j) {
        if (!std::binary_search(protected_slots.begin(), protected_slots.end(), j)) {
          he.min_kept_score = std::min(he.min_kept_score, scores[j]);
        }
        ++next;
      } else {
        he.evicted_gs_ids.push_back(head.gs_ids()[j]);
        he.max_evicted_score = std::max(he.max_evicted_score, scores[j]);
      }
    }
    head.compact(survivors);
    remap_after_eviction(table, survivors);
    report.heads.push_back(std::move(he));
  }
  return report;
}

}  // namespace skipkv
