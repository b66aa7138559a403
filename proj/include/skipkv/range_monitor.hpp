// Copyright 2026 The SkipKV Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "skipkv/scoring.hpp"
#include "skipkv/segmenter.hpp"

namespace skipkv {

/// Live cache-space range (inclusive) of one generation-space sentence.
struct CacheRange {
  std::size_t sentence = 0;
  std::size_t begin = 0;
  std::size_t end = 0;

  bool operator==(const CacheRange&) const = default;
};

/// Sentence bookkeeping for one (sample, layer, KV head) cache.
///
/// `gs_spans` are closed sentence spans in generation space, indexed by
/// sentence id. `cs_ranges` hold the surviving cache-space extent of each
/// registered sentence, sorted and disjoint. `processed` counts gs spans
/// already considered for registration. `lookup` maps flagged sentence ids to
/// their redundancy score.
///
/// `frontier` is the cache index one past the last registered sentence (or the
/// generation start before any sentence is registered). It is remapped with
/// the survivors so a new sentence can be placed even when its predecessor's
/// range has been discarded.
struct RangeTable {
  std::vector<SentenceSpan> gs_spans;
  std::vector<CacheRange> cs_ranges;
  std::size_t processed = 0;
  std::map<std::size_t, float> lookup;
  std::size_t frontier = 0;
  /// False until the first eviction; while false cache space equals generation space.
  bool remapped = false;

  const CacheRange* find(std::size_t sentence) const;
};

/// Copies every gs span with end <= cache_len verbatim into cache space.
void init_ranges(RangeTable& table, std::size_t cache_len);

/// Places gs spans with id >= processed: begin follows the previous range (the
/// frontier), end = cache_len - (gen_len - end_gs). A span is appended only
/// when begin <= end <= cache_len.
void append_ranges(RangeTable& table, std::size_t gen_len, std::size_t cache_len);

/// Pre-eviction update: picks init or append, then marks all spans processed.
void update_ranges(RangeTable& table, std::size_t gen_len, std::size_t cache_len);

/// Remaps ranges through the ascending survivor list; ranges with no surviving
/// token are discarded.
void remap_after_eviction(RangeTable& table, std::span<const std::size_t> survivors);

/// Lambda of every flagged sentence whose range is still live.
CacheLookup align_lookup(const RangeTable& table);

/// Checks every live range against the per-slot provenance ids of its head:
/// a range must cover exactly the surviving slots of its sentence. Only spans
/// already processed are checked. Returns one message per violation.
std::vector<std::string> audit_ranges(const RangeTable& table,
                                      std::span<const std::size_t> gs_ids);

}  // namespace skipkv
