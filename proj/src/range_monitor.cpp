// Copyright 2026 The SkipKV Authors
// SPDX-License-Identifier: Apache-2.0

#include "skipkv/range_monitor.hpp"

#include <algorithm>

#include "skipkv/errors.hpp"

namespace skipkv {

const CacheRange* RangeTable::find(std::size_t sentence) const {
  auto it = std::find_if(cs_ranges.begin(), cs_ranges.end(),
                         [&](const CacheRange& r) { return r.sentence == sentence; });
  return it == cs_ranges.end() ? nullptr : &*it;
}

void init_ranges(RangeTable& table, std::size_t cache_len) {
  for (const auto& span : table.gs_spans) {
    if (span.closed && span.end <= cache_len) {
      table.cs_ranges.push_back({span.index, span.begin, span.end});
      table.frontier = span.end + 1;
    }
  }
}

void append_ranges(RangeTable& table, std::size_t gen_len, std::size_t cache_len) {
  for (std::size_t i = table.processed; i < table.gs_spans.size(); ++i) {
    const auto& span = table.gs_spans[i];
    if (!span.closed) {
      continue;
    }
    const std::size_t residual = gen_len - span.end;
    if (residual > cache_len) {
      continue;
    }
    const std::size_t begin = table.frontier;
    const std::size_t end = cache_len - residual;
    if (end >= begin && end <= cache_len) {
      table.cs_ranges.push_back({span.index, begin, end});
    }
    table.frontier = std::max(table.frontier, end + 1);
  }
}

void update_ranges(RangeTable& table, std::size_t gen_len, std::size_t cache_len) {
  if (!table.remapped && table.cs_ranges.empty()) {
    init_ranges(table, cache_len);
  } else {
    append_ranges(table, gen_len, cache_len);
  }
  table.processed = table.gs_spans.size();
}

void remap_after_eviction(RangeTable& table, std::span<const std::size_t> survivors) {
  require(std::adjacent_find(survivors.begin(), survivors.end(),
                             [](std::size_t a, std::size_t b) { return a >= b; }) ==
              survivors.end(),
          ErrorCode::kInvalidArgument, "survivors must be strictly increasing");
  std::vector<CacheRange> kept;
  kept.reserve(table.cs_ranges.size());
  for (const auto& range : table.cs_ranges) {
    // earliest survivor >= begin, latest survivor <= end
    const auto lo = std::lower_bound(survivors.begin(), survivors.end(), range.begin);
    const auto hi = std::upper_bound(survivors.begin(), survivors.end(), range.end);
    if (lo == survivors.end() || hi == survivors.begin()) {
      continue;
    }
    const auto begin = static_cast<std::size_t>(lo - survivors.begin());
    const auto end = static_cast<std::size_t>(hi - survivors.begin()) - 1;
    if (begin > end) {
      continue;
    }
    kept.push_back({range.sentence, begin, end});
  }
  table.cs_ranges = std::move(kept);
  table.frontier = static_cast<std::size_t>(
      std::lower_bound(survivors.begin(), survivors.end(), table.frontier) - survivors.begin());
  table.remapped = true;
}

CacheLookup align_lookup(const RangeTable& table) {
  CacheLookup out;
  for (const auto& range : table.cs_ranges) {
    auto it = table.lookup.find(range.sentence);
    if (it != table.lookup.end()) {
      out.push_back({range.begin, range.end, it->second});
    }
  }
  return out;
}

std::vector<std::string> audit_ranges(const RangeTable& table,
                                      std::span<const std::size_t> gs_ids) {
  std::vector<std::string> problems;
  for (std::size_t i = 0; i < table.processed && i < table.gs_spans.size(); ++i) {
    const auto& span = table.gs_spans[i];
    if (!span.closed) {
      continue;
    }
    const auto lo = std::lower_bound(gs_ids.begin(), gs_ids.end(), span.begin);
    const auto hi = std::upper_bound(gs_ids.begin(), gs_ids.end(), span.end);
    const CacheRange* range = table.find(span.index);
    const std::string name = "sentence " + std::to_string(span.index);
    if (lo == hi) {
      if (range != nullptr) {
        problems.push_back(name + " has a range but no surviving tokens");
      }
      continue;
    }
    const auto begin = static_cast<std::size_t>(lo - gs_ids.begin());
    const auto end = static_cast<std::size_t>(hi - gs_ids.begin()) - 1;
    if (range == nullptr) {
      problems.push_back(name + " lost its range while tokens survive");
    } else if (range->begin != begin || range->end != end) {
      problems.push_back(name + " range [" + std::to_string(range->begin) + ", " +
                         std::to_string(range->end) + "] but survivors occupy [" +
                         std::to_string(begin) + ", " + std::to_string(end) + "]");
    }
  }
  return problems;
}

}  // namespace skipkv
