// Copyright 2026 The SkipKV Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

#include "json.hpp"
#include "skipkv/engine.hpp"
#include "skipkv/metrics.hpp"
#include "skipkv/trace.hpp"

namespace skipkv {

struct SampleReplay {
  std::uint64_t sample_id = 0;
  std::vector<CompressionEvent> events;
};

struct ReplayResult {
  RunMetrics metrics;
  std::vector<SampleReplay> samples;
};

/// Rebuilds every sample's cache from the recorded keys and values and runs
/// the compression schedule over it. Sentence embeddings use the hidden
/// states of the last captured layer. The observation window is the trace's
/// alpha. Invariant failures throw kInvariant.
ReplayResult replay_trace(const DecodingTrace& trace, EngineOptions options);

/// Evicted generation-space ids per event, layer and head.
nlohmann::json decisions_json(const ReplayResult& result, const DecodingTrace& trace);

/// Range tables after each event; events must have been captured with ranges.
nlohmann::json ranges_json(const ReplayResult& result, const DecodingTrace& trace);

}  // namespace skipkv
