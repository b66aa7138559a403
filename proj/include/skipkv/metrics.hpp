// Copyright 2026 The SkipKV Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace skipkv {

inline constexpr const char* kMetricsSchema = "skipkv-metrics/1";

struct EventSummary {
  std::size_t decode_step = 0;
  std::size_t position = 0;
  std::size_t pre_length = 0;
  std::size_t post_length = 0;
  std::size_t evicted = 0;  // summed over layers and heads
};

struct SampleMetrics {
  std::uint64_t sample_id = 0;
  std::size_t prefill_len = 0;
  std::size_t padding_len = 0;
  std::size_t generated_len = 0;
  std::size_t peak_cache_length = 0;
  /// Cache length after each position (first layer, first head; all heads agree).
  std::vector<std::size_t> cache_lengths;
  /// Evicted tokens per [layer_slot][kv_head].
  std::vector<std::vector<std::size_t>> evictions;
  std::vector<EventSummary> events;
  /// Per decode step.
  std::vector<std::size_t> nonexec_trajectory;
  std::vector<double> alpha_trajectory;
  std::vector<std::size_t> flagged_trajectory;
  std::size_t sentences = 0;
  std::size_t flagged_sentences = 0;
};

struct RunMetrics {
  std::string kind = "simulate";  // simulate | evict
  std::string method = "skipkv";
  std::size_t budget = 0;
  std::size_t compress_interval = 0;
  bool protect_window = true;
  double sigma = 0.0;
  double tau = 0.0;
  std::size_t alpha_window = 0;
  std::uint64_t seed = 0;
  std::vector<SampleMetrics> samples;
};

nlohmann::json to_json(const RunMetrics& metrics);
RunMetrics run_metrics_from_json(const nlohmann::json& doc);

}  // namespace skipkv
