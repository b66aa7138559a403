// Copyright 2026 The SkipKV Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace skipkv {

struct SampleLength {
  std::uint64_t id = 0;
  std::size_t prefill_len = 0;
};

struct PlannedSample {
  std::uint64_t id = 0;
  std::size_t prefill_len = 0;
  /// Left padding up to the batch's longest prefill.
  std::size_t padding = 0;
};

struct Batch {
  std::vector<PlannedSample> samples;
  std::size_t max_prefill = 0;
};

struct BatchPlan {
  std::size_t batch_size = 1;
  std::vector<Batch> batches;
  /// Samples as given, for comparison against grouping in arrival order.
  std::vector<SampleLength> input;

  std::size_t total_padding() const;
  std::size_t sample_count() const;
  /// (id, padding) in batch order.
  std::vector<PlannedSample> flattened() const;
};

/// Sorts by prefill length (stable) and cuts the sorted order into contiguous
/// batches of `batch_size`. When the count is not a multiple of `batch_size`
/// the one short batch is placed at whichever contiguous position minimizes
/// total padding, defaulting to the end on ties.
/// Throws kInvalidArgument on an empty list or batch_size == 0.
BatchPlan group(std::span<const SampleLength> samples, std::size_t batch_size);

/// Contiguous batches in arrival order; the short batch, if any, is last.
BatchPlan group_in_order(std::span<const SampleLength> samples, std::size_t batch_size);

struct PaddingSummary {
  double mean_padding = 0.0;
  std::size_t min_padding = 0;
  std::size_t max_padding = 0;
  std::size_t total_padding = 0;
  /// Mean of B' = B - padding; may be negative when padding exceeds the budget.
  double mean_valid_budget = 0.0;
};

struct PaddingReport {
  std::size_t budget = 0;
  PaddingSummary grouped;
  PaddingSummary original;
  /// Share of arrival-order padding removed by grouping (0 when there was none).
  double recovered_fraction = 0.0;
};

PaddingSummary summarize_padding(const BatchPlan& plan, std::size_t budget);
PaddingReport padding_report(const BatchPlan& plan, std::size_t budget);

}  // namespace skipkv
