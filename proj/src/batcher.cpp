// Copyright 2026 The SkipKV Authors
// SPDX-License-Identifier: Apache-2.0

#include "skipkv/batcher.hpp"

#include <algorithm>
#include <limits>

#include "skipkv/errors.hpp"

namespace skipkv {

std::size_t BatchPlan::total_padding() const {
  std::size_t total = 0;
  for (const auto& batch : batches) {
    for (const auto& s : batch.samples) {
      total += s.padding;
    }
  }
  return total;
}

std::size_t BatchPlan::sample_count() const {
  std::size_t n = 0;
  for (const auto& batch : batches) {
    n += batch.samples.size();
  }
  return n;
}

std::vector<PlannedSample> BatchPlan::flattened() const {
  std::vector<PlannedSample> out;
  for (const auto& batch : batches) {
    out.insert(out.end(), batch.samples.begin(), batch.samples.end());
  }
  return out;
}

namespace {

void check_input(std::span<const SampleLength> samples, std::size_t batch_size) {
  require(batch_size >= 1, ErrorCode::kInvalidArgument, "batch size must be >= 1");
  require(!samples.empty(), ErrorCode::kInvalidArgument, "cannot group an empty sample list");
}

Batch make_batch(std::span<const SampleLength> members) {
  Batch batch;
  for (const auto& s : members) {
    batch.max_prefill = std::max(batch.max_prefill, s.prefill_len);
  }
  for (const auto& s : members) {
    batch.samples.push_back({s.id, s.prefill_len, batch.max_prefill - s.prefill_len});
  }
  return batch;
}

// Batch sizes in order, with the short batch (if any) at index `short_at`.
std::vector<std::size_t> layout(std::size_t n, std::size_t batch_size, std::size_t short_at) {
  const std::size_t full = n / batch_size;
  const std::size_t rest = n % batch_size;
  std::vector<std::size_t> sizes(full, batch_size);
  if (rest != 0) {
    sizes.insert(sizes.begin() + static_cast<std::ptrdiff_t>(short_at), rest);
  }
  return sizes;
}

BatchPlan cut(std::span<const SampleLength> ordered, const std::vector<std::size_t>& sizes,
              std::size_t batch_size) {
  BatchPlan plan;
  plan.batch_size = batch_size;
  std::size_t offset = 0;
  for (std::size_t size : sizes) {
    plan.batches.push_back(make_batch(ordered.subspan(offset, size)));
    offset += size;
  }
  return plan;
}

}  // namespace

BatchPlan group(std::span<const SampleLength> samples, std::size_t batch_size) {
  check_input(samples, batch_size);
  std::vector<SampleLength> sorted(samples.begin(), samples.end());
  std::stable_sort(sorted.begin(), sorted.end(), [](const SampleLength& a, const SampleLength& b) {
    return a.prefill_len < b.prefill_len;
  });

  const std::size_t full = sorted.size() / batch_size;
  const bool has_short = sorted.size() % batch_size != 0;
  BatchPlan best = cut(sorted, layout(sorted.size(), batch_size, full), batch_size);
  if (has_short) {
    std::size_t best_padding = best.total_padding();
    for (std::size_t k = full; k-- > 0;) {
      BatchPlan candidate = cut(sorted, layout(sorted.size(), batch_size, k), batch_size);
      if (candidate.total_padding() < best_padding) {
        best_padding = candidate.total_padding();
        best = std::move(candidate);
      }
    }
  }
  best.input.assign(samples.begin(), samples.end());
  return best;
}

BatchPlan group_in_order(std::span<const SampleLength> samples, std::size_t batch_size) {
  check_input(samples, batch_size);
  BatchPlan plan = cut(samples, layout(samples.size(), batch_size, samples.size() / batch_size),
                       batch_size);
  plan.input.assign(samples.begin(), samples.end());
  return plan;
}

PaddingSummary summarize_padding(const BatchPlan& plan, std::size_t budget) {
  PaddingSummary summary;
  summary.min_padding = std::numeric_limits<std::size_t>::max();
  const auto flat = plan.flattened();
  for (const auto& s : flat) {
    summary.total_padding += s.padding;
    summary.min_padding = std::min(summary.min_padding, s.padding);
    summary.max_padding = std::max(summary.max_padding, s.padding);
  }
  if (flat.empty()) {
    summary.min_padding = 0;
    summary.mean_valid_budget = static_cast<double>(budget);
    return summary;
  }
  const auto n = static_cast<double>(flat.size());
  summary.mean_padding = static_cast<double>(summary.total_padding) / n;
  summary.mean_valid_budget = static_cast<double>(budget) - summary.mean_padding;
  return summary;
}

PaddingReport padding_report(const BatchPlan& plan, std::size_t budget) {
  PaddingReport report;
  report.budget = budget;
  report.grouped = summarize_padding(plan, budget);
  report.original = plan.input.empty()
                        ? report.grouped
                        : summarize_padding(group_in_order(plan.input, plan.batch_size), budget);
  if (report.original.total_padding > 0) {
    report.recovered_fraction =
        1.0 - static_cast<double>(report.grouped.total_padding) /
                  static_cast<double>(report.original.total_padding);
  }
  return report;
}

}  // namespace skipkv
