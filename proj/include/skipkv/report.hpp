// Copyright 2026 The SkipKV Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "skipkv/batcher.hpp"
#include "skipkv/metrics.hpp"

namespace skipkv {

/// One merged table row per (budget, method).
struct ReportRow {
  std::size_t budget = 0;
  std::string method;
  std::size_t samples = 0;
  std::size_t events = 0;
  std::size_t evicted = 0;
  double mean_peak_cache = 0.0;
  std::size_t max_peak_cache = 0;
  double mean_final_cache = 0.0;
  double mean_padding = 0.0;
  double mean_valid_budget = 0.0;
  double mean_nonexec = 0.0;
  double mean_final_alpha = 0.0;
  std::size_t flagged_sentences = 0;
  std::size_t sentences = 0;
};

struct Report {
  std::string kind;
  std::vector<ReportRow> rows;
  nlohmann::json summary;
  std::string summary_csv;
  std::string cache_length_csv;
  std::string alpha_csv;
  std::string padding_csv;
};

/// Merges metrics of one kind. Rows are ordered by (budget, method); samples
/// sharing a key are pooled. Throws kSchema when kinds differ.
Report build_report(std::span<const RunMetrics> runs);

/// Writes summary.json, summary.csv, cache_length.csv, alpha_t.csv, padding.csv.
void write_report(const Report& report, const std::filesystem::path& dir);

/// Batch plan plus its padding report, as emitted by the group command.
nlohmann::json plan_json(const BatchPlan& plan, std::size_t budget);

/// Formats a double with 17 significant digits ("%.17g").
std::string format_number(double value);

}  // namespace skipkv
