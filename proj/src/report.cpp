// Copyright 2026 The SkipKV Authors
// SPDX-License-Identifier: Apache-2.0

#include "skipkv/report.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "skipkv/errors.hpp"

namespace skipkv {

using nlohmann::json;

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  require(out.good(), ErrorCode::kIo, "cannot write " + path.string());
}

json summary_json(const PaddingSummary& s) {
  return {{"mean_padding", s.mean_padding},
          {"min_padding", s.min_padding},
          {"max_padding", s.max_padding},
          {"total_padding", s.total_padding},
          {"mean_valid_budget", s.mean_valid_budget}};
}

}  // namespace

std::string format_number(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

Report build_report(std::span<const RunMetrics> runs) {
  require(!runs.empty(), ErrorCode::kInvalidArgument, "report needs at least one metrics file");
  Report report;
  report.kind = runs.front().kind;
  std::map<std::pair<std::size_t, std::string>, std::vector<const SampleMetrics*>> pooled;
  for (const auto& run : runs) {
    require(run.kind == report.kind, ErrorCode::kSchema,
            "cannot merge '" + run.kind + "' metrics with '" + report.kind + "' metrics");
    auto& bucket = pooled[{run.budget, run.method}];
    for (const auto& s : run.samples) {
      bucket.push_back(&s);
    }
  }

  std::ostringstream summary_csv;
  std::ostringstream cache_csv;
  std::ostringstream alpha_csv;
  std::ostringstream padding_csv;
  summary_csv << "budget,method,samples,events,evicted,mean_peak_cache,max_peak_cache,"
                 "mean_final_cache,mean_padding,mean_valid_budget,mean_nonexec,"
                 "mean_final_alpha,sentences,flagged_sentences\n";
  cache_csv << "budget,method,sample_id,position,cache_length\n";
  alpha_csv << "budget,method,sample_id,decode_step,alpha_t,nonexec,flagged\n";
  padding_csv << "budget,method,sample_id,prefill_len,padding_len,valid_budget\n";

  json rows = json::array();
  for (const auto& [key, samples] : pooled) {
    const auto& [budget, method] = key;
    ReportRow row;
    row.budget = budget;
    row.method = method;
    row.samples = samples.size();
    double peak = 0.0;
    double final_cache = 0.0;
    double padding = 0.0;
    double nonexec = 0.0;
    double alpha = 0.0;
    for (const SampleMetrics* s : samples) {
      row.events += s->events.size();
      for (const auto& e : s->events) {
        row.evicted += e.evicted;
      }
      peak += static_cast<double>(s->peak_cache_length);
      row.max_peak_cache = std::max(row.max_peak_cache, s->peak_cache_length);
      final_cache += s->cache_lengths.empty() ? 0.0 : static_cast<double>(s->cache_lengths.back());
      padding += static_cast<double>(s->padding_len);
      nonexec += s->nonexec_trajectory.empty()
                     ? 0.0
                     : static_cast<double>(s->nonexec_trajectory.back());
      alpha += s->alpha_trajectory.empty() ? 0.0 : s->alpha_trajectory.back();
      row.sentences += s->sentences;
      row.flagged_sentences += s->flagged_sentences;

      const std::string prefix =
          std::to_string(budget) + "," + method + "," + std::to_string(s->sample_id) + ",";
      for (std::size_t p = 0; p < s->cache_lengths.size(); ++p) {
        cache_csv << prefix << p << "," << s->cache_lengths[p] << "\n";
      }
      for (std::size_t t = 0; t < s->nonexec_trajectory.size(); ++t) {
        alpha_csv << prefix << t + 1 << ","
                  << (t < s->alpha_trajectory.size() ? format_number(s->alpha_trajectory[t])
                                                     : std::string())
                  << "," << s->nonexec_trajectory[t] << ","
                  << (t < s->flagged_trajectory.size() ? std::to_string(s->flagged_trajectory[t])
                                                       : std::string())
                  << "\n";
      }
      padding_csv << prefix << s->prefill_len << "," << s->padding_len << ","
                  << static_cast<long long>(budget) - static_cast<long long>(s->padding_len)
                  << "\n";
    }
    const auto n = static_cast<double>(samples.size());
    if (!samples.empty()) {
      row.mean_peak_cache = peak / n;
      row.mean_final_cache = final_cache / n;
      row.mean_padding = padding / n;
      row.mean_nonexec = nonexec / n;
      row.mean_final_alpha = alpha / n;
    }
    row.mean_valid_budget = static_cast<double>(budget) - row.mean_padding;

    summary_csv << row.budget << "," << row.method << "," << row.samples << "," << row.events
                << "," << row.evicted << "," << format_number(row.mean_peak_cache) << ","
                << row.max_peak_cache << "," << format_number(row.mean_final_cache) << ","
                << format_number(row.mean_padding) << ","
                << format_number(row.mean_valid_budget) << ","
                << format_number(row.mean_nonexec) << "," << format_number(row.mean_final_alpha)
                << "," << row.sentences << "," << row.flagged_sentences << "\n";
    rows.push_back({{"budget", row.budget},
                    {"method", row.method},
                    {"samples", row.samples},
                    {"events", row.events},
                    {"evicted", row.evicted},
                    {"mean_peak_cache", row.mean_peak_cache},
                    {"max_peak_cache", row.max_peak_cache},
                    {"mean_final_cache", row.mean_final_cache},
                    {"mean_padding", row.mean_padding},
                    {"mean_valid_budget", row.mean_valid_budget},
                    {"mean_nonexec", row.mean_nonexec},
                    {"mean_final_alpha", row.mean_final_alpha},
                    {"sentences", row.sentences},
                    {"flagged_sentences", row.flagged_sentences}});
    report.rows.push_back(std::move(row));
  }
  report.summary = {{"schema", kMetricsSchema}, {"kind", report.kind}, {"rows", rows}};
  report.summary_csv = summary_csv.str();
  report.cache_length_csv = cache_csv.str();
  report.alpha_csv = alpha_csv.str();
  report.padding_csv = padding_csv.str();
  return report;
}

void write_report(const Report& report, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  require(!ec, ErrorCode::kIo, "cannot create " + dir.string());
  write_text(dir / "summary.json", report.summary.dump(2) + "\n");
  write_text(dir / "summary.csv", report.summary_csv);
  write_text(dir / "cache_length.csv", report.cache_length_csv);
  write_text(dir / "alpha_t.csv", report.alpha_csv);
  write_text(dir / "padding.csv", report.padding_csv);
}

json plan_json(const BatchPlan& plan, std::size_t budget) {
  json batches = json::array();
  for (const auto& batch : plan.batches) {
    json samples = json::array();
    for (const auto& s : batch.samples) {
      samples.push_back({{"id", s.id}, {"prefill_len", s.prefill_len}, {"padding", s.padding}});
    }
    batches.push_back({{"max_prefill", batch.max_prefill}, {"samples", samples}});
  }
  const auto r = padding_report(plan, budget);
  return {{"batch_size", plan.batch_size},
          {"budget", budget},
          {"batches", batches},
          {"grouped", summary_json(r.grouped)},
          {"original", summary_json(r.original)},
          {"recovered_fraction", r.recovered_fraction}};
}

}  // namespace skipkv
