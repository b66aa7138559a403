// Copyright 2026 The SkipKV Authors
// SPDX-License-Identifier: Apache-2.0

#include "skipkv/metrics.hpp"

#include "skipkv/errors.hpp"

namespace skipkv {

using nlohmann::json;

namespace {

json event_json(const EventSummary& e) {
  return {{"decode_step", e.decode_step},
          {"position", e.position},
          {"pre_length", e.pre_length},
          {"post_length", e.post_length},
          {"evicted", e.evicted}};
}

template <typename T>
T field(const json& obj, const char* key) {
  if (!obj.contains(key)) {
    fail(ErrorCode::kSchema, std::string("metrics field missing: ") + key);
  }
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    fail(ErrorCode::kSchema, std::string("metrics field ") + key + ": " + e.what());
  }
}

}  // namespace

json to_json(const RunMetrics& m) {
  json samples = json::array();
  for (const auto& s : m.samples) {
    json events = json::array();
    for (const auto& e : s.events) {
      events.push_back(event_json(e));
    }
    samples.push_back({{"sample_id", s.sample_id},
                       {"prefill_len", s.prefill_len},
                       {"padding_len", s.padding_len},
                       {"generated_len", s.generated_len},
                       {"peak_cache_length", s.peak_cache_length},
                       {"cache_lengths", s.cache_lengths},
                       {"evictions", s.evictions},
                       {"events", events},
                       {"nonexec_trajectory", s.nonexec_trajectory},
                       {"alpha_trajectory", s.alpha_trajectory},
                       {"flagged_trajectory", s.flagged_trajectory},
                       {"sentences", s.sentences},
                       {"flagged_sentences", s.flagged_sentences}});
  }
  return {{"schema", kMetricsSchema},
          {"kind", m.kind},
          {"method", m.method},
          {"budget", m.budget},
          {"compress_interval", m.compress_interval},
          {"protect_window", m.protect_window},
          {"sigma", m.sigma},
          {"tau", m.tau},
          {"alpha_window", m.alpha_window},
          {"seed", m.seed},
          {"samples", samples}};
}

RunMetrics run_metrics_from_json(const json& doc) {
  require(doc.is_object(), ErrorCode::kSchema, "metrics document must be an object");
  const auto schema = field<std::string>(doc, "schema");
  require(schema == kMetricsSchema, ErrorCode::kSchema,
          "metrics schema '" + schema + "', expected '" + kMetricsSchema + "'");
  RunMetrics m;
  m.kind = field<std::string>(doc, "kind");
  m.method = field<std::string>(doc, "method");
  m.budget = field<std::size_t>(doc, "budget");
  m.compress_interval = field<std::size_t>(doc, "compress_interval");
  m.protect_window = field<bool>(doc, "protect_window");
  m.sigma = field<double>(doc, "sigma");
  m.tau = field<double>(doc, "tau");
  m.alpha_window = field<std::size_t>(doc, "alpha_window");
  m.seed = field<std::uint64_t>(doc, "seed");
  for (const auto& s : field<json>(doc, "samples")) {
    SampleMetrics out;
    out.sample_id = field<std::uint64_t>(s, "sample_id");
    out.prefill_len = field<std::size_t>(s, "prefill_len");
    out.padding_len = field<std::size_t>(s, "padding_len");
    out.generated_len = field<std::size_t>(s, "generated_len");
    out.peak_cache_length = field<std::size_t>(s, "peak_cache_length");
    out.cache_lengths = field<std::vector<std::size_t>>(s, "cache_lengths");
    out.evictions = field<std::vector<std::vector<std::size_t>>>(s, "evictions");
    for (const auto& e : field<json>(s, "events")) {
      out.events.push_back({field<std::size_t>(e, "decode_step"), field<std::size_t>(e, "position"),
                            field<std::size_t>(e, "pre_length"),
                            field<std::size_t>(e, "post_length"), field<std::size_t>(e, "evicted")});
    }
    out.nonexec_trajectory = field<std::vector<std::size_t>>(s, "nonexec_trajectory");
    out.alpha_trajectory = field<std::vector<double>>(s, "alpha_trajectory");
    out.flagged_trajectory = field<std::vector<std::size_t>>(s, "flagged_trajectory");
    out.sentences = field<std::size_t>(s, "sentences");
    out.flagged_sentences = field<std::size_t>(s, "flagged_sentences");
    m.samples.push_back(std::move(out));
  }
  return m;
}

}  // namespace skipkv
