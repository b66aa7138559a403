// Copyright 2026 The SkipKV Authors
// SPDX-License-Identifier: Apache-2.0

#include "skipkv/replay.hpp"

#include "skipkv/errors.hpp"

namespace skipkv {

using nlohmann::json;

ReplayResult replay_trace(const DecodingTrace& trace, EngineOptions options) {
  trace.validate();
  options.eviction.scoring.alpha_window = trace.alpha;
  options.eviction.validate();
  const auto& shape = trace.model;
  const std::size_t slots = trace.layers.size();

  ReplayResult result;
  auto& m = result.metrics;
  const auto& ev = options.eviction;
  m.kind = "evict";
  m.method = to_string(ev.method);
  m.budget = ev.budget;
  m.compress_interval = ev.compress_interval;
  m.protect_window = ev.protect_window;
  m.sigma = ev.scoring.sigma;
  m.tau = ev.scoring.tau;
  m.alpha_window = ev.scoring.alpha_window;

  for (const auto& sample : trace.samples) {
    SampleEngine engine(shape, slots, options, sample.padding_len, sample.tokens.prefill_len);
    SampleMetrics sm;
    sm.sample_id = sample.sample_id;
    sm.prefill_len = sample.tokens.prefill_len;
    sm.padding_len = sample.padding_len;
    sm.generated_len = sample.tokens.generated_len();
    SampleReplay replay;
    replay.sample_id = sample.sample_id;

    for (std::size_t p = 0; p < sample.positions(); ++p) {
      for (std::size_t s = 0; s < slots; ++s) {
        const auto& rec = sample.records[s][p];
        engine.append(s, rec.query, rec.key, rec.value);
      }
      const bool padded = p < sample.padding_len;
      const std::string& text = padded ? std::string("<pad>")
                                       : sample.tokens.token_texts[p - sample.padding_len];
      auto event = engine.finish_position(text, sample.records[slots - 1][p].hidden.data());
      sm.cache_lengths.push_back(engine.cache_length());
      if (p >= sample.generation_start()) {
        sm.nonexec_trajectory.push_back(engine.nonexecution_count());
        sm.flagged_trajectory.push_back(engine.redundant().size());
      }
      if (event) {
        EventSummary summary{event->decode_step, event->position, event->pre_length,
                             event->post_length, 0};
        for (const auto& layer : event->layers) {
          for (const auto& head : layer.heads) {
            summary.evicted += head.evicted_gs_ids.size();
          }
        }
        sm.events.push_back(summary);
        replay.events.push_back(std::move(*event));
      }
    }
    sm.peak_cache_length = engine.peak_length();
    sm.evictions = engine.eviction_counts();
    sm.sentences = engine.segmenter().closed().size();
    sm.flagged_sentences = engine.redundant().size();
    m.samples.push_back(std::move(sm));
    result.samples.push_back(std::move(replay));
  }
  return result;
}

json decisions_json(const ReplayResult& result, const DecodingTrace& trace) {
  json samples = json::array();
  for (const auto& sample : result.samples) {
    json events = json::array();
    for (const auto& event : sample.events) {
      json layers = json::array();
      for (const auto& layer : event.layers) {
        json heads = json::array();
        for (const auto& head : layer.heads) {
          heads.push_back({{"head", head.head},
                           {"pre_length", head.pre_length},
                           {"post_length", head.post_length},
                           {"flagged_slots", head.flagged_slots},
                           {"evicted", head.evicted_gs_ids}});
        }
        layers.push_back({{"layer", trace.layers[layer.layer]}, {"heads", heads}});
      }
      events.push_back({{"decode_step", event.decode_step},
                        {"position", event.position},
                        {"layers", layers}});
    }
    samples.push_back({{"sample_id", sample.sample_id}, {"events", events}});
  }
  return {{"samples", samples}};
}

json ranges_json(const ReplayResult& result, const DecodingTrace& trace) {
  json samples = json::array();
  for (const auto& sample : result.samples) {
    json events = json::array();
    for (const auto& event : sample.events) {
      require(event.ranges.size() == trace.layers.size(), ErrorCode::kInvalidArgument,
              "range dump requested but ranges were not captured");
      json layers = json::array();
      for (std::size_t s = 0; s < event.ranges.size(); ++s) {
        json heads = json::array();
        for (const auto& table : event.ranges[s]) {
          json ranges = json::array();
          for (const auto& r : table.cs_ranges) {
            const auto& span = table.gs_spans[r.sentence];
            ranges.push_back({{"sentence", r.sentence},
                              {"gs", {span.begin, span.end}},
                              {"cs", {r.begin, r.end}},
                              {"lambda", table.lookup.contains(r.sentence)
                                             ? json(table.lookup.at(r.sentence))
                                             : json(nullptr)}});
          }
          heads.push_back(ranges);
        }
        layers.push_back({{"layer", trace.layers[s]}, {"heads", heads}});
      }
      events.push_back({{"decode_step", event.decode_step}, {"layers", layers}});
    }
    samples.push_back({{"sample_id", sample.sample_id}, {"events", events}});
  }
  return {{"samples", samples}};
}

}  // namespace skipkv
