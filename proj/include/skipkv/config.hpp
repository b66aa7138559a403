// Copyright 2026 The SkipKV Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "skipkv/toy_decoder.hpp"

namespace skipkv {

/// Flat JSON run configuration. Every key is optional and defaults to the
/// value in the corresponding module config; unknown keys raise kConfig.
///
///   mode               simulate | evict | group | report
///   seed               u64
///   budget, compress_interval, protect_window, method (skipkv | rkv | fullkv)
///   sigma, tau, epsilon, alpha_window
///   delimiters, keywords                     arrays of strings
///   steering           none | calibrate | vector | dump
///   alpha0, gamma, steer_layer, steering_vector, steering_dump
///   model              {num_layers, num_q_heads, num_kv_heads, head_dim, d_model, vocab_size}
///   max_gen_len, repetition_rate, min_sentence_len, max_sentence_len,
///   prompt_lengths, batch_size, batch_grouping, attention_scale,
///   reflection_bias, logit_noise, record_trace
///   trace, out, lengths, inputs, dump_ranges
struct RunConfig {
  std::string mode = "simulate";
  SimulationConfig simulation;
  std::filesystem::path trace;
  std::filesystem::path out;
  std::filesystem::path lengths;
  std::vector<std::filesystem::path> inputs;
  bool dump_ranges = false;

  std::uint64_t seed() const { return simulation.toy.seed; }
  const EvictionConfig& eviction() const { return simulation.engine.eviction; }
  EvictionConfig& eviction() { return simulation.engine.eviction; }
  /// Copies delimiter and keyword sets into the toy config so both agree.
  void sync();
  void validate() const;
};

RunConfig run_config_from_json(const nlohmann::json& doc);
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& config);

const char* to_string(SteeringMode mode);
SteeringMode parse_steering_mode(const std::string& name);

}  // namespace skipkv
