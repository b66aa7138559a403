// Copyright 2026 The SkipKV Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "skipkv/engine.hpp"
#include "skipkv/metrics.hpp"
#include "skipkv/rng.hpp"
#include "skipkv/segmenter.hpp"
#include "skipkv/steering.hpp"
#include "skipkv/trace.hpp"

namespace skipkv {

/// Synthetic reasoning-like decoder configuration.
///
/// Vocabulary layout: id 0 is "<pad>", then the delimiter texts, then the
/// keyword texts (both in sorted order), then content tokens "t<id>".
struct ToyConfig {
  ModelShape shape{24, 8, 4, 16, 64, 96};
  std::uint64_t seed = 0;
  std::size_t max_gen_len = 512;
  double repetition_rate = 0.2;
  std::size_t min_sentence_len = 5;
  std::size_t max_sentence_len = 20;
  /// One prompt per sample.
  std::vector<std::size_t> prompt_lengths{16};
  std::size_t batch_size = 1;
  bool batch_grouping = true;
  float attention_scale = 0.25F;
  /// Added to keyword logits at sentence starts.
  float reflection_bias = 2.0F;
  /// Scale of the seeded Gumbel noise added to logits before argmax.
  float logit_noise = 1.0F;
  TokenSet delimiters = default_delimiters();
  TokenSet keywords = default_keywords();

  void validate() const;
};

class Vocabulary {
 public:
  Vocabulary(std::size_t size, const TokenSet& delimiters, const TokenSet& keywords);

  static constexpr std::int32_t kPad = 0;
  const std::string& text(std::int32_t id) const { return texts_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return texts_.size(); }
  std::span<const std::int32_t> delimiters() const { return delimiters_; }
  std::span<const std::int32_t> keywords() const { return keywords_; }
  std::span<const std::int32_t> content() const { return content_; }
  bool is_delimiter(std::int32_t id) const;

 private:
  std::vector<std::string> texts_;
  std::vector<std::int32_t> delimiters_;
  std::vector<std::int32_t> keywords_;
  std::vector<std::int32_t> content_;
};

/// Seeded weights. Each matrix is filled row-major from its own SplitMix64
/// stream (derive_seed(seed, stream_id)); element = (2u - 1) / sqrt(fan_in)
/// with u = uniform_float(). Stream ids: 1 embedding (fan_in 1),
/// 2 unembedding, 100 + 4l + {0,1,2,3} for layer l's Wq, Wk, Wv, Wo.
struct ToyWeights {
  Tensor embedding;    // [vocab x d_model]
  Tensor unembedding;  // [d_model x vocab]
  std::vector<Tensor> wq, wk, wv, wo;

  static ToyWeights generate(const ModelShape& shape, std::uint64_t seed);
};

struct ForwardOutput {
  std::vector<StepRecord> records;  // one per layer
  std::vector<float> final_hidden;
};

/// Deterministic GQA decoder with no positional encoding. Pre-norm residual
/// blocks: x += attention_scale * Wo . attn(rmsnorm(x)). Padding positions
/// skip attention.
class ToyDecoder {
 public:
  explicit ToyDecoder(ToyConfig config);

  const ToyConfig& config() const { return config_; }
  const ModelShape& shape() const { return config_.shape; }
  const Vocabulary& vocab() const { return vocab_; }
  const ToyWeights& weights() const { return weights_; }

  /// Runs one token through every layer, appending K/V to `engine` (which
  /// must have one slot per layer). Steering, when given, is added to the
  /// residual stream after layer steering->layer.
  ForwardOutput forward(std::int32_t token, bool padding, SampleEngine& engine,
                        const SteeringState* steering);

  /// rmsnorm(hidden) . unembedding.
  std::vector<float> logits(std::span<const float> hidden) const;

  /// Steering additions per layer since construction.
  const std::vector<std::size_t>& injections() const { return injections_; }
  std::size_t forward_passes() const { return forward_passes_; }

 private:
  ToyConfig config_;
  Vocabulary vocab_;
  ToyWeights weights_;
  std::vector<std::size_t> injections_;
  std::size_t forward_passes_ = 0;
};

/// Per-sample sentence planner: decides which token class comes next and
/// replays earlier sentences verbatim at the configured repetition rate.
class SentencePlanner {
 public:
  SentencePlanner(const ToyConfig& config, const Vocabulary& vocab, std::uint64_t sample_id);

  std::vector<std::int32_t> prompt(std::size_t length);
  /// Picks the next token from `logits` among the classes allowed at this point.
  std::int32_t next(std::span<const float> logits);

 private:
  const ToyConfig& config_;
  const Vocabulary& vocab_;
  SplitMix64 script_;
  SplitMix64 noise_;
  std::vector<std::vector<std::int32_t>> completed_;
  std::vector<std::int32_t> current_;
  std::deque<std::int32_t> pending_;
  bool copying_ = false;
  std::size_t planned_len_ = 0;
};

struct DecodeResult {
  std::int32_t token = 0;
  ForwardOutput forward;
};

/// Emits the next token from `last_hidden` and feeds it through the decoder.
DecodeResult decode_step(ToyDecoder& decoder, SentencePlanner& planner,
                         std::span<const float> last_hidden, SampleEngine& engine,
                         const SteeringState* steering);

enum class SteeringMode { kNone, kVector, kCalibrate, kDump };

struct SimulationConfig {
  ToyConfig toy;
  EngineOptions engine;
  SteeringConfig steering;
  SteeringMode steering_mode = SteeringMode::kCalibrate;
  std::vector<float> steering_vector;  // kVector
  std::filesystem::path steering_dump;  // kDump
  bool record_trace = true;

  void validate() const;
};

struct SampleRun {
  std::uint64_t sample_id = 0;
  /// run_simulation moves the records into the batch trace; tokens stay here.
  BatchSample trace_sample;
  std::vector<CompressionEvent> events;
  SampleMetrics metrics;
  /// Steering additions per layer for this sample.
  std::vector<std::size_t> injections;
};

struct SimulationResult {
  /// One trace per batch; samples in a batch share the padded step count.
  std::vector<DecodingTrace> traces;
  RunMetrics metrics;
  std::vector<SampleRun> samples;
  std::vector<float> steering_vector;
};

/// Builds a steering vector from an unsteered, uncompressed calibration run:
/// last hidden states at the steering layer, split by the label of the
/// sentence each generated token belongs to.
SteeringDump calibrate_steering(const ToyConfig& toy, const EngineOptions& engine,
                                std::size_t layer);

SampleRun run_sample(const ToyConfig& toy, const EngineOptions& engine,
                     const std::optional<SteeringState>& steering, std::uint64_t sample_id,
                     std::size_t prompt_len, std::size_t padding_len, bool record_trace);

SimulationResult run_simulation(const SimulationConfig& config);

/// Attention output [H_q x d] of `query` ([H_q x 1 x d]) over a layer cache.
Tensor attention_output(const LayerCache& cache, const Tensor& query,
                        std::span<const AttentionMask> masks, const ModelShape& shape);

/// Copy of `cache` without `slots` (ascending, per head identical).
LayerCache remove_slots(const LayerCache& cache, std::span<const std::size_t> slots);

struct MaskedEvictionReport {
  std::size_t removed = 0;
  float max_abs_delta = 0.0F;
};

/// Compares attention outputs with padded slots masked against the same cache
/// with those slots physically removed.
MaskedEvictionReport masked_eviction_preserves_output(const LayerCache& cache,
                                                      const Tensor& query,
                                                      std::size_t padding_len,
                                                      const ModelShape& shape);

}  // namespace skipkv
