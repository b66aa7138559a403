// Copyright 2026 The SkipKV Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "skipkv/tensor.hpp"

namespace skipkv {

inline constexpr const char* kTraceFormatVersion = "skipkv-trace/1";

/// Grouped-query attention geometry. Query head `i` reads KV head `i / group_size()`.
struct ModelShape {
  std::size_t num_layers = 1;
  std::size_t num_q_heads = 1;
  std::size_t num_kv_heads = 1;
  std::size_t head_dim = 1;
  std::size_t d_model = 1;
  std::size_t vocab_size = 1;

  std::size_t group_size() const { return num_q_heads / num_kv_heads; }
  std::size_t kv_head_for(std::size_t q_head) const { return q_head / group_size(); }

  /// Throws kShapeMismatch when a count is zero or H_q is not a multiple of H_k.
  void validate() const;

  bool operator==(const ModelShape&) const = default;
};

struct TokenStream {
  std::vector<std::int32_t> token_ids;
  std::vector<std::string> token_texts;
  std::size_t prefill_len = 0;
  std::size_t max_gen_len = 0;

  std::size_t size() const { return token_ids.size(); }
  std::size_t generated_len() const { return size() - prefill_len; }
  void validate() const;

  bool operator==(const TokenStream&) const = default;
};

/// Everything one layer produced for one cache position.
///
/// `query` holds the query of that position only ([H_q x 1 x d]); observation
/// windows are assembled from the most recent records by `query_window`.
struct StepRecord {
  std::size_t layer = 0;
  Tensor query;   // [H_q x 1 x d]
  Tensor key;     // [H_k x 1 x d]
  Tensor value;   // [H_k x 1 x d]
  Tensor hidden;  // [1 x d_model]

  bool operator==(const StepRecord&) const = default;
};

/// Validity flag per cache slot. Padding is a contiguous left prefix when the
/// mask is built from a fresh left-padded batch; after eviction the surviving
/// padded slots still form a prefix because provenance ids stay sorted.
class AttentionMask {
 public:
  AttentionMask() = default;
  explicit AttentionMask(std::vector<std::uint8_t> valid) : valid_(std::move(valid)) {}

  static AttentionMask all_valid(std::size_t length);
  static AttentionMask left_padded(std::size_t length, std::size_t padding);
  /// Slot is padding when its generation-space id falls below `padding_len`.
  static AttentionMask from_ids(std::span<const std::size_t> gs_ids, std::size_t padding_len);

  std::size_t size() const { return valid_.size(); }
  bool valid(std::size_t slot) const { return valid_[slot] != 0; }
  std::size_t valid_count() const;
  bool is_left_padded() const;

  bool operator==(const AttentionMask&) const = default;

 private:
  std::vector<std::uint8_t> valid_;
};

struct BatchSample {
  std::uint64_t sample_id = 0;
  TokenStream tokens;
  std::size_t padding_len = 0;
  /// records[layer_slot][position]; layer_slot indexes DecodingTrace::layers.
  std::vector<std::vector<StepRecord>> records;

  /// Cache positions: left padding followed by every token of the stream.
  std::size_t positions() const { return padding_len + tokens.size(); }
  std::size_t generation_start() const { return padding_len + tokens.prefill_len; }
  AttentionMask mask() const { return AttentionMask::left_padded(positions(), padding_len); }

  bool operator==(const BatchSample&) const = default;
};

struct DecodingTrace {
  ModelShape model;
  std::size_t alpha = 32;
  std::size_t steps = 0;
  /// Layers captured, ascending. Empty in memory is normalized to all layers.
  std::vector<std::size_t> layers;
  std::vector<BatchSample> samples;

  /// Validates shapes and counts; throws Error on the first inconsistency.
  void validate() const;

  bool operator==(const DecodingTrace&) const = default;
};

/// Stacks the queries of positions [end - window, end) into [H_q x window x d].
Tensor query_window(std::span<const StepRecord> records, std::size_t end, std::size_t window,
                    const ModelShape& shape);

/// Stacks per-position hidden states into [positions x d_model].
Tensor hidden_matrix(std::span<const StepRecord> records);

std::string blob_name(std::uint64_t sample_id, std::size_t layer, std::size_t step, char kind);

void write_trace(const DecodingTrace& trace, const std::filesystem::path& dir);
DecodingTrace read_trace(const std::filesystem::path& dir);

/// Raw little-endian f32 file IO shared with the steering dump format.
void write_f32_file(const std::filesystem::path& path, std::span<const float> values);
std::vector<float> read_f32_file(const std::filesystem::path& path, std::size_t expected_count);

}  // namespace skipkv
