// Copyright 2026 The SkipKV Authors
// SPDX-License-Identifier: Apache-2.0

#include "skipkv/trace.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <set>

#include "json.hpp"
#include "skipkv/errors.hpp"

namespace skipkv {

namespace fs = std::filesystem;
using nlohmann::json;

void ModelShape::validate() const {
  require(num_layers >= 1 && num_q_heads >= 1 && num_kv_heads >= 1 && head_dim >= 1 &&
              d_model >= 1 && vocab_size >= 1,
          ErrorCode::kShapeMismatch, "model shape counts must all be >= 1");
  require(num_q_heads % num_kv_heads == 0, ErrorCode::kShapeMismatch,
          "num_q_heads (" + std::to_string(num_q_heads) + ") is not a multiple of num_kv_heads (" +
              std::to_string(num_kv_heads) + ")");
}

void TokenStream::validate() const {
  require(token_ids.size() == token_texts.size(), ErrorCode::kMalformedInput,
          "token_ids and token_texts differ in length");
  require(prefill_len <= size(), ErrorCode::kMalformedInput, "prefill_len exceeds stream length");
  require(size() <= prefill_len + max_gen_len, ErrorCode::kMalformedInput,
          "stream longer than prefill_len + max_gen_len");
}

AttentionMask AttentionMask::all_valid(std::size_t length) {
  return AttentionMask(std::vector<std::uint8_t>(length, 1));
}

AttentionMask AttentionMask::left_padded(std::size_t length, std::size_t padding) {
  std::vector<std::uint8_t> valid(length, 1);
  std::fill_n(valid.begin(), std::min(padding, length), std::uint8_t{0});
  return AttentionMask(std::move(valid));
}

AttentionMask AttentionMask::from_ids(std::span<const std::size_t> gs_ids, std::size_t padding_len) {
  std::vector<std::uint8_t> valid(gs_ids.size());
  std::transform(gs_ids.begin(), gs_ids.end(), valid.begin(),
                 [&](std::size_t id) { return static_cast<std::uint8_t>(id >= padding_len); });
  return AttentionMask(std::move(valid));
}

std::size_t AttentionMask::valid_count() const {
  return static_cast<std::size_t>(std::count(valid_.begin(), valid_.end(), std::uint8_t{1}));
}

bool AttentionMask::is_left_padded() const {
  return std::is_sorted(valid_.begin(), valid_.end());
}

void DecodingTrace::validate() const {
  model.validate();
  require(alpha >= 1, ErrorCode::kMalformedInput, "alpha must be >= 1");
  require(std::is_sorted(layers.begin(), layers.end()) &&
              std::adjacent_find(layers.begin(), layers.end()) == layers.end(),
          ErrorCode::kMalformedInput, "layers must be strictly increasing");
  for (std::size_t layer : layers) {
    require(layer < model.num_layers, ErrorCode::kShapeMismatch,
            "layer " + std::to_string(layer) + " outside model with " +
                std::to_string(model.num_layers) + " layers");
  }
  std::set<std::uint64_t> ids;
  for (const auto& sample : samples) {
    require(ids.insert(sample.sample_id).second, ErrorCode::kMalformedInput,
            "duplicate sample_id " + std::to_string(sample.sample_id));
    sample.tokens.validate();
    require(sample.positions() == steps, ErrorCode::kShapeMismatch,
            "sample " + std::to_string(sample.sample_id) + " covers " +
                std::to_string(sample.positions()) + " positions but trace has " +
                std::to_string(steps) + " steps");
    for (auto id : sample.tokens.token_ids) {
      require(id >= 0 && static_cast<std::size_t>(id) < model.vocab_size,
              ErrorCode::kMalformedInput, "token id outside vocabulary");
    }
    require(sample.records.size() == layers.size(), ErrorCode::kShapeMismatch,
            "sample record layers do not match manifest layers");
    const std::vector<std::size_t> q_shape{model.num_q_heads, 1, model.head_dim};
    const std::vector<std::size_t> kv_shape{model.num_kv_heads, 1, model.head_dim};
    const std::vector<std::size_t> h_shape{1, model.d_model};
    for (std::size_t slot = 0; slot < layers.size(); ++slot) {
      const auto& per_step = sample.records[slot];
      require(per_step.size() == steps, ErrorCode::kShapeMismatch,
              "record count differs from steps");
      for (const auto& record : per_step) {
        require(record.layer == layers[slot] && record.query.shape() == q_shape &&
                    record.key.shape() == kv_shape && record.value.shape() == kv_shape &&
                    record.hidden.shape() == h_shape,
                ErrorCode::kShapeMismatch, "step record shape inconsistent with model");
      }
    }
  }
}

Tensor query_window(std::span<const StepRecord> records, std::size_t end, std::size_t window,
                    const ModelShape& shape) {
  require(end <= records.size() && end >= 1, ErrorCode::kInvalidArgument,
          "query window end outside recorded positions");
  const std::size_t len = std::min(window, end);
  const std::size_t first = end - len;
  Tensor out({shape.num_q_heads, len, shape.head_dim});
  for (std::size_t h = 0; h < shape.num_q_heads; ++h) {
    for (std::size_t r = 0; r < len; ++r) {
      auto src = records[first + r].query.row(h, 0);
      std::copy(src.begin(), src.end(), out.row(h, r).begin());
    }
  }
  return out;
}

Tensor hidden_matrix(std::span<const StepRecord> records) {
  if (records.empty()) {
    return Tensor({0, 0});
  }
  const std::size_t width = records.front().hidden.size();
  Tensor out({records.size(), width});
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto src = records[i].hidden.data();
    std::copy(src.begin(), src.end(), out.slab(i).begin());
  }
  return out;
}

std::string blob_name(std::uint64_t sample_id, std::size_t layer, std::size_t step, char kind) {
  return "s" + std::to_string(sample_id) + "_l" + std::to_string(layer) + "_t" +
         std::to_string(step) + "_" + kind + ".bin";
}

namespace {

std::uint32_t byteswap32(std::uint32_t v) {
  return (v >> 24) | ((v >> 8) & 0xFF00U) | ((v << 8) & 0xFF0000U) | (v << 24);
}

json manifest_json(const DecodingTrace& trace) {
  json samples = json::array();
  for (const auto& s : trace.samples) {
    samples.push_back({{"sample_id", s.sample_id},
                       {"prefill_len", s.tokens.prefill_len},
                       {"max_gen_len", s.tokens.max_gen_len},
                       {"token_ids", s.tokens.token_ids},
                       {"token_texts", s.tokens.token_texts},
                       {"padding_len", s.padding_len}});
  }
  const auto& m = trace.model;
  return {{"format_version", kTraceFormatVersion},
          {"model",
           {{"num_layers", m.num_layers},
            {"num_q_heads", m.num_q_heads},
            {"num_kv_heads", m.num_kv_heads},
            {"head_dim", m.head_dim},
            {"d_model", m.d_model},
            {"vocab_size", m.vocab_size}}},
          {"samples", samples},
          {"steps", trace.steps},
          {"alpha", trace.alpha},
          {"layers", trace.layers}};
}

template <typename T>
T field(const json& obj, const char* key) {
  require(obj.is_object() && obj.contains(key), ErrorCode::kMalformedInput,
          std::string("manifest missing field '") + key + "'");
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    fail(ErrorCode::kMalformedInput, std::string("manifest field '") + key + "': " + e.what());
  }
}

Tensor read_blob(const fs::path& dir, const std::string& name, std::vector<std::size_t> shape) {
  const std::size_t count = element_count(shape);
  return Tensor(std::move(shape), read_f32_file(dir / name, count));
}

}  // namespace

void write_f32_file(const fs::path& path, std::span<const float> values) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size_bytes()));
  } else {
    for (float v : values) {
      const std::uint32_t le = byteswap32(std::bit_cast<std::uint32_t>(v));
      out.write(reinterpret_cast<const char*>(&le), sizeof(le));
    }
  }
  require(out.good(), ErrorCode::kIo, "write failed for " + path.string());
}

std::vector<float> read_f32_file(const fs::path& path, std::size_t expected_count) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) {
    fail(ErrorCode::kMissingBlob, "missing blob " + path.string());
  }
  const auto bytes = fs::file_size(path, ec);
  require(!ec, ErrorCode::kIo, "cannot stat " + path.string());
  require(bytes == expected_count * sizeof(float), ErrorCode::kShapeMismatch,
          path.filename().string() + " holds " + std::to_string(bytes) + " bytes, expected " +
              std::to_string(expected_count * sizeof(float)) + " (" +
              std::to_string(expected_count) + " f32)");
  std::vector<float> values(expected_count);
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::kIo, "cannot open " + path.string());
  in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(bytes));
  require(in.gcount() == static_cast<std::streamsize>(bytes), ErrorCode::kIo,
          "short read on " + path.string());
  if constexpr (std::endian::native != std::endian::little) {
    for (float& v : values) {
      v = std::bit_cast<float>(byteswap32(std::bit_cast<std::uint32_t>(v)));
    }
  }
  return values;
}

void write_trace(const DecodingTrace& trace, const fs::path& dir) {
  trace.validate();
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec, ErrorCode::kIo, "cannot create " + dir.string() + ": " + ec.message());

  for (const auto& sample : trace.samples) {
    for (std::size_t slot = 0; slot < trace.layers.size(); ++slot) {
      const std::size_t layer = trace.layers[slot];
      for (std::size_t t = 0; t < trace.steps; ++t) {
        const auto& rec = sample.records[slot][t];
        write_f32_file(dir / blob_name(sample.sample_id, layer, t, 'q'), rec.query.data());
        write_f32_file(dir / blob_name(sample.sample_id, layer, t, 'k'), rec.key.data());
        write_f32_file(dir / blob_name(sample.sample_id, layer, t, 'v'), rec.value.data());
        write_f32_file(dir / blob_name(sample.sample_id, layer, t, 'h'), rec.hidden.data());
      }
    }
  }

  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  require(out.good(), ErrorCode::kIo, "cannot write manifest in " + dir.string());
  out << manifest_json(trace).dump(2) << '\n';
  require(out.good(), ErrorCode::kIo, "manifest write failed");
}

DecodingTrace read_trace(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.json";
  std::ifstream in(manifest_path);
  require(in.good(), ErrorCode::kIo, "cannot open " + manifest_path.string());
  json manifest;
  try {
    manifest = json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorCode::kMalformedInput, "manifest is not valid JSON: " + std::string(e.what()));
  }

  const auto version = field<std::string>(manifest, "format_version");
  require(version == kTraceFormatVersion, ErrorCode::kUnsupportedVersion,
          "unsupported trace format version '" + version + "'");

  DecodingTrace trace;
  const json& model = manifest.contains("model") ? manifest["model"] : json();
  trace.model.num_layers = field<std::size_t>(model, "num_layers");
  trace.model.num_q_heads = field<std::size_t>(model, "num_q_heads");
  trace.model.num_kv_heads = field<std::size_t>(model, "num_kv_heads");
  trace.model.head_dim = field<std::size_t>(model, "head_dim");
  trace.model.d_model = field<std::size_t>(model, "d_model");
  trace.model.vocab_size = field<std::size_t>(model, "vocab_size");
  trace.model.validate();
  trace.steps = field<std::size_t>(manifest, "steps");
  trace.alpha = field<std::size_t>(manifest, "alpha");
  if (manifest.contains("layers")) {
    trace.layers = field<std::vector<std::size_t>>(manifest, "layers");
  } else {
    trace.layers.resize(trace.model.num_layers);
    for (std::size_t l = 0; l < trace.layers.size(); ++l) {
      trace.layers[l] = l;
    }
  }

  const auto samples = field<json>(manifest, "samples");
  require(samples.is_array(), ErrorCode::kMalformedInput, "manifest 'samples' must be an array");
  for (const auto& entry : samples) {
    BatchSample sample;
    sample.sample_id = field<std::uint64_t>(entry, "sample_id");
    sample.tokens.prefill_len = field<std::size_t>(entry, "prefill_len");
    sample.tokens.token_ids = field<std::vector<std::int32_t>>(entry, "token_ids");
    sample.tokens.token_texts = field<std::vector<std::string>>(entry, "token_texts");
    sample.padding_len = field<std::size_t>(entry, "padding_len");
    sample.tokens.max_gen_len = entry.contains("max_gen_len")
                                    ? field<std::size_t>(entry, "max_gen_len")
                                    : sample.tokens.size() - std::min(sample.tokens.prefill_len,
                                                                      sample.tokens.size());
    trace.samples.push_back(std::move(sample));
  }

  // Check counts before touching blobs so a bad manifest never triggers a
  // partial load.
  for (const auto& sample : trace.samples) {
    sample.tokens.validate();
    require(sample.positions() == trace.steps, ErrorCode::kShapeMismatch,
            "sample " + std::to_string(sample.sample_id) + " covers " +
                std::to_string(sample.positions()) + " positions but manifest declares " +
                std::to_string(trace.steps) + " steps");
  }

  const auto& m = trace.model;
  for (auto& sample : trace.samples) {
    sample.records.resize(trace.layers.size());
    for (std::size_t slot = 0; slot < trace.layers.size(); ++slot) {
      const std::size_t layer = trace.layers[slot];
      require(layer < m.num_layers, ErrorCode::kShapeMismatch, "manifest layer out of range");
      auto& per_step = sample.records[slot];
      per_step.reserve(trace.steps);
      for (std::size_t t = 0; t < trace.steps; ++t) {
        StepRecord rec;
        rec.layer = layer;
        rec.query = read_blob(dir, blob_name(sample.sample_id, layer, t, 'q'),
                              {m.num_q_heads, 1, m.head_dim});
        rec.key = read_blob(dir, blob_name(sample.sample_id, layer, t, 'k'),
                            {m.num_kv_heads, 1, m.head_dim});
        rec.value = read_blob(dir, blob_name(sample.sample_id, layer, t, 'v'),
                              {m.num_kv_heads, 1, m.head_dim});
        rec.hidden = read_blob(dir, blob_name(sample.sample_id, layer, t, 'h'), {1, m.d_model});
        per_step.push_back(std::move(rec));
      }
    }
  }
  trace.validate();
  return trace;
}

}  // namespace skipkv
