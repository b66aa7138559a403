// Copyright 2026 The SkipKV Authors
// SPDX-License-Identifier: Apache-2.0

#include "skipkv/tensor.hpp"

#include <functional>
#include <numeric>

#include "skipkv/errors.hpp"

namespace skipkv {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kIo: return "io";
    case ErrorCode::kMissingBlob: return "missing-blob";
    case ErrorCode::kShapeMismatch: return "shape-mismatch";
    case ErrorCode::kUnsupportedVersion: return "unsupported-version";
    case ErrorCode::kMalformedInput: return "malformed-input";
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kSchema: return "schema";
    case ErrorCode::kInvariant: return "invariant";
  }
  return "unknown";
}

std::size_t element_count(std::span<const std::size_t> shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(std::span<const std::size_t> shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i != 0) {
      out += "x";
    }
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

Tensor::Tensor(std::vector<std::size_t> shape, float fill)
    : shape_(std::move(shape)), data_(element_count(shape_), fill) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<float> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  require(data_.size() == element_count(shape_), ErrorCode::kShapeMismatch,
          "tensor data holds " + std::to_string(data_.size()) + " floats but shape " +
              shape_string(shape_) + " needs " + std::to_string(element_count(shape_)));
}

std::span<float> Tensor::slab(std::size_t i) {
  const std::size_t stride = shape_.empty() ? 0 : data_.size() / shape_[0];
  return std::span<float>(data_).subspan(i * stride, stride);
}

std::span<const float> Tensor::slab(std::size_t i) const {
  const std::size_t stride = shape_.empty() ? 0 : data_.size() / shape_[0];
  return std::span<const float>(data_).subspan(i * stride, stride);
}

std::span<float> Tensor::row(std::size_t i, std::size_t j) {
  return std::span<float>(data_).subspan((i * shape_[1] + j) * shape_[2], shape_[2]);
}

std::span<const float> Tensor::row(std::size_t i, std::size_t j) const {
  return std::span<const float>(data_).subspan((i * shape_[1] + j) * shape_[2], shape_[2]);
}

}  // namespace skipkv
