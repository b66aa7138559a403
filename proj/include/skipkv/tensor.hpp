// Copyright 2026 The SkipKV Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace skipkv {

/// Dense row-major f32 tensor. Rank is whatever the shape says; accessors
/// exist for rank 2 and rank 3 since those are the only ranks the engine uses.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, float fill = 0.0F);
  Tensor(std::vector<std::size_t> shape, std::vector<float> data);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }
  std::vector<float>& storage() { return data_; }

  float& operator()(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  float operator()(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
  float& operator()(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  float operator()(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }

  /// Contiguous sub-block at index `i` of the leading axis.
  std::span<float> slab(std::size_t i);
  std::span<const float> slab(std::size_t i) const;

  /// Row `j` of slab `i` for rank-3 tensors.
  std::span<float> row(std::size_t i, std::size_t j);
  std::span<const float> row(std::size_t i, std::size_t j) const;

  bool operator==(const Tensor& other) const = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<float> data_;
};

std::size_t element_count(std::span<const std::size_t> shape);
std::string shape_string(std::span<const std::size_t> shape);

}  // namespace skipkv
