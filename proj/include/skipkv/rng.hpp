// Copyright 2026 The SkipKV Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

namespace skipkv {

/// SplitMix64 (Steele, Lea, Flood 2014). Portable reference:
///
///   state += 0x9E3779B97F4A7C15
///   z = state
///   z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
///   z = (z ^ (z >> 27)) * 0x94D049BB133111EB
///   return z ^ (z >> 31)
///
/// All arithmetic is modulo 2^64.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next();
  /// Top 24 bits scaled into [0, 1); exact in f32.
  float uniform_float();
  /// Top 53 bits scaled into [0, 1).
  double uniform();
  /// next() % bound; bound must be nonzero.
  std::uint64_t below(std::uint64_t bound);

 private:
  std::uint64_t state_;
};

/// Seed of an independent named stream: the first output of a SplitMix64
/// seeded with seed ^ (stream * 0x9E3779B97F4A7C15).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace skipkv
