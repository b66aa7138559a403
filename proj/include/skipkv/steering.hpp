// Copyright 2026 The SkipKV Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "skipkv/tensor.hpp"

namespace skipkv {

struct SteeringConfig {
  double alpha0 = 1.0;
  double gamma = 0.02;
  std::size_t layer = 20;

  void validate() const;
};

/// Per-sample steering state. `strength` always equals
/// alpha0 + gamma * nonexec_count; only update_strength() moves it.
struct SteeringState {
  std::vector<float> vector;
  double alpha0 = 1.0;
  double gamma = 0.02;
  std::size_t nonexec_count = 0;
  double strength = 1.0;
  std::size_t layer = 20;

  static SteeringState make(std::vector<float> vector, const SteeringConfig& config);
};

double steering_strength(double alpha0, double gamma, std::size_t nonexec_count);

/// Mean of `execution` rows minus mean of `nonexecution` rows.
std::vector<float> build_vector(const Tensor& execution, const Tensor& nonexecution);

/// Throws kInvalidArgument when the counter would decrease.
SteeringState update_strength(SteeringState state, std::size_t nonexec_count);

/// Adds strength * vector to every row of `hidden` ([rows x width]).
void inject(Tensor& hidden, const SteeringState& state);
void inject(std::span<float> hidden_row, const SteeringState& state);

/// steer_E.bin / steer_O.bin + steer_manifest.json {rows_E, rows_O, d_model}.
struct SteeringDump {
  Tensor execution;
  Tensor nonexecution;
};

void write_steering_dump(const SteeringDump& dump, const std::filesystem::path& dir);
SteeringDump read_steering_dump(const std::filesystem::path& dir);

}  // namespace skipkv
