// Copyright 2026 The SkipKV Authors
// SPDX-License-Identifier: Apache-2.0

#include "skipkv/steering.hpp"

#include <fstream>

#include "json.hpp"
#include "skipkv/errors.hpp"
#include "skipkv/trace.hpp"

namespace skipkv {

namespace fs = std::filesystem;

void SteeringConfig::validate() const {
  require(gamma >= 0.0, ErrorCode::kConfig, "gamma must be non-negative");
}

double steering_strength(double alpha0, double gamma, std::size_t nonexec_count) {
  return alpha0 + gamma * static_cast<double>(nonexec_count);
}

SteeringState SteeringState::make(std::vector<float> vector, const SteeringConfig& config) {
  SteeringState state;
  state.vector = std::move(vector);
  state.alpha0 = config.alpha0;
  state.gamma = config.gamma;
  state.layer = config.layer;
  state.strength = steering_strength(config.alpha0, config.gamma, 0);
  return state;
}

std::vector<float> build_vector(const Tensor& execution, const Tensor& nonexecution) {
  require(execution.rank() == 2 && nonexecution.rank() == 2, ErrorCode::kInvalidArgument,
          "hidden-state dumps must be matrices");
  require(execution.dim(0) > 0 && nonexecution.dim(0) > 0, ErrorCode::kInvalidArgument,
          "steering needs both execution and non-execution rows");
  require(execution.dim(1) == nonexecution.dim(1), ErrorCode::kShapeMismatch,
          "execution and non-execution widths differ");
  const std::size_t width = execution.dim(1);
  auto row_mean = [width](const Tensor& m) {
    std::vector<double> mean(width, 0.0);
    for (std::size_t r = 0; r < m.dim(0); ++r) {
      for (std::size_t c = 0; c < width; ++c) {
        mean[c] += m(r, c);
      }
    }
    for (double& v : mean) {
      v /= static_cast<double>(m.dim(0));
    }
    return mean;
  };
  const auto e = row_mean(execution);
  const auto o = row_mean(nonexecution);
  std::vector<float> out(width);
  for (std::size_t c = 0; c < width; ++c) {
    out[c] = static_cast<float>(e[c] - o[c]);
  }
  return out;
}

SteeringState update_strength(SteeringState state, std::size_t nonexec_count) {
  require(nonexec_count >= state.nonexec_count, ErrorCode::kInvalidArgument,
          "non-execution counter cannot decrease");
  state.nonexec_count = nonexec_count;
  state.strength = steering_strength(state.alpha0, state.gamma, nonexec_count);
  return state;
}

void inject(std::span<float> hidden_row, const SteeringState& state) {
  require(hidden_row.size() == state.vector.size(), ErrorCode::kShapeMismatch,
          "hidden width differs from steering vector");
  const auto strength = static_cast<float>(state.strength);
  for (std::size_t c = 0; c < hidden_row.size(); ++c) {
    hidden_row[c] += strength * state.vector[c];
  }
}

void inject(Tensor& hidden, const SteeringState& state) {
  require(hidden.rank() == 2, ErrorCode::kInvalidArgument, "hidden states must be a matrix");
  for (std::size_t r = 0; r < hidden.dim(0); ++r) {
    inject(hidden.slab(r), state);
  }
}

void write_steering_dump(const SteeringDump& dump, const fs::path& dir) {
  require(dump.execution.rank() == 2 && dump.nonexecution.rank() == 2 &&
              dump.execution.dim(1) == dump.nonexecution.dim(1),
          ErrorCode::kShapeMismatch, "steering dump matrices must share a width");
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec, ErrorCode::kIo, "cannot create " + dir.string());
  write_f32_file(dir / "steer_E.bin", dump.execution.data());
  write_f32_file(dir / "steer_O.bin", dump.nonexecution.data());
  nlohmann::json manifest = {{"rows_E", dump.execution.dim(0)},
                             {"rows_O", dump.nonexecution.dim(0)},
                             {"d_model", dump.execution.dim(1)}};
  std::ofstream out(dir / "steer_manifest.json", std::ios::trunc);
  require(out.good(), ErrorCode::kIo, "cannot write steering manifest");
  out << manifest.dump(2) << '\n';
}

SteeringDump read_steering_dump(const fs::path& dir) {
  std::ifstream in(dir / "steer_manifest.json");
  require(in.good(), ErrorCode::kIo, "cannot open " + (dir / "steer_manifest.json").string());
  std::size_t rows_e = 0;
  std::size_t rows_o = 0;
  std::size_t width = 0;
  try {
    const auto manifest = nlohmann::json::parse(in);
    rows_e = manifest.at("rows_E").get<std::size_t>();
    rows_o = manifest.at("rows_O").get<std::size_t>();
    width = manifest.at("d_model").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kMalformedInput, std::string("steering manifest: ") + e.what());
  }
  SteeringDump dump;
  dump.execution = Tensor({rows_e, width}, read_f32_file(dir / "steer_E.bin", rows_e * width));
  dump.nonexecution =
      Tensor({rows_o, width}, read_f32_file(dir / "steer_O.bin", rows_o * width));
  return dump;
}

}  // namespace skipkv
