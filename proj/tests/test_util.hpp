// Copyright 2026 The SkipKV Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <gtest/gtest.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "skipkv/errors.hpp"
#include "skipkv/toy_decoder.hpp"

namespace testutil {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    std::string name = "skipkv_";
    if (info != nullptr) {
      name += std::string(info->test_suite_name()) + "_" + info->name();
    }
    name += "_" + std::to_string(counter++);
    path_ = std::filesystem::temp_directory_path() / name;
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& leaf) const { return path_ / leaf; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Small model for fast end-to-end runs.
inline skipkv::ToyConfig small_toy() {
  skipkv::ToyConfig toy;
  toy.shape = {4, 4, 2, 8, 32, 64};
  toy.max_gen_len = 96;
  toy.prompt_lengths = {12};
  return toy;
}

inline skipkv::SimulationConfig small_simulation() {
  skipkv::SimulationConfig cfg;
  cfg.toy = small_toy();
  cfg.engine.eviction.budget = 48;
  cfg.engine.eviction.compress_interval = 16;
  cfg.engine.eviction.scoring.alpha_window = 8;
  cfg.steering.layer = 2;
  return cfg;
}

}  // namespace testutil

#define EXPECT_SKIPKV_ERROR(stmt, expected)                             \
  do {                                                                 \
    try {                                                              \
      stmt;                                                            \
      ADD_FAILURE() << "expected " << skipkv::to_string(expected);     \
    } catch (const skipkv::Error& e) {                                 \
      EXPECT_EQ(e.code(), expected) << e.what();                       \
    }                                                                  \
  } while (0)
