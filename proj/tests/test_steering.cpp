// Copyright 2026 The SkipKV Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "skipkv/rng.hpp"
#include "skipkv/steering.hpp"
#include "test_util.hpp"

using namespace skipkv;
using testutil::TempDir;

TEST(Steering, StrengthExamples) {
  EXPECT_NEAR(steering_strength(1.0, 0.02, 5), 1.10, 1e-12);
  EXPECT_EQ(steering_strength(1.0, 0.02, 0), 1.0);
  EXPECT_NEAR(steering_strength(1.25, 0.02, 10), 1.45, 1e-12);
}

TEST(Steering, UpdateTracksCount) {
  SteeringConfig cfg;
  cfg.alpha0 = 1.25;
  auto state = SteeringState::make({1.0F, 2.0F}, cfg);
  EXPECT_EQ(state.strength, 1.25);
  state = update_strength(state, 10);
  EXPECT_NEAR(state.strength, 1.45, 1e-12);
  EXPECT_EQ(state.nonexec_count, 10U);
  EXPECT_SKIPKV_ERROR(update_strength(state, 9), ErrorCode::kInvalidArgument);
}

TEST(Steering, BuildVectorIsMeanDifference) {
  Tensor e({1, 2}, {1, 0});
  Tensor o({1, 2}, {0, 1});
  EXPECT_EQ(build_vector(e, o), (std::vector<float>{1, -1}));
  EXPECT_EQ(build_vector(e, e), (std::vector<float>{0, 0}));
}

TEST(Steering, BuildVectorMatchesTwoPassMean) {
  SplitMix64 rng(4);
  Tensor e({500, 16});
  Tensor o({300, 16});
  for (float& v : e.data()) v = 4.0F * rng.uniform_float() - 1.0F;
  for (float& v : o.data()) v = 2.0F * rng.uniform_float() - 3.0F;
  const auto got = build_vector(e, o);
  for (std::size_t c = 0; c < 16; ++c) {
    // column-major pass, reversed row order
    long double se = 0.0L;
    long double so = 0.0L;
    for (std::size_t r = e.dim(0); r-- > 0;) se += e(r, c);
    for (std::size_t r = o.dim(0); r-- > 0;) so += o(r, c);
    const double want = static_cast<double>(se / 500.0L - so / 300.0L);
    EXPECT_NEAR(got[c], want, 1e-6);
  }
}

TEST(Steering, BuildVectorErrors) {
  Tensor e({2, 3});
  Tensor empty({0, 3});
  Tensor wide({2, 4});
  EXPECT_SKIPKV_ERROR(build_vector(e, empty), ErrorCode::kInvalidArgument);
  EXPECT_SKIPKV_ERROR(build_vector(e, wide), ErrorCode::kShapeMismatch);
}

TEST(Steering, InjectIdentities) {
  SteeringConfig cfg;
  cfg.alpha0 = 0.0;
  cfg.gamma = 0.0;
  Tensor h({2, 3}, {1, 2, 3, 4, 5, 6});
  const Tensor orig = h;
  inject(h, SteeringState::make({1, 1, 1}, cfg));
  EXPECT_EQ(h, orig);
  cfg.alpha0 = 3.0;
  inject(h, SteeringState::make({0, 0, 0}, cfg));
  EXPECT_EQ(h, orig);
}

TEST(Steering, InjectIsLinear) {
  SplitMix64 rng(8);
  std::vector<float> v(8);
  for (float& x : v) x = rng.uniform_float() - 0.5F;
  Tensor twice({3, 8});
  for (float& x : twice.data()) x = rng.uniform_float();
  Tensor once = twice;
  SteeringConfig a;
  a.alpha0 = 1.0;
  SteeringConfig b;
  b.alpha0 = 1.25;
  SteeringConfig sum;
  sum.alpha0 = 2.25;
  inject(twice, SteeringState::make(v, a));
  inject(twice, SteeringState::make(v, b));
  inject(once, SteeringState::make(v, sum));
  for (std::size_t i = 0; i < once.size(); ++i) {
    EXPECT_NEAR(twice.data()[i], once.data()[i], 1e-6);
  }
}

TEST(Steering, InjectWidthMismatch) {
  Tensor h({1, 3});
  EXPECT_SKIPKV_ERROR(inject(h, SteeringState::make({1, 2}, SteeringConfig{})),
                      ErrorCode::kShapeMismatch);
}

TEST(Steering, DumpRoundTripAndManifest) {
  TempDir dir;
  SteeringDump dump{Tensor({3, 2}, {1, 2, 3, 4, 5, 6}), Tensor({1, 2}, {7, 8})};
  write_steering_dump(dump, dir.path());
  const auto doc = nlohmann::json::parse(testutil::slurp(dir / "steer_manifest.json"));
  EXPECT_EQ(doc["rows_E"], 3);
  EXPECT_EQ(doc["rows_O"], 1);
  EXPECT_EQ(doc["d_model"], 2);
  EXPECT_EQ(std::filesystem::file_size(dir / "steer_E.bin"), 24U);
  const auto back = read_steering_dump(dir.path());
  EXPECT_EQ(back.execution, dump.execution);
  EXPECT_EQ(back.nonexecution, dump.nonexecution);
}

TEST(Steering, DumpWithWrongRowCountFails) {
  TempDir dir;
  SteeringDump dump{Tensor({3, 2}), Tensor({1, 2})};
  write_steering_dump(dump, dir.path());
  std::ofstream(dir / "steer_manifest.json") << R"({"rows_E": 4, "rows_O": 1, "d_model": 2})";
  EXPECT_SKIPKV_ERROR(read_steering_dump(dir.path()), ErrorCode::kShapeMismatch);
}
