// Copyright 2026 The SkipKV Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "skipkv/eviction.hpp"
#include "skipkv/rng.hpp"
#include "test_util.hpp"

using namespace skipkv;

namespace {

std::vector<float> random_scores(SplitMix64& rng, std::size_t n, std::size_t levels) {
  std::vector<float> s(n);
  for (auto& v : s) {
    v = levels == 0 ? rng.uniform_float() : static_cast<float>(rng.below(levels));
  }
  return s;
}

}  // namespace

TEST(SelectSurvivors, TopByValue) {
  const std::vector<float> s{0.9F, 0.1F, 0.5F, 0.7F, 0.3F};
  EXPECT_EQ(select_survivors(s, 3), (std::vector<std::size_t>{0, 2, 3}));
}

TEST(SelectSurvivors, BudgetAtLeastLengthKeepsAll) {
  const std::vector<float> s{0.2F, 0.1F};
  EXPECT_EQ(select_survivors(s, 2), (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(select_survivors(s, 9), (std::vector<std::size_t>{0, 1}));
}

TEST(SelectSurvivors, TiesGoToRecent) {
  const std::vector<float> s{0.5F, 0.5F, 0.5F};
  EXPECT_EQ(select_survivors(s, 1), (std::vector<std::size_t>{2}));
}

TEST(SelectSurvivors, ProtectedSlotsAlwaysKept) {
  const std::vector<float> s{0.9F, 0.8F, 0.7F, -5.0F, -6.0F};
  const std::vector<std::size_t> prot{3, 4};
  EXPECT_EQ(select_survivors(s, 3, prot), (std::vector<std::size_t>{0, 3, 4}));
  EXPECT_SKIPKV_ERROR(select_survivors(s, 1, prot), ErrorCode::kInvalidArgument);
}

TEST(SelectSurvivors, MatchesQuadraticOracle) {
  SplitMix64 rng(7);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + rng.below(64);
    const auto s = random_scores(rng, n, trial % 2 == 0 ? 4 : 0);
    const std::size_t b = 1 + rng.below(n + 2);
    std::vector<std::size_t> prot;
    if (trial % 3 == 0 && b > 1) {
      for (std::size_t j = n - std::min(n, b - 1); j < n; ++j) prot.push_back(j);
    }
    EXPECT_EQ(select_survivors(s, b, prot), oracle::survivors(s, b, prot)) << "trial " << trial;
  }
}

TEST(HeadCache, AppendCompactAndProvenance) {
  HeadCache h(2);
  for (std::size_t i = 0; i < 5; ++i) {
    const float f = static_cast<float>(i);
    const std::vector<float> k{f, -f};
    const std::vector<float> v{10 * f, 0};
    h.append(k, v, 100 + i);
  }
  const std::vector<std::size_t> keep{1, 3, 4};
  h.compact(keep);
  EXPECT_EQ(h.size(), 3U);
  EXPECT_EQ(std::vector<std::size_t>(h.gs_ids().begin(), h.gs_ids().end()),
            (std::vector<std::size_t>{101, 103, 104}));
  EXPECT_EQ(h.key(1)[0], 3.0F);
  EXPECT_EQ(h.value(2)[0], 40.0F);
  const std::vector<float> k{0, 0};
  EXPECT_SKIPKV_ERROR(h.append(k, k, 104), ErrorCode::kInvariant);
}

TEST(MethodNames, RoundTrip) {
  for (auto m : {Method::kSkipKv, Method::kRkv, Method::kFullKv}) {
    EXPECT_EQ(parse_method(to_string(m)), m);
  }
  EXPECT_SKIPKV_ERROR(parse_method("h2o"), ErrorCode::kConfig);
}

TEST(EvictionConfig, WindowMustFitBudget) {
  EvictionConfig cfg;
  cfg.budget = 16;
  cfg.scoring.alpha_window = 32;
  EXPECT_SKIPKV_ERROR(cfg.validate(), ErrorCode::kConfig);
  cfg.protect_window = false;
  EXPECT_NO_THROW(cfg.validate());
}

namespace {

struct Fixture {
  ModelShape shape{1, 2, 1, 4, 4, 8};
  LayerCache cache;
  std::vector<RangeTable> tables{1};
  SplitMix64 rng{17};
  std::vector<Tensor> queries;

  explicit Fixture(std::size_t len) {
    cache.heads.assign(1, HeadCache(4));
    grow(len);
  }
  void grow(std::size_t count) {
    for (std::size_t i = 0; i < count; ++i) {
      std::vector<float> k(4), v(4);
      for (auto& x : k) x = 2.0F * rng.uniform_float() - 1.0F;
      for (auto& x : v) x = rng.uniform_float();
      const std::size_t id = cache.heads[0].size() == 0 ? 0 : cache.heads[0].gs_ids().back() + 1;
      cache.heads[0].append(k, v, id);
      Tensor q({2, 1, 4});
      for (auto& x : q.data()) x = 2.0F * rng.uniform_float() - 1.0F;
      queries.push_back(q);
    }
  }
  Tensor window(std::size_t alpha) const {
    const std::size_t n = std::min(alpha, queries.size());
    Tensor w({2, n, 4});
    for (std::size_t h = 0; h < 2; ++h) {
      for (std::size_t r = 0; r < n; ++r) {
        auto src = queries[queries.size() - n + r].row(h, 0);
        std::copy(src.begin(), src.end(), w.row(h, r).begin());
      }
    }
    return w;
  }
};

}  // namespace

TEST(CompressionStep, OverBudgetTrimsToBudget) {
  Fixture f(140);
  EvictionConfig cfg;
  SentenceContext ctx;
  ctx.generation_length = 140;
  const auto report = compression_step(f.cache, f.tables, f.window(32), ctx, f.shape, cfg);
  EXPECT_EQ(f.cache.heads[0].size(), 128U);
  EXPECT_EQ(report.heads[0].evicted_gs_ids.size(), 12U);
  EXPECT_GE(report.heads[0].min_kept_score, report.heads[0].max_evicted_score);
}

TEST(CompressionStep, UnderBudgetOnlyUpdatesRanges) {
  Fixture f(90);
  EvictionConfig cfg;
  const std::vector<SentenceSpan> spans{{0, 0, 9, ThoughtLabel::kExecution, true},
                                        {1, 10, 30, ThoughtLabel::kExecution, true}};
  SentenceContext ctx;
  ctx.closed_spans = spans;
  ctx.generation_length = 90;
  const auto before = std::vector<std::size_t>(f.cache.heads[0].gs_ids().begin(),
                                               f.cache.heads[0].gs_ids().end());
  compression_step(f.cache, f.tables, f.window(32), ctx, f.shape, cfg);
  EXPECT_EQ(f.cache.heads[0].size(), 90U);
  EXPECT_EQ(f.tables[0].cs_ranges.size(), 2U);
  EXPECT_EQ(f.tables[0].processed, 2U);
}

TEST(CompressionStep, MultiRoundMatchesNaiveReplay) {
  const float sigma = 0.1F;
  for (std::uint64_t seed = 1; seed <= 15; ++seed) {
    Fixture f(0);
    f.rng = SplitMix64(seed);
    EvictionConfig cfg;
    cfg.budget = 24;
    cfg.scoring.alpha_window = 4;
    std::vector<SentenceSpan> spans;
    std::vector<oracle::Span> oracle_spans;
    std::map<std::size_t, float> lambda;
    std::size_t open_begin = 0;
    std::size_t pos = 0;

    // Reference state: surviving gs ids, with keys looked up by id.
    std::vector<std::size_t> ref_ids;
    for (int round = 0; round < 3; ++round) {
      f.grow(20);
      for (int g = 0; g < 20; ++g) {
        ref_ids.push_back(pos);
        if (f.rng.below(5) == 0) {
          spans.push_back({spans.size(), open_begin, pos, ThoughtLabel::kExecution, true});
          oracle_spans.push_back({spans.back().index, open_begin, pos});
          if (f.rng.below(2) == 0) {
            lambda[spans.back().index] = 0.96F + 0.01F * static_cast<float>(f.rng.below(4));
          }
          open_begin = pos + 1;
        }
        ++pos;
      }

      // Naive reference scores over the current survivors.
      const auto& head = f.cache.heads[0];
      ASSERT_EQ(std::vector<std::size_t>(head.gs_ids().begin(), head.gs_ids().end()), ref_ids);
      const std::size_t n = ref_ids.size();
      std::vector<oracle::Matrix> q(2), k(1);
      const auto w = f.window(cfg.scoring.alpha_window);
      for (std::size_t h = 0; h < 2; ++h) {
        for (std::size_t r = 0; r < w.dim(1); ++r) {
          auto row = w.row(h, r);
          q[h].emplace_back(row.begin(), row.end());
        }
      }
      for (std::size_t j = 0; j < n; ++j) {
        auto row = head.key(j);
        k[0].emplace_back(row.begin(), row.end());
      }
      const std::vector<std::vector<bool>> valid(1, std::vector<bool>(n, true));
      const auto imp = oracle::importance(q, k, valid);
      const auto red = oracle::redundancy(k[0], valid[0], cfg.scoring.epsilon);
      const auto ranges = oracle::provenance_ranges(ref_ids, oracle_spans);
      std::vector<float> scores(n);
      for (std::size_t j = 0; j < n; ++j) {
        scores[j] = sigma * static_cast<float>(imp[0][j]) -
                    (1.0F - sigma) * static_cast<float>(red[j]);
      }
      for (const auto& [sentence, lam] : lambda) {
        auto it = ranges.find(sentence);
        if (it == ranges.end()) continue;
        for (std::size_t j = it->second.first; j <= it->second.second; ++j) scores[j] -= lam;
      }
      std::vector<std::size_t> prot;
      for (std::size_t j = n - std::min(n, cfg.scoring.alpha_window); j < n; ++j) {
        prot.push_back(j);
      }
      const auto keep = n > cfg.budget ? oracle::survivors(scores, cfg.budget, prot)
                                       : oracle::survivors(scores, n, prot);
      std::vector<std::size_t> next_ids;
      for (auto j : keep) next_ids.push_back(ref_ids[j]);
      ref_ids = next_ids;

      SentenceContext ctx;
      ctx.closed_spans = spans;
      ctx.lookup = &lambda;
      ctx.generation_length = pos;
      compression_step(f.cache, f.tables, w, ctx, f.shape, cfg);
      EXPECT_EQ(std::vector<std::size_t>(f.cache.heads[0].gs_ids().begin(),
                                         f.cache.heads[0].gs_ids().end()),
                ref_ids)
          << "seed " << seed << " round " << round;
    }
  }
}

TEST(CompressionStep, FlaggedRangesRankBelowUnflagged) {
  Fixture f(60);
  EvictionConfig cfg;
  cfg.budget = 40;
  cfg.protect_window = false;
  const std::vector<SentenceSpan> spans{{0, 0, 9, ThoughtLabel::kExecution, true},
                                        {1, 10, 19, ThoughtLabel::kExecution, true}};
  std::map<std::size_t, float> lambda{{0, 0.99F}};
  SentenceContext ctx;
  ctx.closed_spans = spans;
  ctx.lookup = &lambda;
  ctx.generation_length = 60;
  const auto report = compression_step(f.cache, f.tables, f.window(8), ctx, f.shape, cfg);
  // 20 evictions, flagged sentence 0 holds 10 slots: all of them go first.
  const auto& ev = report.heads[0].evicted_gs_ids;
  ASSERT_EQ(ev.size(), 20U);
  for (std::size_t id = 0; id < 10; ++id) {
    EXPECT_NE(std::find(ev.begin(), ev.end(), id), ev.end()) << id;
  }
  EXPECT_EQ(report.heads[0].flagged_slots, 10U);
  EXPECT_EQ(f.tables[0].find(0), nullptr);
}

TEST(CompressionStep, RkvIgnoresSentenceLookup) {
  Fixture a(60);
  Fixture b(60);
  EvictionConfig cfg;
  cfg.budget = 40;
  cfg.method = Method::kRkv;
  const std::vector<SentenceSpan> spans{{0, 0, 9, ThoughtLabel::kExecution, true}};
  std::map<std::size_t, float> lambda{{0, 0.99F}};
  std::map<std::size_t, float> none;
  SentenceContext ca{spans, &lambda, 60, 0};
  SentenceContext cb{spans, &none, 60, 0};
  compression_step(a.cache, a.tables, a.window(8), ca, a.shape, cfg);
  compression_step(b.cache, b.tables, b.window(8), cb, b.shape, cfg);
  EXPECT_TRUE(std::equal(a.cache.heads[0].gs_ids().begin(), a.cache.heads[0].gs_ids().end(),
                         b.cache.heads[0].gs_ids().begin(), b.cache.heads[0].gs_ids().end()));
}
