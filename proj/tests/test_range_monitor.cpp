// Copyright 2026 The SkipKV Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "skipkv/errors.hpp"
#include "skipkv/range_monitor.hpp"
#include "skipkv/rng.hpp"

using namespace skipkv;

namespace {

SentenceSpan closed(std::size_t index, std::size_t begin, std::size_t end) {
  return {index, begin, end, ThoughtLabel::kExecution, true};
}

}  // namespace

TEST(InitRanges, IdentityForSpansInsideCache) {
  RangeTable t;
  t.gs_spans = {closed(0, 3, 7)};
  init_ranges(t, 20);
  ASSERT_EQ(t.cs_ranges.size(), 1U);
  EXPECT_EQ(t.cs_ranges[0], (CacheRange{0, 3, 7}));
}

TEST(InitRanges, SpanPastCacheIsNotAdded) {
  RangeTable t;
  t.gs_spans = {closed(0, 3, 25)};
  init_ranges(t, 20);
  EXPECT_TRUE(t.cs_ranges.empty());
}

TEST(InitRanges, NoSpansNoRanges) {
  RangeTable t;
  init_ranges(t, 20);
  EXPECT_TRUE(t.cs_ranges.empty());
}

TEST(InitRanges, UnclosedSpanNeverEnters) {
  RangeTable t;
  t.gs_spans = {closed(0, 0, 4), {1, 5, 9, ThoughtLabel::kExecution, false}};
  update_ranges(t, 10, 10);
  ASSERT_EQ(t.cs_ranges.size(), 1U);
  EXPECT_EQ(t.cs_ranges[0].sentence, 0U);
}

TEST(AppendRanges, ResidualArithmetic) {
  // l_gs=20, l_cs=14, previous e_cs=9, new span ends at gs 16: residual 4.
  RangeTable t;
  t.gs_spans = {closed(0, 2, 9), closed(1, 10, 16)};
  t.cs_ranges = {{0, 2, 9}};
  t.processed = 1;
  t.frontier = 10;
  t.remapped = true;
  append_ranges(t, 20, 14);
  ASSERT_EQ(t.cs_ranges.size(), 2U);
  EXPECT_EQ(t.cs_ranges[1], (CacheRange{1, 10, 10}));
}

TEST(AppendRanges, NoResidualEndsAtCacheLength) {
  RangeTable t;
  t.gs_spans = {closed(0, 0, 3), closed(1, 4, 12)};
  t.cs_ranges = {{0, 0, 1}};
  t.processed = 1;
  t.frontier = 2;
  t.remapped = true;
  append_ranges(t, 12, 7);
  ASSERT_EQ(t.cs_ranges.size(), 2U);
  EXPECT_EQ(t.cs_ranges[1].end, 7U);
}

TEST(AppendRanges, InvertedRangeIsSkipped) {
  RangeTable t;
  t.gs_spans = {closed(0, 0, 5), closed(1, 6, 8)};
  t.cs_ranges = {{0, 0, 4}};
  t.processed = 1;
  t.frontier = 5;
  t.remapped = true;
  // residual 20 - 8 = 12, e = 14 - 12 = 2 < frontier 5
  append_ranges(t, 20, 14);
  EXPECT_EQ(t.cs_ranges.size(), 1U);
}

TEST(Remap, Example) {
  RangeTable t;
  t.cs_ranges = {{0, 2, 6}};
  const std::vector<std::size_t> p{0, 2, 5, 7};
  remap_after_eviction(t, p);
  ASSERT_EQ(t.cs_ranges.size(), 1U);
  EXPECT_EQ(t.cs_ranges[0], (CacheRange{0, 1, 2}));
}

TEST(Remap, IdentitySurvivorsChangeNothing) {
  RangeTable t;
  t.cs_ranges = {{0, 0, 2}, {1, 3, 5}, {2, 6, 9}};
  const auto before = t.cs_ranges;
  std::vector<std::size_t> all(10);
  std::iota(all.begin(), all.end(), 0);
  remap_after_eviction(t, all);
  EXPECT_EQ(t.cs_ranges, before);
}

TEST(Remap, FullyEvictedRangeIsDiscarded) {
  RangeTable t;
  t.cs_ranges = {{0, 0, 2}, {1, 3, 5}};
  const std::vector<std::size_t> p{0, 1, 6};
  remap_after_eviction(t, p);
  ASSERT_EQ(t.cs_ranges.size(), 1U);
  EXPECT_EQ(t.cs_ranges[0].sentence, 0U);
}

TEST(Remap, UnsortedSurvivorsAreRejected) {
  RangeTable t;
  const std::vector<std::size_t> p{3, 1};
  EXPECT_THROW(remap_after_eviction(t, p), Error);
}

TEST(AlignLookup, IdentityMapping) {
  RangeTable t;
  t.gs_spans = {closed(0, 3, 7)};
  t.lookup = {{0, 0.97F}};
  init_ranges(t, 20);
  const auto lookup = align_lookup(t);
  ASSERT_EQ(lookup.size(), 1U);
  EXPECT_EQ(lookup[0], (LookupEntry{3, 7, 0.97F}));
}

TEST(AlignLookup, DiscardedRangeDropsFromLookup) {
  RangeTable t;
  t.gs_spans = {closed(0, 0, 1), closed(1, 2, 4)};
  t.lookup = {{0, 0.99F}};
  init_ranges(t, 5);
  const std::vector<std::size_t> p{2, 3};
  remap_after_eviction(t, p);
  EXPECT_TRUE(align_lookup(t).empty());
}

TEST(AlignLookup, TwoFlaggedSentencesFollowProvenance) {
  // 30 positions, sentences [0,5] [6,11] [12,19] [20,29], first two flagged.
  RangeTable t;
  std::vector<oracle::Span> spans{{0, 0, 5}, {1, 6, 11}, {2, 12, 19}, {3, 20, 29}};
  for (const auto& s : spans) t.gs_spans.push_back(closed(s.index, s.begin, s.end));
  t.lookup = {{0, 0.98F}, {1, 0.96F}};
  update_ranges(t, 30, 30);
  std::vector<std::size_t> ids(30);
  std::iota(ids.begin(), ids.end(), 0);
  const std::vector<std::size_t> p{1, 4, 7, 8, 13, 21, 22, 29};
  remap_after_eviction(t, p);
  std::vector<std::size_t> kept;
  for (auto s : p) kept.push_back(ids[s]);
  const auto want = oracle::provenance_ranges(kept, spans);
  const auto lookup = align_lookup(t);
  ASSERT_EQ(lookup.size(), 2U);
  EXPECT_EQ(lookup[0].begin, want.at(0).first);
  EXPECT_EQ(lookup[0].end, want.at(0).second);
  EXPECT_EQ(lookup[1].begin, want.at(1).first);
  EXPECT_EQ(lookup[1].end, want.at(1).second);
  EXPECT_FLOAT_EQ(lookup[1].lambda, 0.96F);
}

TEST(Audit, DetectsWrongRange) {
  RangeTable t;
  t.gs_spans = {closed(0, 0, 3)};
  t.cs_ranges = {{0, 0, 2}};
  t.processed = 1;
  const std::vector<std::size_t> ids{0, 1, 2, 3};
  EXPECT_EQ(audit_ranges(t, ids).size(), 1U);
  t.cs_ranges[0].end = 3;
  EXPECT_TRUE(audit_ranges(t, ids).empty());
}

TEST(RangeMonitor, RandomizedMultiRoundMatchesProvenance) {
  SplitMix64 rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t start = rng.below(20);
    RangeTable t;
    t.frontier = start;
    std::vector<std::size_t> ids;
    std::vector<oracle::Span> spans;
    std::size_t pos = 0;
    std::size_t open_begin = start;
    for (std::size_t p = 0; p < start; ++p) ids.push_back(pos++);
    const std::size_t rounds = 2 + rng.below(3);
    for (std::size_t round = 0; round < rounds; ++round) {
      const std::size_t grow = 5 + rng.below(40);
      for (std::size_t g = 0; g < grow; ++g) {
        ids.push_back(pos);
        if (rng.below(6) == 0) {
          spans.push_back({spans.size(), open_begin, pos});
          t.gs_spans.push_back(closed(spans.back().index, open_begin, pos));
          open_begin = pos + 1;
        }
        ++pos;
      }
      update_ranges(t, pos, ids.size());
      std::vector<std::size_t> survivors;
      for (std::size_t s = 0; s < ids.size(); ++s) {
        if (rng.below(3) != 0) survivors.push_back(s);
      }
      remap_after_eviction(t, survivors);
      std::vector<std::size_t> kept;
      for (auto s : survivors) kept.push_back(ids[s]);
      ids = kept;
      const auto want = oracle::provenance_ranges(ids, spans);
      ASSERT_EQ(t.cs_ranges.size(), want.size()) << "trial " << trial;
      for (const auto& r : t.cs_ranges) {
        ASSERT_TRUE(want.contains(r.sentence));
        EXPECT_EQ(r.begin, want.at(r.sentence).first);
        EXPECT_EQ(r.end, want.at(r.sentence).second);
      }
    }
  }
}
