// Copyright 2026 The SkipKV Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "skipkv/segmenter.hpp"
#include "skipkv/trace.hpp"
#include "test_util.hpp"

using namespace skipkv;

namespace {

std::vector<std::string> texts(std::initializer_list<const char*> items) {
  return {items.begin(), items.end()};
}

}  // namespace

TEST(Segmenter, DelimitersCloseSpans) {
  const auto t = texts({"A", ".\n", "B", "\n"});
  const auto spans = segment(t, default_delimiters());
  ASSERT_EQ(spans.size(), 2U);
  EXPECT_EQ(spans[0].begin, 0U);
  EXPECT_EQ(spans[0].end, 1U);
  EXPECT_TRUE(spans[0].closed);
  EXPECT_EQ(spans[1].begin, 2U);
  EXPECT_EQ(spans[1].end, 3U);
  EXPECT_TRUE(spans[1].closed);
}

TEST(Segmenter, EmptyStreamGivesNoSpans) {
  EXPECT_TRUE(segment(std::vector<std::string>{}, default_delimiters()).empty());
}

TEST(Segmenter, TrailingRunIsUnclosed) {
  const auto spans = segment(texts({"x", "y"}), default_delimiters());
  ASSERT_EQ(spans.size(), 1U);
  EXPECT_EQ(spans[0].begin, 0U);
  EXPECT_EQ(spans[0].end, 1U);
  EXPECT_FALSE(spans[0].closed);
}

TEST(Segmenter, EmptyDelimiterSetIsRejected) {
  EXPECT_SKIPKV_ERROR(segment(texts({"a"}), TokenSet{}), ErrorCode::kInvalidArgument);
}

TEST(Segmenter, DefaultSetsAreTheNewlineAndReflectionMarkers) {
  EXPECT_EQ(default_delimiters(), (TokenSet{"\n", ".\n", ")\n", "\n\n", ".\n\n", ")\n\n"}));
  EXPECT_EQ(default_keywords(), (TokenSet{"Wait", "Alternatively", "again"}));
}

TEST(Segmenter, KeywordsMarkNonExecution) {
  const auto kw = default_keywords();
  const auto wait = texts({"Wait", ",", "check", "\n"});
  EXPECT_EQ(label({0, 0, 3, ThoughtLabel::kExecution, true}, wait, kw),
            ThoughtLabel::kNonExecution);
  const auto plain = texts({"compute", " 6", "+", "9", "i", "\n"});
  EXPECT_EQ(label({0, 0, 5, ThoughtLabel::kExecution, true}, plain, kw),
            ThoughtLabel::kExecution);
  const auto alt = texts({"so", " Alternatively", "\n"});
  EXPECT_EQ(label({0, 0, 2, ThoughtLabel::kExecution, true}, alt, kw),
            ThoughtLabel::kNonExecution);
}

TEST(Segmenter, KeywordMatchIsCaseSensitiveSubstring) {
  const auto kw = default_keywords();
  EXPECT_EQ(label({0, 0, 0, ThoughtLabel::kExecution, true}, texts({"wait"}), kw),
            ThoughtLabel::kExecution);
  EXPECT_EQ(label({0, 0, 0, ThoughtLabel::kExecution, true}, texts({"Waiting"}), kw),
            ThoughtLabel::kNonExecution);
  EXPECT_EQ(label({0, 0, 0, ThoughtLabel::kExecution, true}, texts({"try again"}), kw),
            ThoughtLabel::kNonExecution);
}

TEST(Segmenter, StreamSegmentationSkipsPrompt) {
  TokenStream s;
  s.token_texts = texts({"p", "\n", "a", "\n", "Wait", "b", "\n", "c"});
  s.token_ids.assign(s.token_texts.size(), 1);
  s.prefill_len = 2;
  s.max_gen_len = 6;
  const auto spans = segment(s, default_delimiters(), default_keywords());
  ASSERT_EQ(spans.size(), 3U);
  EXPECT_EQ(spans[0].begin, 2U);
  EXPECT_EQ(spans[0].end, 3U);
  EXPECT_EQ(spans[0].label, ThoughtLabel::kExecution);
  EXPECT_EQ(spans[1].begin, 4U);
  EXPECT_EQ(spans[1].end, 6U);
  EXPECT_EQ(spans[1].label, ThoughtLabel::kNonExecution);
  EXPECT_FALSE(spans[2].closed);
}

TEST(Segmenter, IncrementalMatchesBatch) {
  const auto t = texts({"a", "Wait", "\n", "b", "c", ".\n", "again", ")\n\n", "d"});
  IncrementalSegmenter inc(default_delimiters(), default_keywords(), 10);
  std::size_t closed = 0;
  for (const auto& tok : t) {
    if (inc.push(tok)) {
      ++closed;
    }
  }
  const auto batch = segment(t, default_delimiters(), 10);
  ASSERT_EQ(closed, 3U);
  ASSERT_EQ(inc.closed().size(), 3U);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(inc.closed()[i].begin, batch[i].begin);
    EXPECT_EQ(inc.closed()[i].end, batch[i].end);
    EXPECT_EQ(inc.closed()[i].index, i);
  }
  EXPECT_EQ(inc.nonexecution_count(), 2U);
  ASSERT_TRUE(inc.open_span().has_value());
  EXPECT_EQ(inc.open_span()->begin, 18U);
  EXPECT_FALSE(inc.open_span()->closed);
}
