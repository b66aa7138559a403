// Copyright 2026 The SkipKV Authors
// SPDX-License-Identifier: Apache-2.0

#include "skipkv/segmenter.hpp"

#include <algorithm>

#include "skipkv/errors.hpp"

namespace skipkv {

const char* to_string(ThoughtLabel label) {
  return label == ThoughtLabel::kExecution ? "execution" : "non-execution";
}

TokenSet default_delimiters() { return {"\n", ".\n", ")\n", "\n\n", ".\n\n", ")\n\n"}; }

TokenSet default_keywords() { return {"Wait", "Alternatively", "again"}; }

namespace {

bool has_keyword(const std::string& text, const TokenSet& keywords) {
  return std::any_of(keywords.begin(), keywords.end(),
                     [&](const std::string& k) { return text.find(k) != std::string::npos; });
}

}  // namespace

std::vector<SentenceSpan> segment(std::span<const std::string> texts, const TokenSet& delimiters,
                                  std::size_t base) {
  require(!delimiters.empty(), ErrorCode::kInvalidArgument, "delimiter set must be nonempty");
  std::vector<SentenceSpan> spans;
  std::size_t begin = 0;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (delimiters.contains(texts[i])) {
      spans.push_back({spans.size(), base + begin, base + i, ThoughtLabel::kExecution, true});
      begin = i + 1;
    }
  }
  if (begin < texts.size()) {
    spans.push_back(
        {spans.size(), base + begin, base + texts.size() - 1, ThoughtLabel::kExecution, false});
  }
  return spans;
}

std::vector<SentenceSpan> segment(const TokenStream& tokens, const TokenSet& delimiters,
                                  const TokenSet& keywords) {
  const auto texts = std::span<const std::string>(tokens.token_texts);
  auto spans = segment(texts.subspan(tokens.prefill_len), delimiters, tokens.prefill_len);
  for (auto& span : spans) {
    span.label = label(span, texts, keywords);
  }
  return spans;
}

ThoughtLabel label(const SentenceSpan& span, std::span<const std::string> texts,
                   const TokenSet& keywords) {
  require(span.begin <= span.end && span.end < texts.size(), ErrorCode::kInvalidArgument,
          "span indices outside token stream");
  for (std::size_t i = span.begin; i <= span.end; ++i) {
    if (has_keyword(texts[i], keywords)) {
      return ThoughtLabel::kNonExecution;
    }
  }
  return ThoughtLabel::kExecution;
}

IncrementalSegmenter::IncrementalSegmenter(TokenSet delimiters, TokenSet keywords, std::size_t base)
    : delimiters_(std::move(delimiters)),
      keywords_(std::move(keywords)),
      next_(base),
      open_begin_(base) {
  require(!delimiters_.empty(), ErrorCode::kInvalidArgument, "delimiter set must be nonempty");
}

std::optional<SentenceSpan> IncrementalSegmenter::push(const std::string& text) {
  const std::size_t pos = next_++;
  open_has_keyword_ = open_has_keyword_ || has_keyword(text, keywords_);
  if (!delimiters_.contains(text)) {
    return std::nullopt;
  }
  SentenceSpan span{closed_.size(), open_begin_, pos,
                    open_has_keyword_ ? ThoughtLabel::kNonExecution : ThoughtLabel::kExecution,
                    true};
  if (open_has_keyword_) {
    ++nonexecution_;
  }
  closed_.push_back(span);
  open_begin_ = pos + 1;
  open_has_keyword_ = false;
  return span;
}

std::optional<SentenceSpan> IncrementalSegmenter::open_span() const {
  if (open_begin_ >= next_) {
    return std::nullopt;
  }
  return SentenceSpan{closed_.size(), open_begin_, next_ - 1,
                      open_has_keyword_ ? ThoughtLabel::kNonExecution : ThoughtLabel::kExecution,
                      false};
}

}  // namespace skipkv
