// Copyright 2026 The SkipKV Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "skipkv/trace.hpp"

namespace skipkv {

using TokenSet = std::set<std::string>;

enum class ThoughtLabel { kExecution, kNonExecution };

const char* to_string(ThoughtLabel label);

/// Inclusive token span [begin, end] of one sentence.
struct SentenceSpan {
  std::size_t index = 0;
  std::size_t begin = 0;
  std::size_t end = 0;
  ThoughtLabel label = ThoughtLabel::kExecution;
  bool closed = false;

  std::size_t length() const { return end - begin + 1; }
  bool operator==(const SentenceSpan&) const = default;
};

/// {"\n", ".\n", ")\n", "\n\n", ".\n\n", ")\n\n"}
TokenSet default_delimiters();
/// {"Wait", "Alternatively", "again"}
TokenSet default_keywords();

/// Splits `texts` into spans; a token equal to any delimiter closes the span it
/// ends. Indices are offset by `base` so callers can express spans in their own
/// coordinate system. Labels are left as kExecution.
std::vector<SentenceSpan> segment(std::span<const std::string> texts, const TokenSet& delimiters,
                                  std::size_t base = 0);

/// Segments the generated region of `tokens` (positions >= prefill_len) in
/// token-stream coordinates, labelling each span.
std::vector<SentenceSpan> segment(const TokenStream& tokens, const TokenSet& delimiters,
                                  const TokenSet& keywords);

/// kNonExecution iff some token text in the span contains a keyword
/// (case-sensitive substring). `texts` is indexed in the span's coordinates.
ThoughtLabel label(const SentenceSpan& span, std::span<const std::string> texts,
                   const TokenSet& keywords);

/// Streaming form of segment + label used by the decode loop.
class IncrementalSegmenter {
 public:
  IncrementalSegmenter(TokenSet delimiters, TokenSet keywords, std::size_t base);

  /// Feeds the next token; returns the span it closes, if any.
  std::optional<SentenceSpan> push(const std::string& text);

  const std::vector<SentenceSpan>& closed() const { return closed_; }
  /// The trailing unterminated span, if any tokens are pending.
  std::optional<SentenceSpan> open_span() const;
  std::size_t nonexecution_count() const { return nonexecution_; }
  std::size_t next_position() const { return next_; }

 private:
  TokenSet delimiters_;
  TokenSet keywords_;
  std::size_t next_;
  std::size_t open_begin_;
  bool open_has_keyword_ = false;
  std::size_t nonexecution_ = 0;
  std::vector<SentenceSpan> closed_;
};

}  // namespace skipkv
