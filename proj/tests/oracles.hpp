// Copyright 2026 The SkipKV Authors
// SPDX-License-Identifier: Apache-2.0

// Brute-force reference implementations used only by tests. None of these
// call into the library's scoring, selection, range or batching code.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <utility>
#include <vector>

namespace oracle {

using Matrix = std::vector<std::vector<double>>;

inline std::vector<double> softmax_masked(const std::vector<double>& logits,
                                          const std::vector<bool>& valid) {
  std::vector<double> out(logits.size(), 0.0);
  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < logits.size(); ++j) {
    if (valid[j]) peak = std::max(peak, logits[j]);
  }
  double z = 0.0;
  for (std::size_t j = 0; j < logits.size(); ++j) {
    if (valid[j]) {
      out[j] = std::exp(logits[j] - peak);
      z += out[j];
    }
  }
  for (double& v : out) v /= z;
  return out;
}

// q[head][row][c], k[head][slot][c]; valid[kv_head][slot].
inline Matrix importance(const std::vector<Matrix>& q, const std::vector<Matrix>& k,
                         const std::vector<std::vector<bool>>& valid) {
  const std::size_t hq = q.size();
  const std::size_t hk = k.size();
  const std::size_t n = hq / hk;
  const std::size_t alpha = q[0].size();
  const std::size_t slots = k[0].size();
  const std::size_t d = k[0].empty() ? 0 : k[0][0].size();

  // A[i] is alpha x slots for every query head i.
  std::vector<Matrix> attn(hq, Matrix(alpha, std::vector<double>(slots)));
  for (std::size_t i = 0; i < hq; ++i) {
    const std::size_t g = i / n;
    for (std::size_t r = 0; r < alpha; ++r) {
      std::vector<double> logits(slots);
      for (std::size_t j = 0; j < slots; ++j) {
        double dot = 0.0;
        for (std::size_t c = 0; c < d; ++c) dot += q[i][r][c] * k[g][j][c];
        logits[j] = dot / std::sqrt(static_cast<double>(d));
      }
      attn[i][r] = softmax_masked(logits, valid[g]);
    }
  }
  Matrix out(hk, std::vector<double>(slots, 0.0));
  for (std::size_t h = 0; h < hk; ++h) {
    for (std::size_t r = 0; r < alpha; ++r) {
      std::vector<double> pooled(slots, -std::numeric_limits<double>::infinity());
      for (std::size_t i = h * n; i < h * n + n; ++i) {
        for (std::size_t j = 0; j < slots; ++j) pooled[j] = std::max(pooled[j], attn[i][r][j]);
      }
      const auto dist = softmax_masked(pooled, valid[h]);
      for (std::size_t j = 0; j < slots; ++j) out[h][j] += dist[j] / static_cast<double>(alpha);
    }
  }
  return out;
}

// keys[slot][c] of one head.
inline std::vector<double> redundancy(const Matrix& keys, const std::vector<bool>& valid,
                                      double eps) {
  const std::size_t n = keys.size();
  Matrix unit(n);
  for (std::size_t j = 0; j < n; ++j) {
    double norm = 0.0;
    for (double v : keys[j]) norm += valid[j] ? v * v : 0.0;
    norm = std::sqrt(norm);
    for (double v : keys[j]) unit[j].push_back(valid[j] ? v / (norm + eps) : 0.0);
  }
  std::vector<double> col(n, 0.0);
  std::size_t rows = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!valid[i]) continue;
    ++rows;
    std::vector<double> logits(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t c = 0; c < unit[i].size(); ++c) logits[j] += unit[i][c] * unit[j][c];
    }
    const auto p = softmax_masked(logits, valid);
    for (std::size_t j = 0; j < n; ++j) col[j] += p[j];
  }
  if (rows > 0) {
    for (double& v : col) v /= static_cast<double>(rows);
  }
  return col;
}

// O(N^2) survivor selection: an unprotected slot survives when fewer than
// (budget - |protected|) unprotected slots beat it. j beats i when its score is
// higher, or equal with a higher index.
inline std::vector<std::size_t> survivors(const std::vector<float>& scores, std::size_t budget,
                                          const std::vector<std::size_t>& protected_slots) {
  const std::size_t n = scores.size();
  if (n <= budget) {
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), 0);
    return all;
  }
  std::vector<bool> prot(n, false);
  for (auto p : protected_slots) prot[p] = true;
  const std::size_t free_slots = budget - protected_slots.size();
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < n; ++i) {
    if (prot[i]) {
      out.push_back(i);
      continue;
    }
    std::size_t beaten_by = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i || prot[j]) continue;
      if (scores[j] > scores[i] || (scores[j] == scores[i] && j > i)) ++beaten_by;
    }
    if (beaten_by < free_slots) out.push_back(i);
  }
  return out;
}

struct Span {
  std::size_t index, begin, end;
};

// sentence -> (first slot, last slot) holding one of its tokens.
inline std::map<std::size_t, std::pair<std::size_t, std::size_t>> provenance_ranges(
    const std::vector<std::size_t>& slot_ids, const std::vector<Span>& spans) {
  std::map<std::size_t, std::pair<std::size_t, std::size_t>> out;
  for (const auto& s : spans) {
    for (std::size_t slot = 0; slot < slot_ids.size(); ++slot) {
      if (slot_ids[slot] < s.begin || slot_ids[slot] > s.end) continue;
      auto it = out.find(s.index);
      if (it == out.end()) {
        out[s.index] = {slot, slot};
      } else {
        it->second.second = slot;
      }
    }
  }
  return out;
}

inline std::size_t padding_of(const std::vector<std::size_t>& lens) {
  const std::size_t top = *std::max_element(lens.begin(), lens.end());
  std::size_t pad = 0;
  for (auto l : lens) pad += top - l;
  return pad;
}

namespace detail {

inline void partitions(const std::vector<std::size_t>& lens, std::vector<bool>& used,
                       std::size_t full_left, std::size_t short_left, std::size_t bs,
                       std::size_t short_size, std::size_t acc, std::size_t& best) {
  auto first = std::find(used.begin(), used.end(), false);
  if (first == used.end()) {
    best = std::min(best, acc);
    return;
  }
  const auto anchor = static_cast<std::size_t>(first - used.begin());
  used[anchor] = true;
  auto try_size = [&](std::size_t size, std::size_t f, std::size_t s) {
    // choose size - 1 partners among unused indices > anchor
    std::vector<std::size_t> pool;
    for (std::size_t i = anchor + 1; i < lens.size(); ++i) {
      if (!used[i]) pool.push_back(i);
    }
    if (pool.size() < size - 1) return;
    std::vector<bool> pick(pool.size(), false);
    std::fill(pick.begin(), pick.begin() + static_cast<std::ptrdiff_t>(size - 1), true);
    do {
      std::vector<std::size_t> group{lens[anchor]};
      for (std::size_t p = 0; p < pool.size(); ++p) {
        if (pick[p]) {
          group.push_back(lens[pool[p]]);
          used[pool[p]] = true;
        }
      }
      partitions(lens, used, f, s, bs, short_size, acc + padding_of(group), best);
      for (std::size_t p = 0; p < pool.size(); ++p) {
        if (pick[p]) used[pool[p]] = false;
      }
    } while (std::prev_permutation(pick.begin(), pick.end()));
  };
  if (full_left > 0) try_size(bs, full_left - 1, short_left);
  if (short_left > 0) try_size(short_size, full_left, short_left - 1);
  used[anchor] = false;
}

}  // namespace detail

// Minimum total padding over every split into floor(n/bs) batches of bs plus
// one batch of n % bs.
inline std::size_t min_padding(const std::vector<std::size_t>& lens, std::size_t bs) {
  std::vector<bool> used(lens.size(), false);
  std::size_t best = std::numeric_limits<std::size_t>::max();
  const std::size_t short_size = lens.size() % bs;
  detail::partitions(lens, used, lens.size() / bs, short_size > 0 ? 1 : 0, bs, short_size, 0,
                     best);
  return best;
}

}  // namespace oracle
