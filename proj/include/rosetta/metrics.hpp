// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "rosetta/error.hpp"
#include "rosetta/tokenizer.hpp"

namespace rosetta::metrics {

/// Levenshtein distance with unit costs, two-row DP.
template <typename Seq>
std::size_t edit_distance(const Seq& a, const Seq& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

/// Character error rate; '*' in the prediction never equals a real character.
inline double cer(std::u32string_view pred, std::u32string_view gt) {
  if (gt.empty()) throw EmptyGroundTruth();
  return static_cast<double>(edit_distance(pred, gt)) / static_cast<double>(gt.size());
}

/// Token error rate; <ooc> is an ordinary token here.
inline double ter(const TokenSeq& pred, const TokenSeq& gt) {
  if (gt.empty()) throw EmptyGroundTruth();
  return static_cast<double>(edit_distance(pred, gt)) / static_cast<double>(gt.size());
}

enum class Op { pair, del, ins };

/// One alignment column. `pair` joins pred[p] with gt[g] (match or
/// substitution); `del` leaves gt[g] unpaired; `ins` leaves pred[p] unpaired.
struct AlignStep {
  Op op;
  std::ptrdiff_t p = -1;
  std::ptrdiff_t g = -1;
  friend bool operator==(const AlignStep&, const AlignStep&) = default;
};

/// Minimal-cost alignment of pred against gt, in left-to-right order. The
/// traceback runs from the end and prefers pairing, then deletion, then
/// insertion whenever several moves stay optimal.
inline std::vector<AlignStep> align(const TokenSeq& pred, const TokenSeq& gt) {
  const std::size_t n = pred.size(), m = gt.size();
  std::vector<std::size_t> d((n + 1) * (m + 1));
  auto at = [&](std::size_t i, std::size_t j) -> std::size_t& { return d[i * (m + 1) + j]; };
  for (std::size_t i = 0; i <= n; ++i) at(i, 0) = i;
  for (std::size_t j = 0; j <= m; ++j) at(0, j) = j;
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = 1; j <= m; ++j)
      at(i, j) = std::min({at(i - 1, j - 1) + (pred[i - 1] == gt[j - 1] ? 0 : 1), at(i - 1, j) + 1, at(i, j - 1) + 1});
  std::vector<AlignStep> steps;
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && at(i, j) == at(i - 1, j - 1) + (pred[i - 1] == gt[j - 1] ? 0 : 1)) {
      steps.push_back({Op::pair, static_cast<std::ptrdiff_t>(i - 1), static_cast<std::ptrdiff_t>(j - 1)});
      --i;
      --j;
    } else if (j > 0 && at(i, j) == at(i, j - 1) + 1) {
      steps.push_back({Op::del, -1, static_cast<std::ptrdiff_t>(j - 1)});
      --j;
    } else {
      steps.push_back({Op::ins, static_cast<std::ptrdiff_t>(i - 1), -1});
      --i;
    }
  }
  std::reverse(steps.begin(), steps.end());
  return steps;
}

/// TER after removing ground-truth <ooc> positions and the prediction
/// positions aligned to them; absent when every gt token is <ooc>.
inline std::optional<double> ter_excluding_ooc(const TokenSeq& pred, const TokenSeq& gt, TokenId ooc,
                                               const std::vector<AlignStep>& alignment) {
  TokenSeq gt_kept, pred_kept;
  std::vector<bool> drop_pred(pred.size(), false);
  for (const AlignStep& s : alignment)
    if (s.op == Op::pair && gt[static_cast<std::size_t>(s.g)] == ooc) drop_pred[static_cast<std::size_t>(s.p)] = true;
  for (TokenId t : gt)
    if (t != ooc) gt_kept.push_back(t);
  if (gt_kept.empty()) return std::nullopt;
  for (std::size_t i = 0; i < pred.size(); ++i)
    if (!drop_pred[i]) pred_kept.push_back(pred[i]);
  return ter(pred_kept, gt_kept);
}

inline std::optional<double> ter_excluding_ooc(const TokenSeq& pred, const TokenSeq& gt, TokenId ooc) {
  return ter_excluding_ooc(pred, gt, ooc, align(pred, gt));
}

struct OocCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  OocCounts& operator+=(const OocCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
  friend bool operator==(const OocCounts&, const OocCounts&) = default;
};

inline OocCounts f1_ooc_counts(const TokenSeq& pred, const TokenSeq& gt, TokenId ooc,
                               const std::vector<AlignStep>& alignment) {
  OocCounts c;
  for (const AlignStep& s : alignment) {
    const bool p_ooc = s.p >= 0 && pred[static_cast<std::size_t>(s.p)] == ooc;
    const bool g_ooc = s.g >= 0 && gt[static_cast<std::size_t>(s.g)] == ooc;
    if (p_ooc && g_ooc) {
      ++c.tp;
    } else {
      if (p_ooc) ++c.fp;
      if (g_ooc) ++c.fn;
    }
  }
  return c;
}

inline OocCounts f1_ooc_counts(const TokenSeq& pred, const TokenSeq& gt, TokenId ooc) {
  return f1_ooc_counts(pred, gt, ooc, align(pred, gt));
}

/// F1 from aggregated counts; absent when there is no <ooc> on either side.
inline std::optional<double> f1_score(const OocCounts& c) {
  const std::size_t denom = 2 * c.tp + c.fp + c.fn;
  if (denom == 0) return std::nullopt;
  return 2.0 * static_cast<double>(c.tp) / static_cast<double>(denom);
}

}  // namespace rosetta::metrics
