// Copyright 2026 The sylcut Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#pragma once

// K-way normalized-cut segmentation of a frame similarity matrix, restricted
// to contiguous partitions, plus the oversegment-then-merge refinement and
// the attention-run segmenter.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "sylcut/error.hpp"
#include "sylcut/featio.hpp"
#include "sylcut/ssm.hpp"

namespace sylcut {

struct MergeParams {
  double sec_per_syllable = 0.15;
  /// Adjacent segments merge while their mean-feature cosine is >= this.
  double merge_thres = 0.3;
  Index min_segment_frames = 1;
};

inline void validate(const MergeParams& p) {
  if (!(p.sec_per_syllable > 0.0)) {
    throw ValidationError("sec_per_syllable must be positive");
  }
  if (p.min_segment_frames < 1) {
    throw ValidationError("min_segment_frames must be >= 1");
  }
  if (std::isnan(p.merge_thres)) throw ValidationError("merge_thres is NaN");
}

struct NcutSolution {
  std::vector<Index> boundaries;  // 0 = b_0 < ... < b_K = T
  double score = 0.0;
  Index k = 0;
};

/// K = round-half-up(duration / sec_per_syllable), clamped to [1, T].
inline Index choose_k(double duration_s, const MergeParams& p, Index t_frames) {
  detail::require(duration_s > 0.0, "choose_k: duration must be positive");
  detail::require(t_frames >= 1, "choose_k: need at least one frame");
  const double raw = std::floor(duration_s / p.sec_per_syllable + 0.5);
  if (!(raw >= 1.0)) return 1;
  if (raw >= static_cast<double>(t_frames)) return t_frames;
  return static_cast<Index>(raw);
}

/// cut/vol of one candidate segment. A zero-volume interval costs 0 when its
/// cut is also 0 and +inf otherwise.
inline double segment_cost(const SimMatrix& sm, Index a, Index b) {
  const CutVol cv = cut_and_vol(sm, a, b);
  if (cv.vol > 0.0) return cv.cut / cv.vol;
  return cv.cut == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
}

/// Sum of segment costs, accumulated left to right.
inline double ncut_score(const SimMatrix& sm, const std::vector<Index>& boundaries) {
  double score = 0.0;
  for (std::size_t i = 0; i + 1 < boundaries.size(); ++i) {
    score += segment_cost(sm, boundaries[i], boundaries[i + 1]);
  }
  return score;
}

/// Exact minimizer of Ncut_k over contiguous k-way partitions, O(k T^2).
///   dp[j][t] = min_{s<t} dp[j-1][s] + cost([s, t))
/// Ties go to the earliest split point s.
inline NcutSolution ncut_dp(const SimMatrix& sm, Index k) {
  const Index n = sm.size();
  detail::require(k >= 1 && k <= n, "ncut_dp: need 1 <= k <= T");
  constexpr double kInf = std::numeric_limits<double>::infinity();

  // Packed lower triangle: cost of [s, t) at t*(t-1)/2 + s, 0 <= s < t <= T.
  std::vector<double> cost(static_cast<std::size_t>(n) * static_cast<std::size_t>(n + 1) / 2);
  for (Index t = 1; t <= n; ++t) {
    double* row = cost.data() + static_cast<std::size_t>(t) * static_cast<std::size_t>(t - 1) / 2;
    for (Index s = 0; s < t; ++s) row[s] = segment_cost(sm, s, t);
  }
  auto row_of = [&](Index t) {
    return cost.data() + static_cast<std::size_t>(t) * static_cast<std::size_t>(t - 1) / 2;
  };

  std::vector<double> prev(static_cast<std::size_t>(n + 1), kInf);
  std::vector<double> cur(static_cast<std::size_t>(n + 1), kInf);
  // back[j-1][t]: split point chosen for dp[j][t]
  std::vector<std::vector<std::int32_t>> back(static_cast<std::size_t>(k));
  for (Index t = 1; t <= n - (k - 1); ++t) prev[static_cast<std::size_t>(t)] = row_of(t)[0];
  back[0].assign(static_cast<std::size_t>(n + 1), 0);

  for (Index j = 2; j <= k; ++j) {
    auto& bp = back[static_cast<std::size_t>(j - 1)];
    bp.assign(static_cast<std::size_t>(n + 1), -1);
    std::fill(cur.begin(), cur.end(), kInf);
    const Index t_hi = n - (k - j);
    for (Index t = j; t <= t_hi; ++t) {
      const double* row = row_of(t);
      double best = kInf;
      Index best_s = j - 1;
      for (Index s = j - 1; s < t; ++s) {
        const double v = prev[static_cast<std::size_t>(s)] + row[s];
        if (v < best) {
          best = v;
          best_s = s;
        }
      }
      cur[static_cast<std::size_t>(t)] = best;
      bp[static_cast<std::size_t>(t)] = static_cast<std::int32_t>(best_s);
    }
    std::swap(prev, cur);
  }

  NcutSolution sol;
  sol.k = k;
  sol.score = prev[static_cast<std::size_t>(n)];
  sol.boundaries.assign(static_cast<std::size_t>(k + 1), 0);
  sol.boundaries[static_cast<std::size_t>(k)] = n;
  Index t = n;
  for (Index j = k; j >= 2; --j) {
    t = back[static_cast<std::size_t>(j - 1)][static_cast<std::size_t>(t)];
    sol.boundaries[static_cast<std::size_t>(j - 1)] = t;
  }
  return sol;
}

/// Brute-force minimizer over every contiguous k-way partition. Test oracle
/// for ncut_dp; refuses T > 20. Among equal scores it keeps the partition
/// ncut_dp would return (smallest last boundary, then the one before, ...).
inline NcutSolution ncut_exhaustive(const SimMatrix& sm, Index k) {
  const Index n = sm.size();
  detail::require(n <= 20, "ncut_exhaustive: refusing T > 20");
  detail::require(k >= 1 && k <= n, "ncut_exhaustive: need 1 <= k <= T");

  std::vector<Index> cuts(static_cast<std::size_t>(k + 1));
  cuts.front() = 0;
  cuts.back() = n;
  for (Index i = 1; i < k; ++i) cuts[static_cast<std::size_t>(i)] = i;

  NcutSolution best;
  best.k = k;
  best.score = std::numeric_limits<double>::infinity();
  bool have = false;
  auto reverse_lex_less = [](const std::vector<Index>& a, const std::vector<Index>& b) {
    return std::lexicographical_compare(a.rbegin(), a.rend(), b.rbegin(), b.rend());
  };
  while (true) {
    const double score = ncut_score(sm, cuts);
    if (!have || score < best.score ||
        (score == best.score && reverse_lex_less(cuts, best.boundaries))) {
      best.score = score;
      best.boundaries = cuts;
      have = true;
    }
    // next combination of interior cuts from {1..n-1}
    Index i = k - 1;
    while (i >= 1 && cuts[static_cast<std::size_t>(i)] == n - k + i) --i;
    if (i < 1) break;
    ++cuts[static_cast<std::size_t>(i)];
    for (Index j = i + 1; j < k; ++j) {
      cuts[static_cast<std::size_t>(j)] = cuts[static_cast<std::size_t>(j - 1)] + 1;
    }
  }
  return best;
}

namespace detail {

inline double cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return -1.0;
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

}  // namespace detail

/// Greedy merge of adjacent segments over frame boundaries. Each round the
/// adjacent pair whose mean features have the highest cosine (lowest index
/// on ties) is merged if that cosine is >= merge_thres. Zero-norm means
/// count as cosine -1. Segments still shorter than min_segment_frames are
/// then folded into their more similar neighbour, leftmost first.
inline std::vector<Index> merge_segment_frames(const FrameMatrix& frames,
                                               const std::vector<Index>& boundaries,
                                               const MergeParams& p) {
  validate(p);
  detail::require(boundaries.size() >= 2 && boundaries.front() == 0 &&
                      boundaries.back() == frames.rows(),
                  "merge_segment_frames: boundaries must span [0, T]");
  struct Piece {
    Index start;
    Index end;
    Eigen::VectorXd sum;  // cosine of sums == cosine of means
  };
  std::vector<Piece> pieces;
  pieces.reserve(boundaries.size() - 1);
  for (std::size_t i = 0; i + 1 < boundaries.size(); ++i) {
    const Index a = boundaries[i];
    const Index b = boundaries[i + 1];
    detail::require(a < b, "merge_segment_frames: empty segment");
    Eigen::VectorXd sum = frames.middleRows(a, b - a).cast<double>().colwise().sum().transpose();
    pieces.push_back({a, b, std::move(sum)});
  }

  std::vector<double> sim;  // sim[i] = cosine(pieces[i], pieces[i+1])
  auto refresh = [&](std::size_t i) {
    if (i + 1 < pieces.size()) sim[i] = detail::cosine(pieces[i].sum, pieces[i + 1].sum);
  };
  sim.resize(pieces.size() > 0 ? pieces.size() - 1 : 0);
  for (std::size_t i = 0; i < sim.size(); ++i) refresh(i);

  auto merge_at = [&](std::size_t i) {
    pieces[i].end = pieces[i + 1].end;
    pieces[i].sum += pieces[i + 1].sum;
    pieces.erase(pieces.begin() + static_cast<std::ptrdiff_t>(i) + 1);
    sim.erase(sim.begin() + static_cast<std::ptrdiff_t>(i));
    if (i > 0) refresh(i - 1);
    refresh(i);
  };

  while (!sim.empty()) {
    const auto it = std::max_element(sim.begin(), sim.end());
    if (!(*it >= p.merge_thres)) break;
    merge_at(static_cast<std::size_t>(it - sim.begin()));
  }

  while (pieces.size() > 1) {
    std::size_t short_i = pieces.size();
    for (std::size_t i = 0; i < pieces.size(); ++i) {
      if (pieces[i].end - pieces[i].start < p.min_segment_frames) {
        short_i = i;
        break;
      }
    }
    if (short_i == pieces.size()) break;
    if (short_i == 0) {
      merge_at(0);
    } else if (short_i + 1 == pieces.size()) {
      merge_at(short_i - 1);
    } else {
      merge_at(sim[short_i - 1] >= sim[short_i] ? short_i - 1 : short_i);
    }
  }

  std::vector<Index> out;
  out.reserve(pieces.size() + 1);
  out.push_back(0);
  for (const auto& pc : pieces) out.push_back(pc.end);
  return out;
}

inline Segmentation merge_segments(const FeatureSequence& seq, const NcutSolution& sol,
                                   const MergeParams& p) {
  return segmentation_from_frames(seq.utt_id, merge_segment_frames(seq.frames, sol.boundaries, p),
                                  seq.frame_rate_hz);
}

/// Every stage of one utterance's segmentation, for inspection.
struct SegmentationTrace {
  Index k = 0;
  NcutSolution oversegmentation;
  std::vector<Index> merged_frames;
  Segmentation result;
};

inline SegmentationTrace segment_utterance_traced(const FeatureSequence& seq,
                                                  const MergeParams& p,
                                                  const SsmOptions& ssm_opts = {}) {
  validate(p);
  const SimMatrix sm = compute_ssm(seq, ssm_opts);
  SegmentationTrace tr;
  tr.k = choose_k(seq.duration_seconds(), p, seq.num_frames());
  tr.oversegmentation = ncut_dp(sm, tr.k);
  tr.merged_frames = merge_segment_frames(seq.frames, tr.oversegmentation.boundaries, p);
  tr.result = segmentation_from_frames(seq.utt_id, tr.merged_frames, seq.frame_rate_hz);
  return tr;
}

/// compute_ssm -> choose_k -> ncut_dp -> merge_segments.
inline Segmentation segment_utterance(const FeatureSequence& seq, const MergeParams& p,
                                      const SsmOptions& ssm_opts = {}) {
  return segment_utterance_traced(seq, p, ssm_opts).result;
}

// ---------------------------------------------------------------------------
// Attention runs

/// Linear-interpolation quantile (the usual "type 7" definition).
inline double quantile(std::span<const double> values, double q) {
  detail::require(!values.empty(), "quantile: empty input");
  detail::require(q >= 0.0 && q <= 1.0, "quantile: q must lie in [0, 1]");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return v[lo] + frac * (v[hi] - v[lo]);
}

/// Frames whose weight exceeds the q-quantile form maximal runs; a boundary
/// goes at floor((end of run i + start of run i+1) / 2). Utterance edges
/// close the first and last segment.
inline std::vector<Index> attention_boundaries(std::span<const double> attn,
                                               double threshold_quantile) {
  detail::require(!attn.empty(), "attention_boundaries: empty attention");
  for (double a : attn) {
    if (!std::isfinite(a) || a < 0.0) {
      throw DataError("attention weights must be finite and non-negative");
    }
  }
  const auto n = static_cast<Index>(attn.size());
  std::vector<Index> out{0};
  const bool all_zero = std::all_of(attn.begin(), attn.end(), [](double a) { return a == 0.0; });
  if (!all_zero) {
    const double thr = quantile(attn, threshold_quantile);
    Index prev_end = -1;
    Index t = 0;
    while (t < n) {
      if (!(attn[static_cast<std::size_t>(t)] > thr)) {
        ++t;
        continue;
      }
      const Index start = t;
      while (t < n && attn[static_cast<std::size_t>(t)] > thr) ++t;
      if (prev_end >= 0) out.push_back((prev_end + start) / 2);
      prev_end = t;
    }
  }
  out.push_back(n);
  return out;
}

inline Segmentation segments_from_attention(std::string utt_id, std::span<const double> attn,
                                            double threshold_quantile, double frame_rate_hz) {
  return segmentation_from_frames(std::move(utt_id),
                                  attention_boundaries(attn, threshold_quantile), frame_rate_hz);
}

/// Reads the attention from a 1 x T (or T x 1) FEAT1 sequence.
inline Segmentation segments_from_attention(const FeatureSequence& attn,
                                            double threshold_quantile) {
  validate(attn);
  if (attn.num_frames() != 1 && attn.dim() != 1) {
    throw ValidationError("attention file for '" + attn.utt_id + "' must be 1 x T");
  }
  const Eigen::VectorXd w = attn.frames.reshaped<Eigen::RowMajor>().cast<double>();
  return segments_from_attention(attn.utt_id, std::span<const double>(w.data(), static_cast<std::size_t>(w.size())),
                                 threshold_quantile, attn.frame_rate_hz);
}

}  // namespace sylcut
