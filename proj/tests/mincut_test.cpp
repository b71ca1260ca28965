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


#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "sylcut/eval.hpp"
#include "sylcut/mincut.hpp"
#include "sylcut/synth.hpp"

using namespace sylcut;

namespace {

MergeParams params(double sps, double thres) {
  MergeParams p;
  p.sec_per_syllable = sps;
  p.merge_thres = thres;
  return p;
}

SimMatrix two_blocks() {
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(10, 10);
  w.topLeftCorner(5, 5).setOnes();
  w.bottomRightCorner(5, 5).setOnes();
  return SimMatrix::from_weights(w);
}

FeatureSequence seq_of(const FrameMatrix& m, double fr = 50.0) {
  FeatureSequence s;
  s.utt_id = "u";
  s.frames = m;
  s.frame_rate_hz = fr;
  return s;
}

}  // namespace

TEST(ChooseK, ExactDivision) { EXPECT_EQ(choose_k(3.0, params(0.15, 0.3), 150), 20); }

TEST(ChooseK, LowerClamp) { EXPECT_EQ(choose_k(0.05, params(0.15, 0.3), 3), 1); }

TEST(ChooseK, RoundsHalfUp) {
  EXPECT_EQ(choose_k(2.0, params(0.15, 0.3), 100), 13);  // 13.33
  EXPECT_EQ(choose_k(0.25, params(0.1, 0.3), 100), 3);   // 2.5
  EXPECT_EQ(choose_k(0.35, params(0.1, 0.3), 100), 3);   // 0.35 / 0.1 == 3.4999999999999996
}

TEST(ChooseK, UpperClampToFrames) { EXPECT_EQ(choose_k(10.0, params(0.01, 0.3), 50), 50); }

TEST(ChooseK, NonPositiveDurationIsContractViolation) {
  EXPECT_THROW(choose_k(0.0, params(0.15, 0.3), 10), ContractViolation);
}

TEST(NcutDp, TwoPerfectBlocks) {
  const auto sol = ncut_dp(two_blocks(), 2);
  EXPECT_EQ(sol.boundaries, (std::vector<Index>{0, 5, 10}));
  EXPECT_EQ(sol.score, 0.0);
  EXPECT_EQ(sol.k, 2);
}

TEST(NcutDp, SingleSegmentScoresZero) {
  std::mt19937_64 rng(1);
  const auto sm = SimMatrix::from_weights(sylcut::testing::random_symmetric_nonneg(9, rng));
  const auto sol = ncut_dp(sm, 1);
  EXPECT_EQ(sol.boundaries, (std::vector<Index>{0, 9}));
  EXPECT_NEAR(sol.score, 0.0, 1e-12);
}

TEST(NcutDp, KOutOfRangeIsContractViolation) {
  EXPECT_THROW(ncut_dp(two_blocks(), 0), ContractViolation);
  EXPECT_THROW(ncut_dp(two_blocks(), 11), ContractViolation);
}

TEST(NcutDp, ZeroVolumeIntervalCostsNothing) {
  // frames 3 and 4 have all-zero rows: an isolated silent region
  Eigen::MatrixXd w = Eigen::MatrixXd::Ones(6, 6);
  w.row(3).setZero();
  w.col(3).setZero();
  w.row(4).setZero();
  w.col(4).setZero();
  const auto sm = SimMatrix::from_weights(w);
  EXPECT_EQ(segment_cost(sm, 3, 5), 0.0);
  const auto sol = ncut_dp(sm, 3);
  EXPECT_TRUE(std::isfinite(sol.score));
  EXPECT_NEAR(sol.score, ncut_score(sm, sol.boundaries), 1e-12);
}

TEST(NcutDp, ScoreEqualsRecomputedObjective) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 30; ++trial) {
    const Index n = 5 + static_cast<Index>(rng() % 40);
    const auto sm = SimMatrix::from_weights(sylcut::testing::random_symmetric_nonneg(n, rng));
    const Index k = 1 + static_cast<Index>(rng() % std::min<Index>(n, 8));
    const auto sol = ncut_dp(sm, k);
    ASSERT_EQ(static_cast<Index>(sol.boundaries.size()), k + 1);
    for (std::size_t i = 0; i + 1 < sol.boundaries.size(); ++i) {
      EXPECT_LT(sol.boundaries[i], sol.boundaries[i + 1]);
    }
    double recomputed = 0.0;
    for (std::size_t i = 0; i + 1 < sol.boundaries.size(); ++i) {
      const auto a = sol.boundaries[i], b = sol.boundaries[i + 1];
      recomputed += sylcut::testing::naive_cut(sm.weights(), a, b) /
                    sylcut::testing::naive_vol(sm.weights(), a, b);
    }
    EXPECT_NEAR(sol.score, recomputed, 1e-9 * std::max(1.0, recomputed));
    EXPECT_GE(sol.score, 0.0);
  }
}

TEST(NcutDp, MatchesExhaustiveOn200RandomInstances) {
  std::mt19937_64 rng(2024);
  int checked = 0;
  for (int seed = 0; seed < 200; ++seed) {
    const Index n = 4 + static_cast<Index>(rng() % 9);  // 4..12
    const Index k = 2 + static_cast<Index>(rng() % 3);  // 2..4
    const auto sm = SimMatrix::from_weights(sylcut::testing::random_symmetric_nonneg(n, rng));
    const auto dp = ncut_dp(sm, k);
    const auto ex = ncut_exhaustive(sm, k);
    EXPECT_NEAR(dp.score, ex.score, 1e-9 * std::max(1.0, ex.score)) << "seed " << seed;
    EXPECT_EQ(dp.boundaries, ex.boundaries) << "seed " << seed;
    ++checked;
  }
  EXPECT_EQ(checked, 200);
}

TEST(NcutExhaustive, TwoBlocks) {
  EXPECT_EQ(ncut_exhaustive(two_blocks(), 2).boundaries, (std::vector<Index>{0, 5, 10}));
}

TEST(NcutExhaustive, KEqualsTIsUnique) {
  std::mt19937_64 rng(8);
  const auto sm = SimMatrix::from_weights(sylcut::testing::random_symmetric_nonneg(7, rng));
  EXPECT_EQ(ncut_exhaustive(sm, 7).boundaries, (std::vector<Index>{0, 1, 2, 3, 4, 5, 6, 7}));
  EXPECT_EQ(ncut_dp(sm, 7).boundaries, ncut_exhaustive(sm, 7).boundaries);
}

TEST(NcutExhaustive, RefusesLargeT) {
  std::mt19937_64 rng(8);
  const auto sm = SimMatrix::from_weights(sylcut::testing::random_symmetric_nonneg(21, rng));
  EXPECT_THROW(ncut_exhaustive(sm, 2), ContractViolation);
}

TEST(NcutDp, TiesGoToEarliestSplit) {
  // uniform matrix: [0,1)|[1,4) and [0,3)|[3,4) cost exactly the same
  const auto sm = SimMatrix::from_weights(Eigen::MatrixXd::Ones(4, 4));
  const auto sol = ncut_dp(sm, 2);
  const double s1 = ncut_score(sm, {0, 1, 4});
  const double s3 = ncut_score(sm, {0, 3, 4});
  ASSERT_EQ(s1, s3);
  if (sol.score == s1) {
    EXPECT_EQ(sol.boundaries[1], 1);
  }
  EXPECT_EQ(sol.boundaries, ncut_exhaustive(sm, 2).boundaries);
}

TEST(MergeSegments, IdenticalMeansMerge) {
  FrameMatrix f(4, 2);
  f << 1, 2, 1, 2, 1, 2, 1, 2;
  EXPECT_EQ(merge_segment_frames(f, {0, 2, 4}, params(0.15, 0.9)), (std::vector<Index>{0, 4}));
}

TEST(MergeSegments, ThresholdAboveOneNeverMerges) {
  FrameMatrix f(4, 2);
  f << 1, 2, 1, 2, 1, 2, 1, 2;
  const std::vector<Index> b{0, 1, 2, 3, 4};
  EXPECT_EQ(merge_segment_frames(f, b, params(0.15, 1.1)), b);
}

TEST(MergeSegments, PlantedCentroidCosines) {
  // neighbour cosines 0.95, 0.2, 0.95 built from angles in the plane
  const double a1 = 0.0;
  const double a2 = a1 + std::acos(0.95);
  const double a3 = a2 + std::acos(0.2);
  const double a4 = a3 + std::acos(0.95);
  FrameMatrix f(8, 2);
  const double ang[4] = {a1, a2, a3, a4};
  for (int s = 0; s < 4; ++s) {
    for (int r = 0; r < 2; ++r) {
      f(2 * s + r, 0) = static_cast<float>(std::cos(ang[s]));
      f(2 * s + r, 1) = static_cast<float>(std::sin(ang[s]));
    }
  }
  // direct check of the planted cosines
  auto mean = [&](int a, int b) {
    return Eigen::VectorXd(f.middleRows(a, b - a).cast<double>().colwise().mean().transpose());
  };
  EXPECT_NEAR(sylcut::testing::cosine(mean(0, 2), mean(2, 4)), 0.95, 1e-6);
  EXPECT_NEAR(sylcut::testing::cosine(mean(2, 4), mean(4, 6)), 0.2, 1e-6);
  EXPECT_NEAR(sylcut::testing::cosine(mean(4, 6), mean(6, 8)), 0.95, 1e-6);
  EXPECT_LT(sylcut::testing::cosine(mean(0, 4), mean(4, 8)), 0.5);

  EXPECT_EQ(merge_segment_frames(f, {0, 2, 4, 6, 8}, params(0.15, 0.5)),
            (std::vector<Index>{0, 4, 8}));
}

TEST(MergeSegments, MinusOneThresholdMergesToOneSegment) {
  std::mt19937_64 rng(3);
  std::normal_distribution<float> g;
  FrameMatrix f(30, 4);
  for (Index i = 0; i < f.size(); ++i) f.data()[i] = g(rng);
  std::vector<Index> b;
  for (Index i = 0; i <= 30; i += 3) b.push_back(i);
  EXPECT_EQ(merge_segment_frames(f, b, params(0.15, -1.0)), (std::vector<Index>{0, 30}));
}

TEST(MergeSegments, NeverIncreasesSegmentCount) {
  std::mt19937_64 rng(5);
  std::normal_distribution<float> g;
  std::uniform_real_distribution<double> thr(-1.0, 1.2);
  for (int trial = 0; trial < 50; ++trial) {
    FrameMatrix f(40, 3);
    for (Index i = 0; i < f.size(); ++i) f.data()[i] = g(rng);
    std::vector<Index> b{0};
    while (b.back() < 40) b.push_back(std::min<Index>(40, b.back() + 1 + static_cast<Index>(rng() % 6)));
    const auto out = merge_segment_frames(f, b, params(0.15, thr(rng)));
    EXPECT_LE(out.size(), b.size());
    // merged boundaries are a subset of the input boundaries
    for (Index x : out) EXPECT_NE(std::find(b.begin(), b.end(), x), b.end());
  }
}

TEST(MergeSegments, ZeroNormMeanIsNotMerged) {
  FrameMatrix f(4, 1);
  f << 0, 0, 1, 1;
  EXPECT_EQ(merge_segment_frames(f, {0, 2, 4}, params(0.15, -0.5)), (std::vector<Index>{0, 2, 4}));
}

TEST(MergeSegments, MinSegmentFramesFoldsShortPieces) {
  FrameMatrix f(6, 2);
  f << 1, 0, 1, 0, 1, 0, 0, 1, 0, 1, 0.9f, 0.1f;
  MergeParams p = params(0.15, 1.1);
  p.min_segment_frames = 2;
  // [5,6) is short and folds into its only neighbour
  EXPECT_EQ(merge_segment_frames(f, {0, 3, 5, 6}, p), (std::vector<Index>{0, 3, 6}));
  // [3,4) is short; its left neighbour is orthogonal, its right one identical
  FrameMatrix g(6, 2);
  g << 1, 0, 1, 0, 1, 0, 0, 1, 0, 1, 0, 1;
  EXPECT_EQ(merge_segment_frames(g, {0, 3, 4, 6}, p), (std::vector<Index>{0, 3, 6}));
}

TEST(SegmentUtterance, SingleFrame) {
  FrameMatrix f(1, 3);
  f << 1, 2, 3;
  const auto seg = segment_utterance(seq_of(f), MergeParams{});
  EXPECT_EQ(seg.boundaries_s, (std::vector<double>{0.0, 0.02}));
}

TEST(SegmentUtterance, NoMergeMatchesDpBoundaries) {
  SynthSpec spec;
  spec.n_utts = 3;
  spec.seed = 12;
  const auto corpus = generate(spec);
  for (const auto& seq : corpus.features) {
    const auto tr = segment_utterance_traced(seq, params(0.1, 1.1));
    EXPECT_EQ(tr.merged_frames, tr.oversegmentation.boundaries);
  }
}

TEST(SegmentUtterance, RecoversPlantedBoundaries) {
  SynthSpec spec;
  spec.n_utts = 10;
  spec.seed = 77;
  const auto corpus = generate(spec);
  Index ref = 0, hyp = 0, hit = 0;
  for (const auto& seq : corpus.features) {
    const auto seg = segment_utterance(seq, params(0.05, 0.7));
    const auto& ali = corpus.alignments.at(seq.utt_id);
    const auto s = match_boundaries(interior_reference_boundaries(ali, seq.duration_seconds()),
                                    seg.interior_boundaries(), 2.0 / seq.frame_rate_hz);
    ref += s.n_ref;
    hyp += s.n_hyp;
    hit += s.n_hit;
  }
  EXPECT_GE(BoundaryScore::from_counts(ref, hyp, hit).f1, 0.9);
}

TEST(SegmentUtterance, ScaleInvariant) {
  SynthSpec spec;
  spec.n_utts = 20;
  spec.seed = 5;
  const auto corpus = generate(spec);
  for (const auto& seq : corpus.features) {
    auto scaled = seq;
    scaled.frames *= 2.0f;
    EXPECT_EQ(segment_utterance(seq, params(0.06, 0.6)).boundaries_s,
              segment_utterance(scaled, params(0.06, 0.6)).boundaries_s);
  }
}

TEST(SegmentUtterance, Deterministic) {
  SynthSpec spec;
  spec.n_utts = 2;
  const auto corpus = generate(spec);
  for (const auto& seq : corpus.features) {
    std::ostringstream a, b;
    write_segmentation_tsv(a, segment_utterance(seq, MergeParams{}));
    write_segmentation_tsv(b, segment_utterance(seq, MergeParams{}));
    EXPECT_EQ(a.str(), b.str());
  }
}

TEST(SegmentUtterance, RejectsBadParams) {
  FrameMatrix f = FrameMatrix::Ones(4, 2);
  EXPECT_THROW(segment_utterance(seq_of(f), params(0.0, 0.3)), ValidationError);
}

TEST(Quantile, LinearInterpolation) {
  const std::vector<double> v{4, 1, 3, 2};
  EXPECT_DOUBLE_EQ(quantile(v, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(quantile(v, 1.0), 4.0);
  EXPECT_DOUBLE_EQ(quantile(v, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(quantile(v, 0.25), 1.75);
}

TEST(Attention, MidpointBetweenRuns) {
  std::vector<double> a(50, 0.0);
  for (int t = 10; t < 20; ++t) a[t] = 1.0;
  for (int t = 30; t < 40; ++t) a[t] = 1.0;
  EXPECT_EQ(attention_boundaries(a, 0.5), (std::vector<Index>{0, 25, 50}));
}

TEST(Attention, SingleRunOnlyEdges) {
  std::vector<double> a(30, 0.1);
  for (int t = 5; t < 12; ++t) a[t] = 0.9;
  EXPECT_EQ(attention_boundaries(a, 0.5), (std::vector<Index>{0, 30}));
}

TEST(Attention, ThreeRuns) {
  std::vector<double> a(70, 0.0);
  for (int t = 10; t < 20; ++t) a[t] = 1.0;
  for (int t = 30; t < 44; ++t) a[t] = 2.0;
  for (int t = 50; t < 60; ++t) a[t] = 1.5;
  EXPECT_EQ(attention_boundaries(a, 0.5), (std::vector<Index>{0, 25, 47, 70}));
  const auto seg = segments_from_attention("u", a, 0.5, 50.0);
  EXPECT_DOUBLE_EQ(seg.boundaries_s[1], 0.5);
  EXPECT_DOUBLE_EQ(seg.boundaries_s[2], 0.94);
  EXPECT_DOUBLE_EQ(seg.boundaries_s[3], 1.4);
}

TEST(Attention, AllZeroIsOneSegment) {
  std::vector<double> a(12, 0.0);
  EXPECT_EQ(attention_boundaries(a, 0.5), (std::vector<Index>{0, 12}));
}

TEST(Attention, RejectsNegativeWeights) {
  std::vector<double> a{0.1, -0.2, 0.3};
  EXPECT_THROW(attention_boundaries(a, 0.5), DataError);
}

TEST(Attention, ReadsOneByTFeatureFile) {
  FeatureSequence attn;
  attn.utt_id = "u";
  attn.frames = FrameMatrix::Zero(1, 50);
  for (int t = 10; t < 20; ++t) attn.frames(0, t) = 1.0f;
  for (int t = 30; t < 40; ++t) attn.frames(0, t) = 1.0f;
  attn.frame_rate_hz = 50.0;
  const auto seg = segments_from_attention(attn, 0.5);
  EXPECT_EQ(seg.boundaries_s, (std::vector<double>{0.0, 0.5, 1.0}));
}
