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

#include <atomic>

#include "sylcut/pipeline.hpp"
#include "sylcut/synth.hpp"

using namespace sylcut;

TEST(ParallelFor, VisitsEveryIndexOnce) {
  for (int workers : {1, 2, 4}) {
    std::vector<int> hits(100, 0);
    parallel_for(100, workers, [&](Index i) { ++hits[static_cast<std::size_t>(i)]; });
    EXPECT_EQ(hits, std::vector<int>(100, 1));
  }
}

TEST(ParallelFor, RethrowsWorkerException) {
  EXPECT_THROW(parallel_for(10, 3, [](Index i) {
                 if (i == 7) throw DataError("boom");
               }),
               DataError);
}

TEST(SegmentFeatures, WorkerCountDoesNotChangeOutput) {
  SynthSpec spec;
  spec.n_utts = 6;
  const auto c = generate(spec);
  MergeParams p;
  const auto a = segment_features(c.features, p, {}, 1);
  const auto b = segment_features(c.features, p, {}, 3);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].boundaries_s, b[i].boundaries_s);
}

TEST(Sweep, SinglePointGrid) {
  SynthSpec spec;
  spec.n_utts = 4;
  const auto c = generate(spec);
  const auto r = sweep(c.features, c.alignments, {0.1}, {0.5}, 0.04);
  ASSERT_EQ(r.points.size(), 1u);
  EXPECT_EQ(r.best.sec_per_syllable, 0.1);
  EXPECT_EQ(r.best.merge_thres, 0.5);
  MergeParams p;
  p.sec_per_syllable = 0.1;
  p.merge_thres = 0.5;
  EvalConfig cfg;
  cfg.tolerance_s = 0.04;
  const auto rep = evaluate_corpus(c.alignments, by_utt(segment_features(c.features, p)), cfg);
  EXPECT_EQ(r.best.score.r_value, rep.boundary.r_value);
  EXPECT_EQ(r.best.score.n_hit, rep.boundary.n_hit);
}

TEST(Sweep, DuplicatePointsCollapse) {
  SynthSpec spec;
  spec.n_utts = 3;
  const auto c = generate(spec);
  const auto r = sweep(c.features, c.alignments, {0.1, 0.1}, {0.5, 0.7, 0.5}, 0.04);
  EXPECT_EQ(r.points.size(), 2u);
}

TEST(Sweep, EmptyGridRejected) {
  SynthSpec spec;
  spec.n_utts = 1;
  const auto c = generate(spec);
  EXPECT_THROW(sweep(c.features, c.alignments, {}, {0.5}, 0.04), ValidationError);
}

TEST(Sweep, TiesGoToSmallerThreshold) {
  // thresholds above 1 never merge, so they all score the same
  SynthSpec spec;
  spec.n_utts = 2;
  const auto c = generate(spec);
  const auto r = sweep(c.features, c.alignments, {0.2}, {1.3, 1.1, 1.2}, 0.04);
  ASSERT_EQ(r.points.size(), 3u);
  EXPECT_EQ(r.points[0].score.r_value, r.points[2].score.r_value);
  EXPECT_EQ(r.best.merge_thres, 1.1);
}

TEST(Sweep, BestThresholdLiesInNoiseFreeBand) {
  SynthSpec spec;
  spec.n_utts = 10;
  spec.noise_sigma = 0.0;
  spec.seed = 31;
  const auto c = generate(spec);
  const auto r = sweep(c.features, c.alignments, {0.05}, {-0.5, 0.0, 0.5, 0.7, 0.9, 0.99}, 0.04);
  EXPECT_GT(r.best.merge_thres, c.max_cross_cosine());
  EXPECT_LE(r.best.merge_thres, 1.0);
  EXPECT_EQ(r.best.score.f1, 1.0);
}

TEST(ClusterCorpus, NoiseFreeSynthIsPure) {
  SynthSpec spec;
  spec.n_utts = 20;
  spec.noise_sigma = 0.0;
  spec.seed = 2;
  const auto c = generate(spec);
  MergeParams p;
  p.sec_per_syllable = 0.05;
  p.merge_thres = std::min(0.999, c.max_cross_cosine() + 0.05);
  const auto segs = by_utt(segment_features(c.features, p));
  const auto res = cluster_corpus(c.features, segs, {32, 8, 0, {}});
  const auto rep = evaluate_corpus(c.alignments, res.labeled, {0.04, false});
  EXPECT_EQ(rep.boundary.f1, 1.0);
  ASSERT_TRUE(rep.purity.has_value());
  EXPECT_EQ(rep.purity->purity, 1.0);
  EXPECT_EQ(rep.purity->detected, 8);
}

TEST(ClusterCorpus, TooFewSegmentsForK1) {
  SynthSpec spec;
  spec.n_utts = 1;
  const auto c = generate(spec);
  const auto segs = by_utt(segment_features(c.features, MergeParams{}));
  EXPECT_THROW(cluster_corpus(c.features, segs, {256, 64, 0, {}}), ValidationError);
}

TEST(LoadFeatures, MissingFileRecordedPerUtterance) {
  std::vector<ManifestEntry> m{{"gone", "/nonexistent/sylcut/gone.feat"}};
  const auto out = load_features(m);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_FALSE(out[0].value.has_value());
  EXPECT_FALSE(out[0].error.empty());
}
