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

// Corpus-level composition of the per-utterance operations. Work is spread
// over a fixed pool of threads; results always come back in input order.

#include <algorithm>
#include <atomic>
#include <exception>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "sylcut/cluster.hpp"
#include "sylcut/error.hpp"
#include "sylcut/eval.hpp"
#include "sylcut/featio.hpp"
#include "sylcut/log.hpp"
#include "sylcut/mincut.hpp"
#include "sylcut/ssm.hpp"

namespace sylcut {

/// Calls fn(i) for i in [0, n) on `workers` threads. The first exception
/// thrown by any call is rethrown after all threads join.
template <class Fn>
void parallel_for(Index n, int workers, Fn&& fn) {
  workers = std::max(1, std::min<int>(workers, static_cast<int>(std::max<Index>(n, 1))));
  if (workers == 1) {
    for (Index i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<Index> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  auto run = [&] {
    for (Index i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) pool.emplace_back(run);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

/// A per-utterance result or the error that prevented it.
template <class T>
struct UttOutcome {
  std::string utt_id;
  std::optional<T> value;
  std::string error;
};

inline std::vector<UttOutcome<FeatureSequence>> load_features(
    const std::vector<ManifestEntry>& manifest, int workers = 1) {
  std::vector<UttOutcome<FeatureSequence>> out(manifest.size());
  parallel_for(static_cast<Index>(manifest.size()), workers, [&](Index i) {
    const auto& e = manifest[static_cast<std::size_t>(i)];
    auto& o = out[static_cast<std::size_t>(i)];
    o.utt_id = e.utt_id;
    try {
      o.value = read_feature_file(e.path);
      if (o.value->utt_id != e.utt_id) {
        log::warn("feature file " + e.path.string() + " declares utt_id '" + o.value->utt_id +
                  "', manifest says '" + e.utt_id + "'; using the manifest id");
        o.value->utt_id = e.utt_id;
      }
    } catch (const Error& err) {
      o.value.reset();
      o.error = err.what();
    }
  });
  return out;
}

/// Segments every utterance with segment_utterance.
inline std::vector<Segmentation> segment_features(const std::vector<FeatureSequence>& feats,
                                                  const MergeParams& p,
                                                  const SsmOptions& ssm = {}, int workers = 1) {
  std::vector<Segmentation> out(feats.size());
  parallel_for(static_cast<Index>(feats.size()), workers, [&](Index i) {
    out[static_cast<std::size_t>(i)] = segment_utterance(feats[static_cast<std::size_t>(i)], p, ssm);
  });
  return out;
}

inline std::map<std::string, Segmentation> by_utt(const std::vector<Segmentation>& segs) {
  std::map<std::string, Segmentation> m;
  for (const auto& s : segs) m.emplace(s.utt_id, s);
  return m;
}

// ---------------------------------------------------------------------------
// Clustering

struct ClusterCorpusResult {
  ClusterModel model;
  std::map<std::string, Segmentation> labeled;  // labels = coarse, fine_ids = fine
};

/// Pools every segment (utterances in utt_id order), fits the two-step model
/// and labels each segment.
inline ClusterCorpusResult cluster_corpus(const std::vector<FeatureSequence>& feats,
                                          const std::map<std::string, Segmentation>& segs,
                                          const ClusterFitOptions& opts) {
  std::map<std::string, const FeatureSequence*> feat_of;
  for (const auto& f : feats) feat_of.emplace(f.utt_id, &f);
  std::vector<SegmentEmbedding> embs;
  std::vector<std::string> order;
  for (const auto& [utt, seg] : segs) {
    const auto it = feat_of.find(utt);
    if (it == feat_of.end()) {
      log::warn("segmentation for '" + utt + "' has no features; skipped");
      continue;
    }
    auto e = pool_segments(*it->second, seg);
    embs.insert(embs.end(), std::make_move_iterator(e.begin()), std::make_move_iterator(e.end()));
    order.push_back(utt);
  }
  if (static_cast<Index>(embs.size()) < opts.k1) {
    throw ValidationError("only " + std::to_string(embs.size()) + " segments for k1 = " +
                          std::to_string(opts.k1) + "; use a smaller k1");
  }
  ClusterCorpusResult res;
  res.model = fit_cluster_model(embs, opts);
  const auto assigned = assign(embs, res.model);
  std::size_t pos = 0;
  for (const auto& utt : order) {
    Segmentation seg = segs.at(utt);
    seg.labels.clear();
    seg.fine_ids.clear();
    for (Index s = 0; s < seg.num_segments(); ++s, ++pos) {
      seg.labels.push_back(std::to_string(assigned[pos].coarse_id));
      seg.fine_ids.push_back(std::to_string(assigned[pos].fine_id));
    }
    res.labeled.emplace(utt, std::move(seg));
  }
  return res;
}

// ---------------------------------------------------------------------------
// Hyperparameter sweep

struct SweepPoint {
  double sec_per_syllable = 0.0;
  double merge_thres = 0.0;
  BoundaryScore score;
};

struct SweepResult {
  std::vector<SweepPoint> points;  // sec_per_syllable-major, both ascending
  SweepPoint best;
};

/// Scores every (sec_per_syllable, merge_thres) grid point by corpus
/// R-value. Duplicate grid values are collapsed. The best point maximizes
/// R-value; ties go to the smaller merge_thres, then the smaller
/// sec_per_syllable.
inline SweepResult sweep(const std::vector<FeatureSequence>& feats,
                         const std::map<std::string, Alignment>& refs,
                         std::vector<double> sps_grid, std::vector<double> thres_grid,
                         double tolerance_s, const MergeParams& base = {},
                         const SsmOptions& ssm = {}, int workers = 1) {
  if (sps_grid.empty() || thres_grid.empty()) throw ValidationError("sweep: empty grid");
  for (auto* g : {&sps_grid, &thres_grid}) {
    std::sort(g->begin(), g->end());
    g->erase(std::unique(g->begin(), g->end()), g->end());
  }
  const std::size_t n_thr = thres_grid.size();
  SweepResult res;
  for (double sps : sps_grid) {
    MergeParams p = base;
    p.sec_per_syllable = sps;
    validate(p);
    // one DP per utterance, then every threshold reuses the oversegmentation
    std::vector<std::vector<Segmentation>> per_thr(n_thr, std::vector<Segmentation>(feats.size()));
    parallel_for(static_cast<Index>(feats.size()), workers, [&](Index i) {
      const auto& seq = feats[static_cast<std::size_t>(i)];
      const SimMatrix sm = compute_ssm(seq, ssm);
      const NcutSolution sol = ncut_dp(sm, choose_k(seq.duration_seconds(), p, seq.num_frames()));
      for (std::size_t t = 0; t < n_thr; ++t) {
        MergeParams pt = p;
        pt.merge_thres = thres_grid[t];
        per_thr[t][static_cast<std::size_t>(i)] = merge_segments(seq, sol, pt);
      }
    });
    for (std::size_t t = 0; t < n_thr; ++t) {
      EvalConfig cfg;
      cfg.tolerance_s = tolerance_s;
      cfg.allow_partial = true;
      const EvalReport rep = evaluate_corpus(refs, by_utt(per_thr[t]), cfg);
      res.points.push_back({sps, thres_grid[t], rep.boundary});
    }
  }
  res.best = res.points.front();
  for (const auto& pt : res.points) {
    const auto& b = res.best;
    if (pt.score.r_value > b.score.r_value ||
        (pt.score.r_value == b.score.r_value &&
         (pt.merge_thres < b.merge_thres ||
          (pt.merge_thres == b.merge_thres && pt.sec_per_syllable < b.sec_per_syllable)))) {
      res.best = pt;
    }
  }
  return res;
}

}  // namespace sylcut
