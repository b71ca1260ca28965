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

// Two-step segment categorization: KMeans to a large fine inventory, then
// average-linkage agglomeration of the fine centroids down to the coarse
// inventory.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sylcut/error.hpp"
#include "sylcut/featio.hpp"
#include "sylcut/log.hpp"
#include "sylcut/mincut.hpp"

namespace sylcut {

struct SegmentEmbedding {
  std::string utt_id;
  Span span;
  Eigen::VectorXd vector;
};

/// Mean of the frames whose span [i/fr, (i+1)/fr) overlaps each segment.
/// A segment thinner than a frame takes the frame under its midpoint.
inline std::vector<SegmentEmbedding> pool_segments(const FeatureSequence& seq,
                                                   const Segmentation& seg) {
  validate(seq);
  validate(seg);
  const double half_frame = 0.5 / seq.frame_rate_hz;
  if (std::abs(seg.duration_seconds() - seq.duration_seconds()) > half_frame) {
    throw ValidationError("segmentation of '" + seg.utt_id + "' spans " +
                          std::to_string(seg.duration_seconds()) + " s but features span " +
                          std::to_string(seq.duration_seconds()) + " s");
  }
  const Index n = seq.num_frames();
  std::vector<SegmentEmbedding> out;
  out.reserve(static_cast<std::size_t>(seg.num_segments()));
  for (const Span& sp : seg.segments()) {
    Index a = std::clamp<Index>(seconds_to_frame_floor(sp.start_s, seq.frame_rate_hz), 0, n);
    Index b = std::clamp<Index>(seconds_to_frame_ceil(sp.end_s, seq.frame_rate_hz), 0, n);
    if (b <= a) {
      const double mid = 0.5 * (sp.start_s + sp.end_s);
      a = std::clamp<Index>(static_cast<Index>(std::floor(mid * seq.frame_rate_hz)), 0, n - 1);
      b = a + 1;
      log::warn("segment [" + std::to_string(sp.start_s) + ", " + std::to_string(sp.end_s) +
                ") of '" + seg.utt_id + "' is shorter than a frame; using frame " +
                std::to_string(a));
    }
    SegmentEmbedding e;
    e.utt_id = seg.utt_id;
    e.span = sp;
    e.vector = seq.frames.middleRows(a, b - a).cast<double>().colwise().mean().transpose();
    out.push_back(std::move(e));
  }
  return out;
}

/// Stacks embedding vectors into an n x D matrix.
inline Eigen::MatrixXd stack_embeddings(std::span<const SegmentEmbedding> embs) {
  if (embs.empty()) return {};
  const Index d = embs.front().vector.size();
  Eigen::MatrixXd m(static_cast<Index>(embs.size()), d);
  for (std::size_t i = 0; i < embs.size(); ++i) {
    if (embs[i].vector.size() != d) {
      throw ValidationError("segment embeddings have inconsistent dimensions");
    }
    m.row(static_cast<Index>(i)) = embs[i].vector.transpose();
  }
  return m;
}

// ---------------------------------------------------------------------------
// KMeans

struct KMeansOptions {
  int max_iterations = 100;
  double relative_tolerance = 1e-4;
};

struct KMeansResult {
  Eigen::MatrixXd centroids;  // k x D
  std::vector<Index> labels;
  std::vector<Index> sizes;
  double inertia = 0.0;
  std::vector<double> inertia_history;
  int iterations = 0;
};

namespace detail {

inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Nearest row of `centroids` to `x` by squared Euclidean distance; lowest
/// index wins ties.
inline std::pair<Index, double> nearest_centroid(const Eigen::MatrixXd& centroids,
                                                 const Eigen::Ref<const Eigen::RowVectorXd>& x) {
  Index best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Index c = 0; c < centroids.rows(); ++c) {
    const double d = (centroids.row(c) - x).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return {best, best_d};
}

inline Eigen::MatrixXd kmeanspp_init(const Eigen::MatrixXd& pts, Index k, std::mt19937_64& rng) {
  const Index n = pts.rows();
  Eigen::MatrixXd c(k, pts.cols());
  auto pick_uniform = [&] {
    return std::min<Index>(static_cast<Index>(uniform01(rng) * static_cast<double>(n)), n - 1);
  };
  c.row(0) = pts.row(pick_uniform());
  std::vector<double> d2(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) d2[static_cast<std::size_t>(i)] = (pts.row(i) - c.row(0)).squaredNorm();
  for (Index j = 1; j < k; ++j) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    Index chosen = 0;
    if (total > 0.0) {
      const double r = uniform01(rng) * total;
      double run = 0.0;
      chosen = n - 1;
      for (Index i = 0; i < n; ++i) {
        run += d2[static_cast<std::size_t>(i)];
        if (run > r && d2[static_cast<std::size_t>(i)] > 0.0) {
          chosen = i;
          break;
        }
      }
    } else {
      chosen = pick_uniform();
    }
    c.row(j) = pts.row(chosen);
    for (Index i = 0; i < n; ++i) {
      auto& v = d2[static_cast<std::size_t>(i)];
      v = std::min(v, (pts.row(i) - c.row(j)).squaredNorm());
    }
  }
  return c;
}

}  // namespace detail

/// Lloyd's algorithm from a kmeans++ seeding. Stops when the relative
/// inertia improvement drops below the tolerance or after max_iterations.
/// Empty clusters are re-seeded with the point farthest from its centroid.
inline KMeansResult fit_kmeans(const Eigen::MatrixXd& points, Index k1, std::uint64_t seed,
                               const KMeansOptions& opts = {}) {
  const Index n = points.rows();
  if (k1 < 1) throw ValidationError("k1 must be >= 1");
  if (k1 > n) {
    throw ValidationError("k1 = " + std::to_string(k1) + " exceeds the " + std::to_string(n) +
                          " available segments; use a smaller k1");
  }
  if (!points.allFinite()) throw DataError("kmeans input contains NaN or Inf");

  std::mt19937_64 rng(seed);
  KMeansResult res;
  res.centroids = detail::kmeanspp_init(points, k1, rng);
  res.labels.assign(static_cast<std::size_t>(n), 0);
  std::vector<double> dist(static_cast<std::size_t>(n));
  double prev = std::numeric_limits<double>::infinity();

  for (int it = 0; it < opts.max_iterations; ++it) {
    double inertia = 0.0;
    for (Index i = 0; i < n; ++i) {
      const auto [c, d] = detail::nearest_centroid(res.centroids, points.row(i));
      res.labels[static_cast<std::size_t>(i)] = c;
      dist[static_cast<std::size_t>(i)] = d;
      inertia += d;
    }
    res.iterations = it + 1;
    res.inertia = inertia;
    res.inertia_history.push_back(inertia);
    if (std::isfinite(prev) && inertia > prev * (1.0 + 1e-12) + 1e-12) {
      throw std::logic_error("kmeans inertia increased between Lloyd iterations");
    }
    if (inertia == 0.0) break;
    if (std::isfinite(prev) && prev - inertia < opts.relative_tolerance * prev) break;
    if (it + 1 == opts.max_iterations) break;
    prev = inertia;

    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k1, points.cols());
    std::vector<Index> counts(static_cast<std::size_t>(k1), 0);
    for (Index i = 0; i < n; ++i) {
      const Index c = res.labels[static_cast<std::size_t>(i)];
      sums.row(c) += points.row(i);
      ++counts[static_cast<std::size_t>(c)];
    }
    std::vector<bool> taken(static_cast<std::size_t>(n), false);
    for (Index c = 0; c < k1; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        res.centroids.row(c) = sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
        continue;
      }
      Index far = -1;
      for (Index i = 0; i < n; ++i) {
        if (taken[static_cast<std::size_t>(i)]) continue;
        if (far < 0 || dist[static_cast<std::size_t>(i)] > dist[static_cast<std::size_t>(far)]) far = i;
      }
      taken[static_cast<std::size_t>(far)] = true;
      res.centroids.row(c) = points.row(far);
    }
  }

  res.sizes.assign(static_cast<std::size_t>(k1), 0);
  for (Index c : res.labels) ++res.sizes[static_cast<std::size_t>(c)];
  return res;
}

// ---------------------------------------------------------------------------
// Agglomeration

/// Average-linkage agglomeration of `centroids` under cosine distance until
/// k2 clusters remain. Linkage between merged clusters is the size-weighted
/// mean of member distances (sizes below 1 count as 1). The closest pair is
/// merged first; ties go to the lexicographically lowest index pair.
/// Returns fine -> coarse ids, coarse ids numbered by their lowest member.
inline std::vector<Index> agglomerate(const Eigen::MatrixXd& centroids, Index k2,
                                      std::span<const Index> sizes) {
  const Index k1 = centroids.rows();
  detail::require(k2 >= 1 && k2 <= k1, "agglomerate: need 1 <= k2 <= k1");
  detail::require(static_cast<Index>(sizes.size()) == k1,
                  "agglomerate: one size per centroid required");

  Eigen::MatrixXd dist(k1, k1);
  for (Index i = 0; i < k1; ++i) {
    const Eigen::VectorXd ci = centroids.row(i).transpose();
    for (Index j = i; j < k1; ++j) {
      const double d = 1.0 - detail::cosine(ci, centroids.row(j).transpose());
      dist(i, j) = d;
      dist(j, i) = d;
    }
  }
  std::vector<double> weight(static_cast<std::size_t>(k1));
  for (Index i = 0; i < k1; ++i) {
    weight[static_cast<std::size_t>(i)] = static_cast<double>(std::max<Index>(sizes[static_cast<std::size_t>(i)], 1));
  }
  std::vector<Index> parent(static_cast<std::size_t>(k1));
  std::iota(parent.begin(), parent.end(), 0);
  std::vector<bool> active(static_cast<std::size_t>(k1), true);
  std::vector<Index> nn(static_cast<std::size_t>(k1), -1);
  std::vector<double> nnd(static_cast<std::size_t>(k1), std::numeric_limits<double>::infinity());

  auto recompute = [&](Index i) {
    nn[static_cast<std::size_t>(i)] = -1;
    nnd[static_cast<std::size_t>(i)] = std::numeric_limits<double>::infinity();
    for (Index j = 0; j < k1; ++j) {
      if (j == i || !active[static_cast<std::size_t>(j)]) continue;
      if (dist(i, j) < nnd[static_cast<std::size_t>(i)]) {
        nnd[static_cast<std::size_t>(i)] = dist(i, j);
        nn[static_cast<std::size_t>(i)] = j;
      }
    }
  };
  for (Index i = 0; i < k1; ++i) recompute(i);

  for (Index remaining = k1; remaining > k2; --remaining) {
    Index a = -1;
    for (Index i = 0; i < k1; ++i) {
      if (!active[static_cast<std::size_t>(i)]) continue;
      if (a < 0 || nnd[static_cast<std::size_t>(i)] < nnd[static_cast<std::size_t>(a)]) a = i;
    }
    Index b = nn[static_cast<std::size_t>(a)];
    if (b < a) std::swap(a, b);

    const double wa = weight[static_cast<std::size_t>(a)];
    const double wb = weight[static_cast<std::size_t>(b)];
    for (Index c = 0; c < k1; ++c) {
      if (!active[static_cast<std::size_t>(c)] || c == a || c == b) continue;
      const double d = (wa * dist(a, c) + wb * dist(b, c)) / (wa + wb);
      dist(a, c) = d;
      dist(c, a) = d;
    }
    weight[static_cast<std::size_t>(a)] = wa + wb;
    active[static_cast<std::size_t>(b)] = false;
    for (Index i = 0; i < k1; ++i) {
      if (parent[static_cast<std::size_t>(i)] == b) parent[static_cast<std::size_t>(i)] = a;
    }

    recompute(a);
    for (Index c = 0; c < k1; ++c) {
      if (!active[static_cast<std::size_t>(c)] || c == a) continue;
      const Index cur = nn[static_cast<std::size_t>(c)];
      if (cur == a || cur == b) {
        recompute(c);
      } else if (dist(c, a) < nnd[static_cast<std::size_t>(c)] ||
                 (dist(c, a) == nnd[static_cast<std::size_t>(c)] && a < cur)) {
        nnd[static_cast<std::size_t>(c)] = dist(c, a);
        nn[static_cast<std::size_t>(c)] = a;
      }
    }
  }

  std::vector<Index> coarse_of_rep(static_cast<std::size_t>(k1), -1);
  Index next = 0;
  std::vector<Index> out(static_cast<std::size_t>(k1));
  for (Index i = 0; i < k1; ++i) {
    auto& id = coarse_of_rep[static_cast<std::size_t>(parent[static_cast<std::size_t>(i)])];
    if (id < 0) id = next++;
    out[static_cast<std::size_t>(i)] = id;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Model

struct ClusterModel {
  Eigen::MatrixXd kmeans_centroids;  // k1 x D, float-representable values
  std::vector<Index> merge_map;      // fine -> coarse
  Index k1 = 0;
  Index k2 = 0;
  std::uint64_t seed = 0;
};

inline void validate(const ClusterModel& m) {
  if (m.k1 < 1 || m.k2 < 1 || m.k2 > m.k1 || m.kmeans_centroids.rows() != m.k1 ||
      static_cast<Index>(m.merge_map.size()) != m.k1) {
    throw ValidationError("cluster model has inconsistent sizes");
  }
  std::vector<bool> hit(static_cast<std::size_t>(m.k2), false);
  for (Index c : m.merge_map) {
    if (c < 0 || c >= m.k2) throw ValidationError("cluster model merge map out of range");
    hit[static_cast<std::size_t>(c)] = true;
  }
  if (std::find(hit.begin(), hit.end(), false) != hit.end()) {
    throw ValidationError("cluster model merge map is not onto the coarse clusters");
  }
}

struct ClusterFitOptions {
  Index k1 = 256;
  Index k2 = 64;
  std::uint64_t seed = 0;
  KMeansOptions kmeans;
};

inline ClusterModel fit_cluster_model(std::span<const SegmentEmbedding> embs,
                                      const ClusterFitOptions& opts) {
  if (opts.k2 < 1 || opts.k2 > opts.k1) throw ValidationError("need 1 <= k2 <= k1");
  const Eigen::MatrixXd pts = stack_embeddings(embs);
  KMeansResult km = fit_kmeans(pts, opts.k1, opts.seed, opts.kmeans);
  ClusterModel m;
  // The model is persisted as float32; round now so a reloaded model assigns
  // identically.
  m.kmeans_centroids = km.centroids.cast<float>().cast<double>();
  m.merge_map = agglomerate(m.kmeans_centroids, opts.k2, km.sizes);
  m.k1 = opts.k1;
  m.k2 = opts.k2;
  m.seed = opts.seed;
  return m;
}

struct SegmentAssignment {
  std::string utt_id;
  Span span;
  Index fine_id = 0;
  Index coarse_id = 0;
};

inline std::vector<SegmentAssignment> assign(std::span<const SegmentEmbedding> embs,
                                             const ClusterModel& model) {
  validate(model);
  std::vector<SegmentAssignment> out;
  out.reserve(embs.size());
  for (const auto& e : embs) {
    if (e.vector.size() != model.kmeans_centroids.cols()) {
      throw ValidationError("embedding dimension " + std::to_string(e.vector.size()) +
                            " does not match model dimension " +
                            std::to_string(model.kmeans_centroids.cols()));
    }
    const Index fine = detail::nearest_centroid(model.kmeans_centroids, e.vector.transpose()).first;
    out.push_back({e.utt_id, e.span, fine, model.merge_map[static_cast<std::size_t>(fine)]});
  }
  return out;
}

/// Writes model.json (k1, k2, seed, merge_map) and centroids.feat into `dir`.
inline void save_cluster_model(const ClusterModel& m, const std::filesystem::path& dir) {
  validate(m);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  nlohmann::ordered_json j;
  j["k1"] = m.k1;
  j["k2"] = m.k2;
  j["seed"] = m.seed;
  j["dim"] = m.kmeans_centroids.cols();
  j["centroids"] = "centroids.feat";
  j["merge_map"] = m.merge_map;
  std::ofstream out(dir / "model.json");
  if (!out) throw IoError("cannot write " + (dir / "model.json").string());
  out << j.dump(2) << '\n';

  FeatureSequence c;
  c.utt_id = "kmeans_centroids";
  c.frames = m.kmeans_centroids.cast<float>();
  c.frame_rate_hz = 1.0;
  c.source = "cluster_model";
  write_feature_file(c, dir / "centroids.feat");
}

inline ClusterModel load_cluster_model(const std::filesystem::path& dir) {
  std::ifstream in(dir / "model.json");
  if (!in) throw IoError("cannot open " + (dir / "model.json").string());
  ClusterModel m;
  std::string centroid_file;
  try {
    const auto j = nlohmann::json::parse(in);
    m.k1 = j.at("k1").get<Index>();
    m.k2 = j.at("k2").get<Index>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.merge_map = j.at("merge_map").get<std::vector<Index>>();
    centroid_file = j.value("centroids", std::string("centroids.feat"));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("malformed cluster model: " + std::string(e.what()));
  }
  m.kmeans_centroids = read_feature_file(dir / centroid_file).frames.cast<double>();
  validate(m);
  return m;
}

}  // namespace sylcut
