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

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "sylcut/error.hpp"
#include "sylcut/featio.hpp"

namespace sylcut {

struct SsmOptions {
  /// Largest T accepted; the matrix and its prefix table need 16*T^2 bytes.
  Index max_frames = 20000;
  /// Subtract the per-utterance feature mean before the Gram product.
  /// Off by default; not part of the published method.
  bool mean_center = false;
};

/// Frame self-similarity matrix w(u,v) together with the prefix tables that
/// make row-mass and square-block sums O(1):
///   row_sum_prefix(i) = sum_{u < i} d(u),   d(u) = sum_v w(u,v)
///   block_sum(a, b)   = sum_{u,v in [a,b)} w(u,v)
class SimMatrix {
 public:
  SimMatrix() = default;

  /// Wraps an explicit weight matrix. It must be square, symmetric and
  /// non-negative; the prefix tables are built here.
  static SimMatrix from_weights(Eigen::MatrixXd w, std::string utt_id = {}) {
    if (w.rows() != w.cols() || w.rows() < 1) {
      throw ValidationError("similarity matrix must be square and non-empty");
    }
    if (!w.allFinite()) throw DataError("similarity matrix has non-finite entries");
    const Index n = w.rows();
    for (Index u = 0; u < n; ++u) {
      for (Index v = 0; v < n; ++v) {
        if (w(u, v) < 0.0) throw ValidationError("similarity matrix has negative entries");
        const double tol = 1e-6 * std::max(1.0, std::abs(w(u, v)));
        if (std::abs(w(u, v) - w(v, u)) > tol) {
          throw ValidationError("similarity matrix is not symmetric");
        }
      }
    }
    SimMatrix sm;
    sm.utt_id_ = std::move(utt_id);
    sm.w_ = std::move(w);
    sm.build_prefix();
    return sm;
  }

  const std::string& utt_id() const { return utt_id_; }
  Index size() const { return w_.rows(); }
  double weight(Index u, Index v) const { return w_(u, v); }
  const Eigen::MatrixXd& weights() const { return w_; }

  double row_sum_prefix(Index i) const { return row_prefix_(i); }

  double block_sum(Index a, Index b) const {
    return prefix_(b, b) - prefix_(a, b) - prefix_(b, a) + prefix_(a, a);
  }

  double total_mass() const { return row_prefix_(size()); }

 private:
  friend SimMatrix compute_ssm(const FeatureSequence&, const SsmOptions&);

  void build_prefix() {
    const Index n = w_.rows();
    prefix_.setZero(n + 1, n + 1);
    row_prefix_.setZero(n + 1);
    // column-major storage: walk columns outermost
    for (Index j = 0; j < n; ++j) {
      double col_run = 0.0;
      for (Index i = 0; i < n; ++i) {
        col_run += w_(i, j);
        prefix_(i + 1, j + 1) = prefix_(i + 1, j) + col_run;
      }
    }
    for (Index i = 0; i < n; ++i) {
      row_prefix_(i + 1) = row_prefix_(i) + w_.col(i).sum();  // symmetric
    }
  }

  std::string utt_id_;
  Eigen::MatrixXd w_;
  Eigen::MatrixXd prefix_;      // (T+1) x (T+1), prefix_(i,j) = sum_{u<i,v<j} w
  Eigen::VectorXd row_prefix_;  // T+1
};

/// w = C C^T - min(C C^T), accumulated in double precision.
inline SimMatrix compute_ssm(const FeatureSequence& seq, const SsmOptions& opts = {}) {
  validate(seq);
  const Index n = seq.num_frames();
  if (n > opts.max_frames) {
    throw CapacityError("utterance '" + seq.utt_id + "' has " + std::to_string(n) +
                        " frames, above the similarity-matrix budget of " +
                        std::to_string(opts.max_frames) +
                        "; split it into chunks or raise the budget");
  }
  Eigen::MatrixXd c = seq.frames.cast<double>();
  if (opts.mean_center) c.rowwise() -= c.colwise().mean();

  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n, n);
  g.selfadjointView<Eigen::Lower>().rankUpdate(c);
  g.triangularView<Eigen::StrictlyUpper>() = g.transpose();
  g.array() -= g.minCoeff();

  SimMatrix sm;
  sm.utt_id_ = seq.utt_id;
  sm.w_ = std::move(g);
  sm.build_prefix();
  return sm;
}

struct CutVol {
  double cut = 0.0;
  double vol = 0.0;
};

/// cut(A, V-A) and vol(A) for A = frames [a, b).
inline CutVol cut_and_vol(const SimMatrix& sm, Index a, Index b) {
  detail::require(0 <= a && a < b && b <= sm.size(),
                  "cut_and_vol: need 0 <= a < b <= T");
  const double vol = sm.row_sum_prefix(b) - sm.row_sum_prefix(a);
  double cut = vol - sm.block_sum(a, b);
  // Rounding in the prefix differences can leave a few ulps below zero.
  if (cut < 0.0) cut = 0.0;
  return {cut, std::max(vol, 0.0)};
}

/// T x T float dump of w for visualization tooling.
inline FeatureSequence ssm_debug_dump(const SimMatrix& sm, double frame_rate_hz) {
  FeatureSequence out;
  out.utt_id = sm.utt_id();
  out.frames = sm.weights().cast<float>();
  out.frame_rate_hz = frame_rate_hz;
  out.source = "ssm";
  return out;
}

}  // namespace sylcut
