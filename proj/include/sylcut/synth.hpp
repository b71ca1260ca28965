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

// Synthetic corpora with planted unit boundaries: each utterance is a run of
// segments, each segment one unit centroid repeated for its length plus
// isotropic Gaussian noise.

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "sylcut/error.hpp"
#include "sylcut/featio.hpp"
#include "sylcut/log.hpp"

namespace sylcut {

struct IntRange {
  Index min = 0;
  Index max = 0;
};

struct SynthSpec {
  Index n_utts = 100;
  Index dim = 16;
  double frame_rate_hz = 50.0;
  Index n_types = 8;
  IntRange seg_len_frames{10, 40};
  IntRange segs_per_utt{8, 8};
  /// Per-dimension noise std; centroids have unit norm.
  double noise_sigma = 0.1;
  std::uint64_t seed = 0;
};

inline void validate(const SynthSpec& s) {
  if (s.n_utts < 1) throw ValidationError("synth: n_utts must be >= 1");
  if (s.dim < 1) throw ValidationError("synth: dim must be >= 1");
  if (s.n_types < 1) throw ValidationError("synth: n_types must be >= 1");
  if (!(s.frame_rate_hz > 0.0)) throw ValidationError("synth: frame rate must be positive");
  if (s.seg_len_frames.min < 1 || s.seg_len_frames.min > s.seg_len_frames.max) {
    throw ValidationError("synth: bad segment length range");
  }
  if (s.segs_per_utt.min < 1 || s.segs_per_utt.min > s.segs_per_utt.max) {
    throw ValidationError("synth: bad segments-per-utterance range");
  }
  if (!(s.noise_sigma >= 0.0)) throw ValidationError("synth: noise_sigma must be >= 0");
}

struct SynthCorpus {
  Eigen::MatrixXd centroids;  // n_types x dim, unit rows
  std::vector<FeatureSequence> features;
  std::map<std::string, Alignment> alignments;  // syllable tier

  /// Largest cosine between two distinct unit centroids (-1 for one type).
  double max_cross_cosine() const {
    double best = -1.0;
    for (Index i = 0; i < centroids.rows(); ++i) {
      for (Index j = i + 1; j < centroids.rows(); ++j) {
        best = std::max(best, centroids.row(i).dot(centroids.row(j)));
      }
    }
    return best;
  }
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Portable draws (std distributions differ between standard libraries).
class SynthRng {
 public:
  explicit SynthRng(std::uint64_t seed) : eng_(seed) {}

  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  Index uniform_int(Index lo, Index hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo + 1);
    return lo + static_cast<Index>(eng_() % span);
  }

  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    constexpr double kTwoPi = 6.283185307179586476925286766559;
    spare_ = r * std::sin(kTwoPi * u2);
    have_spare_ = true;
    return r * std::cos(kTwoPi * u2);
  }

 private:
  std::mt19937_64 eng_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

inline std::string synth_utt_id(Index i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "synth_%05td", i);
  return buf;
}

}  // namespace detail

/// Deterministic in spec.seed. Utterance i draws from its own stream seeded
/// with splitmix64(seed ^ (i + 1)). Adjacent segments always differ in type
/// when more than one type exists, so every planted boundary is observable.
inline SynthCorpus generate(const SynthSpec& spec) {
  validate(spec);
  if (spec.dim < spec.n_types) {
    log::warn("synth: dim < n_types, centroids cannot be near-orthogonal");
  }
  SynthCorpus out;
  detail::SynthRng crng(spec.seed);
  out.centroids.resize(spec.n_types, spec.dim);
  for (Index t = 0; t < spec.n_types; ++t) {
    double norm = 0.0;
    while (norm == 0.0) {
      for (Index d = 0; d < spec.dim; ++d) out.centroids(t, d) = crng.gaussian();
      norm = out.centroids.row(t).norm();
    }
    out.centroids.row(t) /= norm;
  }

  out.features.reserve(static_cast<std::size_t>(spec.n_utts));
  for (Index u = 0; u < spec.n_utts; ++u) {
    detail::SynthRng rng(detail::splitmix64(spec.seed ^ static_cast<std::uint64_t>(u + 1)));
    const Index n_segs = rng.uniform_int(spec.segs_per_utt.min, spec.segs_per_utt.max);
    std::vector<Index> types(static_cast<std::size_t>(n_segs));
    std::vector<Index> lens(static_cast<std::size_t>(n_segs));
    Index total = 0;
    for (Index s = 0; s < n_segs; ++s) {
      Index t = rng.uniform_int(0, spec.n_types - 1);
      if (s > 0 && spec.n_types > 1) {
        // draw from the other n_types - 1 types
        t = rng.uniform_int(0, spec.n_types - 2);
        if (t >= types[static_cast<std::size_t>(s - 1)]) ++t;
      }
      types[static_cast<std::size_t>(s)] = t;
      lens[static_cast<std::size_t>(s)] = rng.uniform_int(spec.seg_len_frames.min, spec.seg_len_frames.max);
      total += lens[static_cast<std::size_t>(s)];
    }

    FeatureSequence seq;
    seq.utt_id = detail::synth_utt_id(u);
    seq.frame_rate_hz = spec.frame_rate_hz;
    seq.source = "synth";
    seq.frames.resize(total, spec.dim);
    Alignment ali;
    ali.utt_id = seq.utt_id;
    ali.tier = Tier::kSyllable;
    Index pos = 0;
    for (Index s = 0; s < n_segs; ++s) {
      const Index t = types[static_cast<std::size_t>(s)];
      const Index len = lens[static_cast<std::size_t>(s)];
      for (Index f = pos; f < pos + len; ++f) {
        for (Index d = 0; d < spec.dim; ++d) {
          const double noise = spec.noise_sigma > 0.0 ? spec.noise_sigma * rng.gaussian() : 0.0;
          seq.frames(f, d) = static_cast<float>(out.centroids(t, d) + noise);
        }
      }
      ali.entries.push_back({frame_to_seconds(pos, spec.frame_rate_hz),
                             frame_to_seconds(pos + len, spec.frame_rate_hz),
                             "t" + std::to_string(t)});
      pos += len;
    }
    out.alignments.emplace(seq.utt_id, std::move(ali));
    out.features.push_back(std::move(seq));
  }
  return out;
}

/// Writes features/<utt>.feat, alignments.tsv and manifest.tsv (paths
/// relative to `dir`).
inline void write_synth_corpus(const SynthCorpus& corpus, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir / "features", ec);
  if (ec) throw IoError("cannot create " + (dir / "features").string() + ": " + ec.message());
  std::vector<ManifestEntry> manifest;
  for (const auto& seq : corpus.features) {
    const std::filesystem::path rel = std::filesystem::path("features") / (seq.utt_id + ".feat");
    write_feature_file(seq, dir / rel);
    manifest.push_back({seq.utt_id, rel});
  }
  std::ofstream ali(dir / "alignments.tsv");
  if (!ali) throw IoError("cannot write " + (dir / "alignments.tsv").string());
  for (const auto& [utt, a] : corpus.alignments) write_alignment_tsv(ali, a);
  std::ofstream man(dir / "manifest.tsv");
  if (!man) throw IoError("cannot write " + (dir / "manifest.tsv").string());
  write_manifest(man, manifest);
}

}  // namespace sylcut
