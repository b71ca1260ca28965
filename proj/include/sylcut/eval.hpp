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

// Scoring of hypothesis segmentations against reference alignments:
// tolerance-window boundary precision/recall/F1 and R-value, token F1,
// IoU-based segment matching and cluster purity / detected units.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iterator>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "sylcut/error.hpp"
#include "sylcut/featio.hpp"
#include "sylcut/hungarian.hpp"
#include "sylcut/log.hpp"

namespace sylcut {

namespace detail {
// Slack on tolerance comparisons so that a boundary exactly tol away (e.g.
// two 20 ms frames at 40 ms) counts despite binary rounding.
inline constexpr double kTimeEps = 1e-9;
}  // namespace detail

/// 1 - (|r1| + |r2|) / 2 with r1 = sqrt((1-HR)^2 + OS^2) and
/// r2 = (-OS + HR - 1) / sqrt(2).
inline double r_value(double hr, double os) {
  const double r1 = std::sqrt((1.0 - hr) * (1.0 - hr) + os * os);
  const double r2 = (-os + hr - 1.0) / std::sqrt(2.0);
  return 1.0 - (std::abs(r1) + std::abs(r2)) / 2.0;
}

struct BoundaryScore {
  Index n_ref = 0;
  Index n_hyp = 0;
  Index n_hit = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double r_value = 0.0;

  /// Empty reference and empty hypothesis score as perfect; an empty side
  /// facing a non-empty one scores 0 on the undefined ratio. The R-value is
  /// floored at 0 (it goes negative under heavy oversegmentation).
  static BoundaryScore from_counts(Index n_ref, Index n_hyp, Index n_hit) {
    BoundaryScore s;
    s.n_ref = n_ref;
    s.n_hyp = n_hyp;
    s.n_hit = n_hit;
    if (n_ref == 0 && n_hyp == 0) {
      s.precision = s.recall = s.f1 = s.r_value = 1.0;
      return s;
    }
    s.precision = n_hyp > 0 ? static_cast<double>(n_hit) / static_cast<double>(n_hyp) : 0.0;
    s.recall = n_ref > 0 ? static_cast<double>(n_hit) / static_cast<double>(n_ref) : 0.0;
    s.f1 = s.precision + s.recall > 0.0
               ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
               : 0.0;
    if (n_ref > 0) {
      const double os = static_cast<double>(n_hyp) / static_cast<double>(n_ref) - 1.0;
      s.r_value = std::max(0.0, sylcut::r_value(s.recall, os));
    }
    return s;
  }
};

/// One-to-one tolerance matching. References are visited left to right and
/// each takes the nearest unused hypothesis within tol_s (earlier hypothesis
/// on ties). Returns, per reference, the matched hypothesis index or -1.
inline std::vector<Index> match_boundary_indices(std::span<const double> ref_s,
                                                 std::span<const double> hyp_s, double tol_s) {
  detail::require(tol_s >= 0.0, "match_boundaries: tolerance must be non-negative");
  detail::require(std::is_sorted(ref_s.begin(), ref_s.end()) &&
                      std::is_sorted(hyp_s.begin(), hyp_s.end()),
                  "match_boundaries: boundary lists must be sorted");
  std::vector<Index> match(ref_s.size(), -1);
  std::vector<bool> used(hyp_s.size(), false);
  const double reach = tol_s + detail::kTimeEps;
  for (std::size_t r = 0; r < ref_s.size(); ++r) {
    const auto lo = std::lower_bound(hyp_s.begin(), hyp_s.end(), ref_s[r] - reach);
    Index best = -1;
    double best_d = 0.0;
    for (auto it = lo; it != hyp_s.end() && *it <= ref_s[r] + reach; ++it) {
      const auto h = static_cast<std::size_t>(it - hyp_s.begin());
      if (used[h]) continue;
      const double d = std::abs(*it - ref_s[r]);
      if (d > reach) continue;
      if (best < 0 || d < best_d) {
        best = static_cast<Index>(h);
        best_d = d;
      }
    }
    if (best >= 0) {
      used[static_cast<std::size_t>(best)] = true;
      match[r] = best;
    }
  }
  return match;
}

/// Utterance edges must already be removed from both lists.
inline BoundaryScore match_boundaries(std::span<const double> ref_s, std::span<const double> hyp_s,
                                      double tol_s) {
  const auto m = match_boundary_indices(ref_s, hyp_s, tol_s);
  const auto hits = static_cast<Index>(std::count_if(m.begin(), m.end(), [](Index h) { return h >= 0; }));
  return BoundaryScore::from_counts(static_cast<Index>(ref_s.size()),
                                    static_cast<Index>(hyp_s.size()), hits);
}

/// Sorted, de-duplicated start/end times of an alignment.
inline std::vector<double> alignment_boundaries(const Alignment& ali) {
  std::vector<double> b;
  b.reserve(2 * ali.entries.size());
  for (const auto& e : ali.entries) {
    b.push_back(e.start_s);
    b.push_back(e.end_s);
  }
  std::sort(b.begin(), b.end());
  std::vector<double> out;
  for (double t : b) {
    if (out.empty() || t - out.back() > detail::kTimeEps) out.push_back(t);
  }
  return out;
}

/// Reference boundaries strictly inside (0, duration).
inline std::vector<double> interior_reference_boundaries(const Alignment& ali, double duration_s) {
  std::vector<double> out;
  for (double t : alignment_boundaries(ali)) {
    if (t > detail::kTimeEps && t < duration_s - detail::kTimeEps) out.push_back(t);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Token F1

struct TokenScore {
  Index n_ref_tokens = 0;
  Index n_hyp_tokens = 0;
  Index n_ref_hit = 0;
  Index n_hyp_hit = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  static TokenScore from_counts(Index n_ref, Index n_hyp, Index ref_hit, Index hyp_hit) {
    TokenScore s;
    s.n_ref_tokens = n_ref;
    s.n_hyp_tokens = n_hyp;
    s.n_ref_hit = ref_hit;
    s.n_hyp_hit = hyp_hit;
    s.precision = n_hyp > 0 ? static_cast<double>(hyp_hit) / static_cast<double>(n_hyp) : 0.0;
    s.recall = n_ref > 0 ? static_cast<double>(ref_hit) / static_cast<double>(n_ref) : 0.0;
    s.f1 = s.precision + s.recall > 0.0
               ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
               : 0.0;
    return s;
  }
};

/// A reference token is hit when both its start and end boundary are
/// matched. A hypothesis token (adjacent hypothesis boundaries, utterance
/// edges included) is hit when its two boundaries match the start and end
/// of one reference token.
inline TokenScore token_f1(const Alignment& ref, std::span<const double> hyp_s, double tol_s) {
  const std::vector<double> rb = alignment_boundaries(ref);
  const auto ref_match = match_boundary_indices(rb, hyp_s, tol_s);
  std::vector<Index> hyp_to_ref(hyp_s.size(), -1);
  for (std::size_t r = 0; r < ref_match.size(); ++r) {
    if (ref_match[r] >= 0) hyp_to_ref[static_cast<std::size_t>(ref_match[r])] = static_cast<Index>(r);
  }
  auto index_of = [&](double t) {
    const auto it = std::lower_bound(rb.begin(), rb.end(), t - detail::kTimeEps);
    return static_cast<Index>(it - rb.begin());
  };
  std::set<std::pair<Index, Index>> ref_tokens;
  Index ref_hit = 0;
  for (const auto& e : ref.entries) {
    const Index s = index_of(e.start_s);
    const Index t = index_of(e.end_s);
    ref_tokens.insert({s, t});
    if (ref_match[static_cast<std::size_t>(s)] >= 0 && ref_match[static_cast<std::size_t>(t)] >= 0) ++ref_hit;
  }
  Index hyp_hit = 0;
  const Index n_hyp = hyp_s.size() >= 2 ? static_cast<Index>(hyp_s.size()) - 1 : 0;
  for (Index i = 0; i < n_hyp; ++i) {
    const Index a = hyp_to_ref[static_cast<std::size_t>(i)];
    const Index b = hyp_to_ref[static_cast<std::size_t>(i) + 1];
    if (a >= 0 && b >= 0 && ref_tokens.count({a, b}) > 0) ++hyp_hit;
  }
  return TokenScore::from_counts(static_cast<Index>(ref.entries.size()), n_hyp, ref_hit, hyp_hit);
}

// ---------------------------------------------------------------------------
// Segment matching

inline double temporal_iou(const Span& a, const Span& b) {
  const double inter = std::min(a.end_s, b.end_s) - std::max(a.start_s, b.start_s);
  if (inter <= 0.0) return 0.0;
  const double uni = std::max(a.end_s, b.end_s) - std::min(a.start_s, b.start_s);
  return uni > 0.0 ? inter / uni : 0.0;
}

struct MatchedPair {
  Index hyp = 0;
  Index ref = 0;
  double iou = 0.0;
};

struct MatchingResult {
  std::vector<MatchedPair> pairs;  // ordered by hyp index
  std::vector<Index> unmatched_hyp;
  std::vector<Index> unmatched_ref;

  double total_iou() const {
    double s = 0.0;
    for (const auto& p : pairs) s += p.iou;
    return s;
  }
};

/// Maximum-total-IoU one-to-one matching (Hungarian on -IoU, padded with
/// zero-weight dummies). Pairs with zero overlap are reported unmatched.
inline MatchingResult match_segments_iou(std::span<const Span> ref, std::span<const Span> hyp) {
  Eigen::MatrixXd cost(static_cast<Index>(hyp.size()), static_cast<Index>(ref.size()));
  for (std::size_t h = 0; h < hyp.size(); ++h) {
    for (std::size_t r = 0; r < ref.size(); ++r) {
      cost(static_cast<Index>(h), static_cast<Index>(r)) = -temporal_iou(hyp[h], ref[r]);
    }
  }
  const auto h2r = solve_assignment(cost);
  MatchingResult res;
  std::vector<bool> ref_used(ref.size(), false);
  for (std::size_t h = 0; h < hyp.size(); ++h) {
    const Index r = h2r.empty() ? -1 : h2r[h];
    const double iou = r >= 0 ? -cost(static_cast<Index>(h), r) : 0.0;
    if (r >= 0 && iou > 0.0) {
      res.pairs.push_back({static_cast<Index>(h), r, iou});
      ref_used[static_cast<std::size_t>(r)] = true;
    } else {
      res.unmatched_hyp.push_back(static_cast<Index>(h));
    }
  }
  for (std::size_t r = 0; r < ref.size(); ++r) {
    if (!ref_used[r]) res.unmatched_ref.push_back(static_cast<Index>(r));
  }
  return res;
}

inline std::vector<Span> alignment_spans(const Alignment& ali) {
  std::vector<Span> out;
  out.reserve(ali.entries.size());
  for (const auto& e : ali.entries) out.push_back({e.start_s, e.end_s});
  return out;
}

inline MatchingResult match_segments_iou(const Alignment& ref, const Segmentation& hyp) {
  const auto rs = alignment_spans(ref);
  const auto hs = hyp.segments();
  return match_segments_iou(rs, hs);
}

// ---------------------------------------------------------------------------
// Cluster purity and detected units

struct LabeledMatch {
  std::string cluster;
  std::string label;
};

struct ClusterStat {
  std::string cluster;
  std::string majority_label;
  Index size = 0;
  double f1_best = 0.0;
};

struct ClusterScore {
  double purity = 0.0;
  Index detected = 0;
  Index n_labels = 0;
  Index n_matched = 0;
  std::vector<ClusterStat> per_cluster;  // sorted by cluster id
};

/// Purity = sum over clusters of the majority-label count / matched
/// segments. A label is detected when F1(cluster, label) > 0.5 for some
/// cluster, with precision = count/|cluster| and recall = count/total(label).
inline ClusterScore purity_and_ds(std::span<const LabeledMatch> matches) {
  ClusterScore s;
  s.n_matched = static_cast<Index>(matches.size());
  std::map<std::string, std::map<std::string, Index>> table;  // cluster -> label -> count
  std::map<std::string, Index> label_total;
  for (const auto& m : matches) {
    ++table[m.cluster][m.label];
    ++label_total[m.label];
  }
  s.n_labels = static_cast<Index>(label_total.size());
  if (matches.empty()) {
    log::warn("no matched segments; purity reported as 0");
    return s;
  }
  std::map<std::string, double> best_f1_of_label;
  Index majority_sum = 0;
  for (const auto& [cluster, row] : table) {
    ClusterStat st;
    st.cluster = cluster;
    Index best_count = -1;
    for (const auto& [label, count] : row) st.size += count;
    for (const auto& [label, count] : row) {
      if (count > best_count) {  // map order: ties -> smallest label
        best_count = count;
        st.majority_label = label;
      }
      const double p = static_cast<double>(count) / static_cast<double>(st.size);
      const double r = static_cast<double>(count) / static_cast<double>(label_total[label]);
      const double f1 = 2.0 * p * r / (p + r);
      st.f1_best = std::max(st.f1_best, f1);
      auto& bl = best_f1_of_label[label];
      bl = std::max(bl, f1);
    }
    majority_sum += best_count;
    s.per_cluster.push_back(std::move(st));
  }
  s.purity = static_cast<double>(majority_sum) / static_cast<double>(s.n_matched);
  for (const auto& [label, f1] : best_f1_of_label) {
    if (f1 > 0.5) ++s.detected;
  }
  return s;
}

/// Keeps the syllables whose midpoint falls inside a word spanning at least
/// two syllables. Utterances without a word alignment are dropped.
inline std::map<std::string, Alignment> filter_multisyllabic(
    const std::map<std::string, Alignment>& syllables,
    const std::map<std::string, Alignment>& words) {
  std::map<std::string, Alignment> out;
  for (const auto& [utt, syl] : syllables) {
    const auto wit = words.find(utt);
    if (wit == words.end()) continue;
    const auto& ws = wit->second.entries;
    std::vector<Index> word_of(syl.entries.size(), -1);
    std::vector<Index> count(ws.size(), 0);
    for (std::size_t i = 0; i < syl.entries.size(); ++i) {
      const double mid = 0.5 * (syl.entries[i].start_s + syl.entries[i].end_s);
      const auto it = std::upper_bound(ws.begin(), ws.end(), mid,
                                       [](double t, const AlignmentEntry& w) { return t < w.start_s; });
      if (it == ws.begin()) continue;
      const auto w = static_cast<std::size_t>(std::prev(it) - ws.begin());
      if (mid < ws[w].end_s) {
        word_of[i] = static_cast<Index>(w);
        ++count[w];
      }
    }
    Alignment kept;
    kept.utt_id = utt;
    kept.tier = syl.tier;
    for (std::size_t i = 0; i < syl.entries.size(); ++i) {
      if (word_of[i] >= 0 && count[static_cast<std::size_t>(word_of[i])] >= 2) {
        kept.entries.push_back(syl.entries[i]);
      }
    }
    out.emplace(utt, std::move(kept));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Corpus evaluation

struct EvalConfig {
  double tolerance_s = 0.05;
  bool allow_partial = false;
};

struct UttReport {
  std::string utt_id;
  BoundaryScore boundary;
  TokenScore token;
  Index n_matched_segments = 0;
};

struct EvalReport {
  BoundaryScore boundary;
  TokenScore token;
  std::optional<ClusterScore> purity;       // coarse cluster ids (label column)
  std::optional<ClusterScore> fine_purity;  // "fine=<id>" column
  Index n_hyp_segments = 0;
  Index n_matched_segments = 0;
  double tolerance_s = 0.0;
  std::vector<UttReport> per_utt;      // sorted by utt_id
  std::vector<std::string> excluded;   // hypotheses without a reference
  std::vector<std::string> unscored;   // references without a hypothesis
};

/// Micro-averaged scores over every utterance present in both maps. Counts
/// are pooled before forming ratios. Hypotheses without a reference are an
/// error unless allow_partial.
/// `cluster_refs`, when given, replaces `refs` for purity and detection
/// (e.g. syllables restricted to multisyllabic words).
inline EvalReport evaluate_corpus(const std::map<std::string, Alignment>& refs,
                                  const std::map<std::string, Segmentation>& hyps,
                                  const EvalConfig& cfg,
                                  const std::map<std::string, Alignment>* cluster_refs = nullptr) {
  detail::require(cfg.tolerance_s > 0.0, "evaluate_corpus: tolerance must be positive");
  EvalReport rep;
  rep.tolerance_s = cfg.tolerance_s;
  for (const auto& [utt, seg] : hyps) {
    if (refs.find(utt) == refs.end()) rep.excluded.push_back(utt);
  }
  if (!rep.excluded.empty() && !cfg.allow_partial) {
    std::string msg = "hypotheses without reference alignment:";
    for (const auto& u : rep.excluded) msg += " " + u;
    throw ValidationError(msg);
  }
  for (const auto& [utt, ali] : refs) {
    if (hyps.find(utt) == hyps.end()) rep.unscored.push_back(utt);
  }
  if (!rep.unscored.empty()) {
    log::warn(std::to_string(rep.unscored.size()) +
              " reference utterances have no hypothesis and are ignored");
  }

  Index b_ref = 0, b_hyp = 0, b_hit = 0;
  Index t_ref = 0, t_hyp = 0, t_rhit = 0, t_hhit = 0;
  std::vector<LabeledMatch> coarse, fine;
  bool have_labels = false, have_fine = false;
  for (const auto& [utt, seg] : hyps) {
    const auto rit = refs.find(utt);
    if (rit == refs.end()) continue;
    const Alignment& ali = rit->second;
    UttReport ur;
    ur.utt_id = utt;
    const auto ref_b = interior_reference_boundaries(ali, seg.duration_seconds());
    const auto hyp_b = seg.interior_boundaries();
    ur.boundary = match_boundaries(ref_b, hyp_b, cfg.tolerance_s);
    ur.token = token_f1(ali, seg.boundaries_s, cfg.tolerance_s);
    b_ref += ur.boundary.n_ref;
    b_hyp += ur.boundary.n_hyp;
    b_hit += ur.boundary.n_hit;
    t_ref += ur.token.n_ref_tokens;
    t_hyp += ur.token.n_hyp_tokens;
    t_rhit += ur.token.n_ref_hit;
    t_hhit += ur.token.n_hyp_hit;
    rep.n_hyp_segments += seg.num_segments();

    const Alignment* cali = &ali;
    if (cluster_refs != nullptr) {
      const auto cit = cluster_refs->find(utt);
      cali = cit == cluster_refs->end() ? nullptr : &cit->second;
    }
    if (cali != nullptr && (!seg.labels.empty() || !seg.fine_ids.empty())) {
      const auto m = match_segments_iou(*cali, seg);
      ur.n_matched_segments = static_cast<Index>(m.pairs.size());
      rep.n_matched_segments += ur.n_matched_segments;
      for (const auto& p : m.pairs) {
        const auto& label = cali->entries[static_cast<std::size_t>(p.ref)].label;
        if (!seg.labels.empty()) {
          have_labels = true;
          coarse.push_back({seg.labels[static_cast<std::size_t>(p.hyp)], label});
        }
        if (!seg.fine_ids.empty()) {
          have_fine = true;
          fine.push_back({seg.fine_ids[static_cast<std::size_t>(p.hyp)], label});
        }
      }
    }
    rep.per_utt.push_back(std::move(ur));
  }
  rep.boundary = BoundaryScore::from_counts(b_ref, b_hyp, b_hit);
  rep.token = TokenScore::from_counts(t_ref, t_hyp, t_rhit, t_hhit);
  if (have_labels) rep.purity = purity_and_ds(coarse);
  if (have_fine) rep.fine_purity = purity_and_ds(fine);
  return rep;
}

namespace detail {

inline nlohmann::ordered_json boundary_json(const BoundaryScore& b) {
  nlohmann::ordered_json j;
  j["precision"] = b.precision;
  j["recall"] = b.recall;
  j["f1"] = b.f1;
  j["r_value"] = b.r_value;
  j["n_ref"] = b.n_ref;
  j["n_hyp"] = b.n_hyp;
  j["n_hit"] = b.n_hit;
  return j;
}

inline nlohmann::ordered_json cluster_json(const ClusterScore& c) {
  nlohmann::ordered_json j;
  j["purity"] = c.purity;
  j["detected"] = c.detected;
  j["n_labels"] = c.n_labels;
  j["n_matched"] = c.n_matched;
  j["n_clusters"] = c.per_cluster.size();
  return j;
}

}  // namespace detail

inline nlohmann::ordered_json to_json(const EvalReport& r) {
  nlohmann::ordered_json corpus = detail::boundary_json(r.boundary);
  corpus["token_f1"] = r.token.f1;
  corpus["token_precision"] = r.token.precision;
  corpus["token_recall"] = r.token.recall;
  if (r.purity) {
    corpus["purity"] = r.purity->purity;
    corpus["detected"] = r.purity->detected;
  }
  if (r.fine_purity) {
    corpus["fine_purity"] = r.fine_purity->purity;
    corpus["fine_detected"] = r.fine_purity->detected;
  }
  if (r.purity || r.fine_purity) {
    corpus["matched_segments"] = r.n_matched_segments;
    corpus["unmatched_fraction"] =
        r.n_hyp_segments > 0
            ? 1.0 - static_cast<double>(r.n_matched_segments) / static_cast<double>(r.n_hyp_segments)
            : 0.0;
  }
  nlohmann::ordered_json j;
  j["corpus"] = std::move(corpus);
  j["tolerance_s"] = r.tolerance_s;
  if (r.purity) j["clusters"] = detail::cluster_json(*r.purity);
  if (r.fine_purity) j["fine_clusters"] = detail::cluster_json(*r.fine_purity);
  auto per = nlohmann::ordered_json::array();
  for (const auto& u : r.per_utt) {
    nlohmann::ordered_json row;
    row["utt_id"] = u.utt_id;
    const auto scores = detail::boundary_json(u.boundary);
    for (const auto& [k, v] : scores.items()) row[k] = v;
    row["token_f1"] = u.token.f1;
    per.push_back(std::move(row));
  }
  j["per_utt"] = std::move(per);
  j["excluded"] = r.excluded;
  return j;
}

/// Human-readable summary table; `percent` scales ratios by 100.
inline void write_table(std::ostream& out, const EvalReport& r, bool percent) {
  const double scale = percent ? 100.0 : 1.0;
  auto row = [&](const char* name, double v) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%-18s %8.*f\n", name, percent ? 2 : 4, v * scale);
    out << buf;
  };
  out << "utterances         " << r.per_utt.size() << "\n";
  out << "boundaries ref/hyp " << r.boundary.n_ref << " / " << r.boundary.n_hyp
      << " (hits " << r.boundary.n_hit << ")\n";
  row("precision", r.boundary.precision);
  row("recall", r.boundary.recall);
  row("f1", r.boundary.f1);
  row("r_value", r.boundary.r_value);
  row("token_f1", r.token.f1);
  if (r.purity) {
    row("purity", r.purity->purity);
    out << "detected           " << r.purity->detected << " / " << r.purity->n_labels << "\n";
  }
  if (r.fine_purity) {
    row("fine_purity", r.fine_purity->purity);
    out << "fine_detected      " << r.fine_purity->detected << " / " << r.fine_purity->n_labels
        << "\n";
  }
  if (!r.excluded.empty()) out << "excluded           " << r.excluded.size() << "\n";
}

}  // namespace sylcut
