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

// Readers and writers for everything that crosses a process boundary:
// FEAT1 feature files, alignment/segmentation TSVs and corpus manifests.
//
// FEAT1 layout (little-endian throughout):
//   bytes 0..5    "FEAT1\n"
//   bytes 6..9    uint32 header length H
//   bytes 10..    H bytes of UTF-8 JSON
//                 {"utt_id","num_frames","dim","frame_rate_hz","layer","source"}
//   then          num_frames*dim float32, frame-major

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "sylcut/error.hpp"
#include "sylcut/log.hpp"

namespace sylcut {

using Index = std::ptrdiff_t;
using FrameMatrix =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct FeatureSequence {
  std::string utt_id;
  FrameMatrix frames;  // T x D
  double frame_rate_hz = 50.0;
  int layer = 0;
  std::string source;

  Index num_frames() const { return frames.rows(); }
  Index dim() const { return frames.cols(); }
  double duration_seconds() const {
    return static_cast<double>(num_frames()) / frame_rate_hz;
  }
};

/// Throws DataError/ValidationError if `seq` breaks a FeatureSequence
/// invariant (empty matrix, non-finite value, bad frame rate).
inline void validate(const FeatureSequence& seq) {
  if (seq.num_frames() < 1 || seq.dim() < 1) {
    throw ValidationError("feature sequence '" + seq.utt_id +
                          "' must have at least one frame and one dim");
  }
  if (!(seq.frame_rate_hz > 0.0) || !std::isfinite(seq.frame_rate_hz)) {
    throw ValidationError("feature sequence '" + seq.utt_id +
                          "' has non-positive frame rate");
  }
  if (seq.layer < 0) {
    throw ValidationError("feature sequence '" + seq.utt_id +
                          "' has negative layer");
  }
  if (!seq.frames.allFinite()) {
    throw DataError("feature sequence '" + seq.utt_id +
                    "' contains NaN or Inf");
  }
}

// ---------------------------------------------------------------------------
// Frame <-> seconds. Frame i covers [i/fr, (i+1)/fr); boundary b sits at b/fr.

inline double frame_to_seconds(Index b, double frame_rate_hz) {
  return static_cast<double>(b) / frame_rate_hz;
}

namespace detail {
// Seconds read back from 6-decimal TSVs land within ~1e-5 frames of a frame
// edge; anything closer than this snaps to the edge.
inline constexpr double kFrameSnap = 1e-3;
}  // namespace detail

/// Largest frame edge <= t (with snapping).
inline Index seconds_to_frame_floor(double t, double frame_rate_hz) {
  const double x = t * frame_rate_hz;
  const double r = std::round(x);
  if (std::abs(x - r) < detail::kFrameSnap) return static_cast<Index>(r);
  return static_cast<Index>(std::floor(x));
}

/// Smallest frame edge >= t (with snapping).
inline Index seconds_to_frame_ceil(double t, double frame_rate_hz) {
  const double x = t * frame_rate_hz;
  const double r = std::round(x);
  if (std::abs(x - r) < detail::kFrameSnap) return static_cast<Index>(r);
  return static_cast<Index>(std::ceil(x));
}

// ---------------------------------------------------------------------------
// Alignments and segmentations.

enum class Tier { kSyllable, kWord };

inline std::string_view tier_name(Tier t) {
  return t == Tier::kSyllable ? "syllable" : "word";
}

inline Tier parse_tier(std::string_view s) {
  if (s == "syllable") return Tier::kSyllable;
  if (s == "word") return Tier::kWord;
  throw ParseError("unknown tier '" + std::string(s) + "'");
}

struct AlignmentEntry {
  double start_s = 0.0;
  double end_s = 0.0;
  std::string label;
};

struct Alignment {
  std::string utt_id;
  Tier tier = Tier::kSyllable;
  std::vector<AlignmentEntry> entries;
};

struct Span {
  double start_s = 0.0;
  double end_s = 0.0;
  double length() const { return end_s - start_s; }
};

/// Contiguous tiling of [0, duration]. `labels` is either empty or holds one
/// label per segment (cluster ids for assignments); `fine_ids` likewise.
struct Segmentation {
  std::string utt_id;
  std::vector<double> boundaries_s;
  std::vector<std::string> labels;
  std::vector<std::string> fine_ids;

  Index num_segments() const {
    return boundaries_s.empty() ? 0 : static_cast<Index>(boundaries_s.size()) - 1;
  }
  double duration_seconds() const {
    return boundaries_s.empty() ? 0.0 : boundaries_s.back();
  }
  Span segment(Index i) const {
    return {boundaries_s[static_cast<std::size_t>(i)],
            boundaries_s[static_cast<std::size_t>(i) + 1]};
  }
  std::vector<Span> segments() const {
    std::vector<Span> out;
    out.reserve(static_cast<std::size_t>(std::max<Index>(num_segments(), 0)));
    for (Index i = 0; i < num_segments(); ++i) out.push_back(segment(i));
    return out;
  }
  /// Boundaries without the utterance edges 0 and duration.
  std::vector<double> interior_boundaries() const {
    if (boundaries_s.size() <= 2) return {};
    return {boundaries_s.begin() + 1, boundaries_s.end() - 1};
  }
};

inline void validate(const Segmentation& seg) {
  const auto& b = seg.boundaries_s;
  if (b.size() < 2) {
    throw ValidationError("segmentation '" + seg.utt_id +
                          "' needs at least one segment");
  }
  if (b.front() != 0.0) {
    throw ValidationError("segmentation '" + seg.utt_id +
                          "' does not start at 0");
  }
  for (std::size_t i = 1; i < b.size(); ++i) {
    if (!(b[i] > b[i - 1]) || !std::isfinite(b[i])) {
      throw ValidationError("segmentation '" + seg.utt_id +
                            "' boundaries are not strictly increasing");
    }
  }
  const auto n = static_cast<std::size_t>(seg.num_segments());
  if (!seg.labels.empty() && seg.labels.size() != n) {
    throw ValidationError("segmentation '" + seg.utt_id +
                          "' label count does not match segment count");
  }
  if (!seg.fine_ids.empty() && seg.fine_ids.size() != n) {
    throw ValidationError("segmentation '" + seg.utt_id +
                          "' fine id count does not match segment count");
  }
}

/// Builds a segmentation from frame boundaries 0 = b_0 < ... < b_K = T.
inline Segmentation segmentation_from_frames(std::string utt_id,
                                             const std::vector<Index>& frames,
                                             double frame_rate_hz) {
  Segmentation seg;
  seg.utt_id = std::move(utt_id);
  seg.boundaries_s.reserve(frames.size());
  for (Index b : frames) seg.boundaries_s.push_back(frame_to_seconds(b, frame_rate_hz));
  validate(seg);
  return seg;
}

inline void validate(const Alignment& ali) {
  for (std::size_t i = 0; i < ali.entries.size(); ++i) {
    const auto& e = ali.entries[i];
    if (!std::isfinite(e.start_s) || !std::isfinite(e.end_s) ||
        !(e.start_s < e.end_s)) {
      throw ValidationError("alignment '" + ali.utt_id + "' entry " +
                            std::to_string(i) + " has start >= end");
    }
    if (i > 0) {
      if (e.start_s < ali.entries[i - 1].start_s) {
        throw ValidationError("alignment '" + ali.utt_id +
                              "' entries are not sorted");
      }
      if (e.start_s < ali.entries[i - 1].end_s) {
        throw ValidationError("alignment '" + ali.utt_id + "' entries " +
                              std::to_string(i - 1) + " and " +
                              std::to_string(i) + " overlap");
      }
    }
  }
}

// ---------------------------------------------------------------------------
// FEAT1

namespace detail {

inline constexpr std::array<char, 6> kFeatMagic = {'F', 'E', 'A', 'T', '1', '\n'};

inline std::uint32_t load_u32_le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

inline void store_u32_le(std::uint32_t v, unsigned char* p) {
  p[0] = static_cast<unsigned char>(v & 0xFFu);
  p[1] = static_cast<unsigned char>((v >> 8) & 0xFFu);
  p[2] = static_cast<unsigned char>((v >> 16) & 0xFFu);
  p[3] = static_cast<unsigned char>((v >> 24) & 0xFFu);
}

inline float load_f32_le(const unsigned char* p) {
  return std::bit_cast<float>(load_u32_le(p));
}

inline void store_f32_le(float v, unsigned char* p) {
  store_u32_le(std::bit_cast<std::uint32_t>(v), p);
}

inline std::string feat_header_json(const FeatureSequence& seq) {
  nlohmann::ordered_json h;
  h["utt_id"] = seq.utt_id;
  h["num_frames"] = seq.num_frames();
  h["dim"] = seq.dim();
  h["frame_rate_hz"] = seq.frame_rate_hz;
  h["layer"] = seq.layer;
  h["source"] = seq.source;
  return h.dump();
}

}  // namespace detail

/// Serializes `seq` to FEAT1 bytes. Validates first; nothing is produced for
/// an invalid sequence.
inline std::string encode_feature_bytes(const FeatureSequence& seq) {
  validate(seq);
  const std::string header = detail::feat_header_json(seq);
  const auto n = static_cast<std::size_t>(seq.frames.size());
  std::string out;
  out.resize(detail::kFeatMagic.size() + 4 + header.size() + 4 * n);
  auto* p = reinterpret_cast<unsigned char*>(out.data());
  std::memcpy(p, detail::kFeatMagic.data(), detail::kFeatMagic.size());
  p += detail::kFeatMagic.size();
  detail::store_u32_le(static_cast<std::uint32_t>(header.size()), p);
  p += 4;
  std::memcpy(p, header.data(), header.size());
  p += header.size();
  const float* src = seq.frames.data();  // row-major == frame-major
  for (std::size_t i = 0; i < n; ++i, p += 4) detail::store_f32_le(src[i], p);
  return out;
}

inline FeatureSequence decode_feature_bytes(std::string_view bytes,
                                            const std::string& origin = "<memory>") {
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::size_t size = bytes.size();
  if (size < detail::kFeatMagic.size() ||
      std::memcmp(p, detail::kFeatMagic.data(), detail::kFeatMagic.size()) != 0) {
    throw FormatError(origin + ": bad magic, not a FEAT1 file");
  }
  if (size < detail::kFeatMagic.size() + 4) {
    throw TruncationError(origin + ": truncated before header length");
  }
  const std::uint32_t hlen = detail::load_u32_le(p + detail::kFeatMagic.size());
  const std::size_t payload_off = detail::kFeatMagic.size() + 4 + hlen;
  if (size < payload_off) {
    throw TruncationError(origin + ": truncated inside JSON header");
  }
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(bytes.substr(detail::kFeatMagic.size() + 4, hlen));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(origin + ": malformed JSON header: " + e.what());
  }
  FeatureSequence seq;
  std::int64_t num_frames = 0;
  std::int64_t dim = 0;
  try {
    seq.utt_id = h.at("utt_id").get<std::string>();
    num_frames = h.at("num_frames").get<std::int64_t>();
    dim = h.at("dim").get<std::int64_t>();
    seq.frame_rate_hz = h.at("frame_rate_hz").get<double>();
    seq.layer = h.at("layer").get<int>();
    seq.source = h.at("source").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(origin + ": incomplete FEAT1 header: " + e.what());
  }
  if (num_frames < 1 || dim < 1) {
    throw FormatError(origin + ": header declares an empty matrix");
  }
  const auto count = static_cast<std::size_t>(num_frames) * static_cast<std::size_t>(dim);
  const std::size_t payload = size - payload_off;
  if (payload != 4 * count) {
    throw TruncationError(origin + ": header declares " + std::to_string(count) +
                          " values but payload holds " + std::to_string(payload) +
                          " bytes");
  }
  seq.frames.resize(num_frames, dim);
  float* dst = seq.frames.data();
  const unsigned char* src = p + payload_off;
  for (std::size_t i = 0; i < count; ++i, src += 4) dst[i] = detail::load_f32_le(src);
  if (!seq.frames.allFinite()) {
    throw DataError(origin + ": payload contains NaN or Inf");
  }
  validate(seq);
  return seq;
}

inline FeatureSequence read_feature_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open feature file " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_feature_bytes(bytes, path.string());
}

inline void write_feature_file(const FeatureSequence& seq,
                               const std::filesystem::path& path) {
  const std::string bytes = encode_feature_bytes(seq);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// TSV

namespace detail {

inline std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find('\t', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

inline std::string_view strip_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

inline double parse_seconds(std::string_view s, const std::string& where) {
  const std::string str(s);
  if (str.empty()) throw ParseError(where + ": empty time field");
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(str, &used);
  } catch (const std::exception&) {
    throw ParseError(where + ": non-numeric time '" + str + "'");
  }
  if (used != str.size() || !std::isfinite(v)) {
    throw ParseError(where + ": non-numeric time '" + str + "'");
  }
  return v;
}

inline std::string format_seconds(double t) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", t);
  return buf;
}

struct TsvRow {
  std::size_t line_no = 0;
  std::string utt_id;
  std::string tier;
  double start_s = 0.0;
  double end_s = 0.0;
  std::string label;
  std::string extra;
};

inline std::vector<TsvRow> parse_tsv_rows(std::istream& in, const std::string& origin) {
  std::vector<TsvRow> rows;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = strip_cr(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto cols = split_tabs(line);
    const std::string where = origin + ":" + std::to_string(line_no);
    if (cols.size() < 4) {
      throw ParseError(where + ": expected at least 4 tab-separated columns");
    }
    TsvRow row;
    row.line_no = line_no;
    row.utt_id = std::string(cols[0]);
    row.tier = std::string(cols[1]);
    row.start_s = parse_seconds(cols[2], where);
    row.end_s = parse_seconds(cols[3], where);
    if (cols.size() > 4) row.label = std::string(cols[4]);
    if (cols.size() > 5) row.extra = std::string(cols[5]);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace detail

/// Reads the rows of `tier` from an alignment TSV, grouped per utterance and
/// sorted by start time. Overlaps are reported, never repaired.
inline std::map<std::string, Alignment> read_alignment_tsv(std::istream& in, Tier tier,
                                                           const std::string& origin = "<stream>") {
  const auto rows = detail::parse_tsv_rows(in, origin);
  std::map<std::string, std::vector<const detail::TsvRow*>> grouped;
  for (const auto& r : rows) {
    if (r.tier != tier_name(tier)) continue;
    grouped[r.utt_id].push_back(&r);
  }
  std::map<std::string, Alignment> out;
  for (auto& [utt, rs] : grouped) {
    std::stable_sort(rs.begin(), rs.end(), [](const auto* a, const auto* b) {
      return a->start_s < b->start_s;
    });
    Alignment ali;
    ali.utt_id = utt;
    ali.tier = tier;
    for (std::size_t i = 0; i < rs.size(); ++i) {
      const auto* r = rs[i];
      if (!(r->start_s < r->end_s)) {
        throw ValidationError(origin + ": utterance '" + utt + "' row at line " +
                              std::to_string(r->line_no) + " has start >= end");
      }
      if (i > 0 && r->start_s < rs[i - 1]->end_s) {
        throw ValidationError(origin + ": utterance '" + utt +
                              "' has overlapping rows at lines " +
                              std::to_string(rs[i - 1]->line_no) + " and " +
                              std::to_string(r->line_no));
      }
      ali.entries.push_back({r->start_s, r->end_s, r->label});
    }
    out.emplace(utt, std::move(ali));
  }
  return out;
}

inline std::map<std::string, Alignment> read_alignment_tsv(const std::filesystem::path& path,
                                                           Tier tier) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open alignment file " + path.string());
  return read_alignment_tsv(in, tier, path.string());
}

inline void write_alignment_tsv(std::ostream& out, const Alignment& ali) {
  for (const auto& e : ali.entries) {
    out << ali.utt_id << '\t' << tier_name(ali.tier) << '\t'
        << detail::format_seconds(e.start_s) << '\t'
        << detail::format_seconds(e.end_s) << '\t' << e.label << '\n';
  }
}

/// One row per segment; label column empty unless the segmentation carries
/// labels, and a trailing "fine=<id>" column when fine ids are present.
inline void write_segmentation_tsv(std::ostream& out, const Segmentation& seg,
                                   Tier tier = Tier::kSyllable) {
  for (Index i = 0; i < seg.num_segments(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    out << seg.utt_id << '\t' << tier_name(tier) << '\t'
        << detail::format_seconds(seg.boundaries_s[k]) << '\t'
        << detail::format_seconds(seg.boundaries_s[k + 1]) << '\t';
    if (!seg.labels.empty()) out << seg.labels[k];
    if (!seg.fine_ids.empty()) out << "\tfine=" << seg.fine_ids[k];
    out << '\n';
  }
}

/// Reads a segmentation/assignment TSV. Rows of one utterance must be
/// contiguous in time and start at 0; the tier column is not interpreted.
inline std::map<std::string, Segmentation> read_segmentation_tsv(
    std::istream& in, const std::string& origin = "<stream>") {
  const auto rows = detail::parse_tsv_rows(in, origin);
  std::map<std::string, std::vector<const detail::TsvRow*>> grouped;
  for (const auto& r : rows) grouped[r.utt_id].push_back(&r);
  std::map<std::string, Segmentation> out;
  for (auto& [utt, rs] : grouped) {
    std::stable_sort(rs.begin(), rs.end(), [](const auto* a, const auto* b) {
      return a->start_s < b->start_s;
    });
    Segmentation seg;
    seg.utt_id = utt;
    bool any_label = false;
    bool any_fine = false;
    for (const auto* r : rs) {
      any_label = any_label || !r->label.empty();
      any_fine = any_fine || r->extra.rfind("fine=", 0) == 0;
    }
    seg.boundaries_s.push_back(rs.front()->start_s);
    for (std::size_t i = 0; i < rs.size(); ++i) {
      const auto* r = rs[i];
      if (r->start_s != seg.boundaries_s.back()) {
        throw ValidationError(origin + ": utterance '" + utt + "' row at line " +
                              std::to_string(r->line_no) +
                              " leaves a gap or overlap");
      }
      seg.boundaries_s.push_back(r->end_s);
      if (any_label) seg.labels.push_back(r->label);
      if (any_fine) {
        seg.fine_ids.push_back(r->extra.rfind("fine=", 0) == 0 ? r->extra.substr(5) : "");
      }
    }
    try {
      validate(seg);
    } catch (const ValidationError& e) {
      throw ValidationError(origin + ": " + e.what());
    }
    out.emplace(utt, std::move(seg));
  }
  return out;
}

inline std::map<std::string, Segmentation> read_segmentation_tsv(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open segmentation file " + path.string());
  return read_segmentation_tsv(in, path.string());
}

// ---------------------------------------------------------------------------
// Manifest

struct ManifestEntry {
  std::string utt_id;
  std::filesystem::path path;
};

/// Relative feature paths are resolved against `base_dir`.
inline std::vector<ManifestEntry> read_manifest(std::istream& in,
                                                const std::filesystem::path& base_dir = {},
                                                const std::string& origin = "<stream>") {
  std::vector<ManifestEntry> out;
  std::unordered_set<std::string> seen;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = detail::strip_cr(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string_view::npos || tab == 0 || tab + 1 == line.size()) {
      throw ParseError(origin + ":" + std::to_string(line_no) +
                       ": expected utt_id<TAB>path");
    }
    std::string utt(line.substr(0, tab));
    std::filesystem::path p(std::string(line.substr(tab + 1)));
    if (!seen.insert(utt).second) {
      throw ManifestError(origin + ":" + std::to_string(line_no) +
                          ": duplicate utt_id '" + utt + "'");
    }
    if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
    out.push_back({std::move(utt), std::move(p)});
  }
  return out;
}

inline std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  return read_manifest(in, path.parent_path(), path.string());
}

inline void write_manifest(std::ostream& out, const std::vector<ManifestEntry>& entries) {
  for (const auto& e : entries) out << e.utt_id << '\t' << e.path.generic_string() << '\n';
}

}  // namespace sylcut
