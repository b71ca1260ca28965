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


// sylcut: batch front end for segmentation, clustering, evaluation,
// hyperparameter sweeps and synthetic corpora.
//
// Exit codes: 0 success, 1 validation/data error, 2 usage error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include <nlohmann/json.hpp>

#include "sylcut/sylcut.hpp"

namespace fs = std::filesystem;
using namespace sylcut;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitData = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CommonOpts {
  int workers = 1;
  bool verbose = false;
  bool quiet = false;
};

struct SegmentOpts {
  std::string manifest;
  std::string attention_manifest;
  double attention_quantile = 0.5;
  std::string out;
  MergeParams merge;
  SsmOptions ssm;
  std::string tier = "syllable";
  std::string dump_ssm;
  bool allow_partial = false;
};

struct ClusterOpts {
  std::string manifest;
  std::string segments;
  std::string out_model;
  std::string out;
  ClusterFitOptions fit;
  std::string tier = "syllable";
  bool allow_partial = false;
};

struct EvaluateOpts {
  std::string ref;
  std::string hyp;
  std::string tier = "syllable";
  std::optional<double> tolerance;
  bool zerospeech = false;
  std::string words;
  std::string out;
  bool percent = false;
  bool allow_partial = false;
};

struct SweepOpts {
  std::string manifest;
  std::string ref;
  std::string tier = "syllable";
  std::optional<double> tolerance;
  bool zerospeech = false;
  std::vector<double> sps_grid;
  std::vector<double> thres_grid;
  MergeParams merge;
  SsmOptions ssm;
  std::string out;
  bool allow_partial = false;
};

struct PipelineOpts {
  std::string manifest;
  std::string ref;
  std::string words;
  std::string out_dir;
  std::string tier = "syllable";
  std::optional<double> tolerance;
  bool zerospeech = false;
  MergeParams merge;
  SsmOptions ssm;
  ClusterFitOptions fit;
  bool allow_partial = false;
  bool percent = false;
};

double default_tolerance(const std::optional<double>& tol, bool zerospeech) {
  if (tol) return *tol;
  return zerospeech ? 0.03 : 0.05;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

/// Loads features in manifest order; failures are reported and either
/// tolerated or fatal depending on allow_partial.
std::vector<FeatureSequence> load_or_fail(const std::vector<ManifestEntry>& manifest, int workers,
                                          bool allow_partial) {
  std::vector<FeatureSequence> feats;
  std::size_t failed = 0;
  for (auto& o : load_features(manifest, workers)) {
    if (o.value) {
      feats.push_back(std::move(*o.value));
    } else {
      ++failed;
      log::error(o.utt_id + ": " + o.error);
    }
  }
  if (failed > 0 && !allow_partial) {
    throw DataError(std::to_string(failed) + " of " + std::to_string(manifest.size()) +
                    " utterances failed to load (use --allow-partial to continue)");
  }
  return feats;
}

void drop_alignments_without_features(std::map<std::string, Alignment>& refs,
                                      const std::vector<FeatureSequence>& feats) {
  std::map<std::string, Alignment> kept;
  std::size_t dropped = 0;
  for (auto& f : feats) {
    auto it = refs.find(f.utt_id);
    if (it != refs.end()) kept.emplace(it->first, std::move(it->second));
  }
  dropped = refs.size() - kept.size();
  if (dropped > 0) {
    log::warn(std::to_string(dropped) + " alignment utterances have no features and are ignored");
  }
  refs = std::move(kept);
}

nlohmann::ordered_json merge_json(const MergeParams& p, const SsmOptions& s) {
  return {{"sec_per_syllable", p.sec_per_syllable},
          {"merge_thres", p.merge_thres},
          {"min_segment_frames", p.min_segment_frames},
          {"mean_center", s.mean_center},
          {"max_frames", s.max_frames}};
}

// ---------------------------------------------------------------------------

int run_segment(const SegmentOpts& o, const CommonOpts& c) {
  validate(o.merge);
  const Tier tier = parse_tier(o.tier);
  const bool attention = !o.attention_manifest.empty();
  const auto manifest = read_manifest(attention ? o.attention_manifest : o.manifest);
  log::info("segmenting " + std::to_string(manifest.size()) + " utterances" +
            (attention ? " from attention" : ""));

  if (!o.dump_ssm.empty()) fs::create_directories(o.dump_ssm);
  std::vector<UttOutcome<Segmentation>> results(manifest.size());
  parallel_for(static_cast<Index>(manifest.size()), c.workers, [&](Index i) {
    const auto& e = manifest[static_cast<std::size_t>(i)];
    auto& r = results[static_cast<std::size_t>(i)];
    r.utt_id = e.utt_id;
    try {
      FeatureSequence seq = read_feature_file(e.path);
      seq.utt_id = e.utt_id;
      if (attention) {
        r.value = segments_from_attention(seq, o.attention_quantile);
      } else {
        r.value = segment_utterance(seq, o.merge, o.ssm);
        if (!o.dump_ssm.empty()) {
          write_feature_file(ssm_debug_dump(compute_ssm(seq, o.ssm), seq.frame_rate_hz),
                             fs::path(o.dump_ssm) / (e.utt_id + ".ssm.feat"));
        }
      }
    } catch (const Error& err) {
      r.value.reset();
      r.error = err.what();
    }
  });

  std::ostringstream tsv;
  std::size_t failed = 0;
  for (const auto& r : results) {
    if (r.value) {
      write_segmentation_tsv(tsv, *r.value, tier);
    } else {
      ++failed;
      log::error(r.utt_id + ": " + r.error);
    }
  }
  write_text(o.out, tsv.str());
  log::info("wrote " + o.out + " (" + std::to_string(results.size() - failed) + " utterances)");
  if (failed > 0 && !o.allow_partial) return kExitData;
  return kExitOk;
}

int run_cluster(const ClusterOpts& o, const CommonOpts& c) {
  const Tier tier = parse_tier(o.tier);
  const auto manifest = read_manifest(o.manifest);
  const auto feats = load_or_fail(manifest, c.workers, o.allow_partial);
  const auto segs = read_segmentation_tsv(fs::path(o.segments));
  const auto res = cluster_corpus(feats, segs, o.fit);
  save_cluster_model(res.model, o.out_model);
  std::ostringstream tsv;
  for (const auto& e : manifest) {
    const auto it = res.labeled.find(e.utt_id);
    if (it != res.labeled.end()) write_segmentation_tsv(tsv, it->second, tier);
  }
  write_text(o.out, tsv.str());
  log::info("clustered into k1=" + std::to_string(o.fit.k1) + " / k2=" + std::to_string(o.fit.k2) +
            "; wrote " + o.out);
  return kExitOk;
}

EvalReport evaluate_files(const std::string& ref_path, const std::string& hyp_path,
                          const std::string& words_path, Tier tier, double tol,
                          bool allow_partial) {
  const auto refs = read_alignment_tsv(fs::path(ref_path), tier);
  const auto hyps = read_segmentation_tsv(fs::path(hyp_path));
  EvalConfig cfg;
  cfg.tolerance_s = tol;
  cfg.allow_partial = allow_partial;
  if (!words_path.empty()) {
    const auto words = read_alignment_tsv(fs::path(words_path), Tier::kWord);
    const auto multi = filter_multisyllabic(refs, words);
    return evaluate_corpus(refs, hyps, cfg, &multi);
  }
  return evaluate_corpus(refs, hyps, cfg);
}

int run_evaluate(const EvaluateOpts& o, const CommonOpts&) {
  const Tier tier = parse_tier(o.tier);
  const double tol = default_tolerance(o.tolerance, o.zerospeech);
  const EvalReport rep = evaluate_files(o.ref, o.hyp, o.words, tier, tol, o.allow_partial);
  if (!o.out.empty()) write_text(o.out, to_json(rep).dump(2) + "\n");
  write_table(std::cout, rep, o.percent);
  return kExitOk;
}

int run_sweep(const SweepOpts& o, const CommonOpts& c) {
  if (o.sps_grid.empty() || o.thres_grid.empty()) throw UsageError("sweep: empty grid");
  const Tier tier = parse_tier(o.tier);
  const double tol = default_tolerance(o.tolerance, o.zerospeech);
  const auto manifest = read_manifest(o.manifest);
  const auto feats = load_or_fail(manifest, c.workers, o.allow_partial);
  auto refs = read_alignment_tsv(fs::path(o.ref), tier);
  drop_alignments_without_features(refs, feats);
  const auto res = sweep(feats, refs, o.sps_grid, o.thres_grid, tol, o.merge, o.ssm, c.workers);

  std::ostringstream table;
  table << "sec_per_syllable\tmerge_thres\tprecision\trecall\tf1\tr_value\n";
  char buf[160];
  for (const auto& p : res.points) {
    std::snprintf(buf, sizeof(buf), "%.6g\t%.6g\t%.6f\t%.6f\t%.6f\t%.6f\n", p.sec_per_syllable,
                  p.merge_thres, p.score.precision, p.score.recall, p.score.f1, p.score.r_value);
    table << buf;
  }
  if (!o.out.empty()) write_text(o.out, table.str());
  std::cout << table.str();
  std::snprintf(buf, sizeof(buf), "best\tsec_per_syllable=%.6g\tmerge_thres=%.6g\tr_value=%.6f\n",
                res.best.sec_per_syllable, res.best.merge_thres, res.best.score.r_value);
  std::cout << buf;
  return kExitOk;
}

int run_synth(const SynthSpec& s, const std::string& out_dir, const CommonOpts&) {
  const auto corpus = generate(s);
  write_synth_corpus(corpus, out_dir);
  log::info("wrote " + std::to_string(corpus.features.size()) + " utterances to " + out_dir);
  return kExitOk;
}

int run_pipeline(const PipelineOpts& o, const CommonOpts& c) {
  validate(o.merge);
  const Tier tier = parse_tier(o.tier);
  const fs::path dir(o.out_dir);
  fs::create_directories(dir);
  const double tol = default_tolerance(o.tolerance, o.zerospeech);

  nlohmann::ordered_json cfg;
  cfg["manifest"] = o.manifest;
  cfg["ref"] = o.ref;
  cfg["words"] = o.words;
  cfg["tier"] = o.tier;
  cfg["tolerance_s"] = tol;
  cfg["segment"] = merge_json(o.merge, o.ssm);
  cfg["cluster"] = {{"k1", o.fit.k1}, {"k2", o.fit.k2}, {"seed", o.fit.seed}};
  cfg["allow_partial"] = o.allow_partial;
  write_text(dir / "config.json", cfg.dump(2) + "\n");

  const auto manifest = read_manifest(o.manifest);
  const auto feats = load_or_fail(manifest, c.workers, o.allow_partial);
  const auto segs = segment_features(feats, o.merge, o.ssm, c.workers);
  std::ostringstream seg_tsv;
  for (const auto& s : segs) write_segmentation_tsv(seg_tsv, s, tier);
  write_text(dir / "segments.tsv", seg_tsv.str());

  const auto res = cluster_corpus(feats, by_utt(segs), o.fit);
  save_cluster_model(res.model, dir / "model");
  std::ostringstream asg_tsv;
  for (const auto& f : feats) write_segmentation_tsv(asg_tsv, res.labeled.at(f.utt_id), tier);
  write_text(dir / "assignments.tsv", asg_tsv.str());

  if (!o.ref.empty()) {
    const EvalReport rep = evaluate_files(o.ref, (dir / "assignments.tsv").string(), o.words,
                                          tier, tol, o.allow_partial);
    write_text(dir / "report.json", to_json(rep).dump(2) + "\n");
    write_table(std::cout, rep, o.percent);
  }
  return kExitOk;
}

std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError("bad grid value '" + item + "'");
    }
  }
  return out;
}

void add_merge_flags(CLI::App* sub, MergeParams& m, SsmOptions& s) {
  sub->add_option("--sec-per-syllable", m.sec_per_syllable,
                  "Seconds per oversegmentation unit; K = round(duration / this)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sub->add_option("--merge-thres", m.merge_thres,
                  "Merge adjacent segments while mean-feature cosine >= this")
      ->capture_default_str();
  sub->add_option("--min-segment-frames", m.min_segment_frames, "Minimum segment length in frames")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sub->add_flag("--mean-center", s.mean_center,
                "Subtract the feature mean before building the similarity matrix");
  sub->add_option("--max-frames", s.max_frames, "Largest utterance (frames) accepted")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
}

void add_tolerance_flags(CLI::App* sub, std::optional<double>& tol, bool& zerospeech) {
  sub->add_option("--tolerance", tol, "Boundary tolerance in seconds (default 0.05)")
      ->check(CLI::PositiveNumber);
  sub->add_flag("--zerospeech", zerospeech, "Use the 30 ms tolerance");
}

void add_cluster_flags(CLI::App* sub, ClusterFitOptions& f) {
  sub->add_option("--k1", f.k1, "KMeans clusters")->check(CLI::PositiveNumber)->capture_default_str();
  sub->add_option("--k2", f.k2, "Clusters after agglomeration")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sub->add_option("--seed", f.seed, "KMeans seed")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Unsupervised syllable/word segmentation by normalized min-cut"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "Key-value config file; command-line flags take precedence");

  CommonOpts common;
  app.add_option("-j,--workers", common.workers, "Worker threads")
      ->envname("SYLCUT_WORKERS")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app.add_flag("-v,--verbose", common.verbose, "Debug logging");
  app.add_flag("-q,--quiet", common.quiet, "Warnings and errors only");

  SegmentOpts seg;
  auto* seg_cmd = app.add_subcommand("segment", "Segment every utterance of a manifest");
  seg_cmd->add_option("--manifest", seg.manifest, "utt_id<TAB>feature path manifest");
  seg_cmd->add_option("--attention", seg.attention_manifest,
                      "Manifest of 1 x T attention files; segments from attention runs");
  seg_cmd->add_option("--attention-quantile", seg.attention_quantile,
                      "Weights above this quantile form attention runs")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  seg_cmd->add_option("-o,--out", seg.out, "Output segmentation TSV")->required();
  seg_cmd->add_option("--tier", seg.tier, "Tier column value")->check(CLI::IsMember({"syllable", "word"}));
  seg_cmd->add_option("--dump-ssm", seg.dump_ssm, "Directory for FEAT1 dumps of each similarity matrix");
  seg_cmd->add_flag("--allow-partial", seg.allow_partial, "Exit 0 even if some utterances fail");
  add_merge_flags(seg_cmd, seg.merge, seg.ssm);

  ClusterOpts clu;
  auto* clu_cmd = app.add_subcommand("cluster", "Two-step clustering of segments");
  clu_cmd->add_option("--manifest", clu.manifest, "Feature manifest")->required();
  clu_cmd->add_option("--segments", clu.segments, "Segmentation TSV")->required();
  clu_cmd->add_option("--model", clu.out_model, "Output model directory")->required();
  clu_cmd->add_option("-o,--out", clu.out, "Output assignment TSV")->required();
  clu_cmd->add_option("--tier", clu.tier, "Tier column value")->check(CLI::IsMember({"syllable", "word"}));
  clu_cmd->add_flag("--allow-partial", clu.allow_partial, "Skip unreadable feature files");
  add_cluster_flags(clu_cmd, clu.fit);

  EvaluateOpts ev;
  auto* ev_cmd = app.add_subcommand("evaluate", "Score hypotheses against reference alignments");
  ev_cmd->add_option("--ref", ev.ref, "Reference alignment TSV")->required();
  ev_cmd->add_option("--hyp", ev.hyp, "Hypothesis segmentation/assignment TSV")->required();
  ev_cmd->add_option("--tier", ev.tier, "Reference tier")->check(CLI::IsMember({"syllable", "word"}));
  ev_cmd->add_option("--multisyllabic-words", ev.words,
                     "Word alignment TSV; purity/detection use only syllables of multisyllabic words");
  ev_cmd->add_option("-o,--out", ev.out, "Report JSON");
  ev_cmd->add_flag("--percent", ev.percent, "Show the table in percent");
  ev_cmd->add_flag("--allow-partial", ev.allow_partial,
                   "Exclude hypotheses without a reference instead of failing");
  add_tolerance_flags(ev_cmd, ev.tolerance, ev.zerospeech);

  SweepOpts sw;
  std::string sps_text = "0.1,0.15,0.2,0.25";
  std::string thres_text = "0.3,0.4,0.5,0.6,0.7,0.8,0.9";
  auto* sw_cmd = app.add_subcommand("sweep", "Grid search over sec-per-syllable x merge-thres by R-value");
  sw_cmd->add_option("--manifest", sw.manifest, "Validation feature manifest")->required();
  sw_cmd->add_option("--ref", sw.ref, "Validation reference TSV")->required();
  sw_cmd->add_option("--tier", sw.tier, "Reference tier")->check(CLI::IsMember({"syllable", "word"}));
  sw_cmd->add_option("--sps-grid", sps_text, "Comma-separated sec-per-syllable values")->capture_default_str();
  sw_cmd->add_option("--thres-grid", thres_text, "Comma-separated merge thresholds")->capture_default_str();
  sw_cmd->add_option("-o,--out", sw.out, "Output table TSV");
  sw_cmd->add_flag("--allow-partial", sw.allow_partial, "Skip unreadable feature files");
  add_tolerance_flags(sw_cmd, sw.tolerance, sw.zerospeech);
  add_merge_flags(sw_cmd, sw.merge, sw.ssm);

  SynthSpec syn;
  std::string syn_out;
  auto* syn_cmd = app.add_subcommand("synth", "Generate a synthetic corpus with planted units");
  syn_cmd->add_option("-o,--out", syn_out, "Output directory")->required();
  syn_cmd->add_option("--n-utts", syn.n_utts)->check(CLI::PositiveNumber)->capture_default_str();
  syn_cmd->add_option("--dim", syn.dim)->check(CLI::PositiveNumber)->capture_default_str();
  syn_cmd->add_option("--frame-rate", syn.frame_rate_hz)->check(CLI::PositiveNumber)->capture_default_str();
  syn_cmd->add_option("--n-types", syn.n_types)->check(CLI::PositiveNumber)->capture_default_str();
  syn_cmd->add_option("--seg-len-min", syn.seg_len_frames.min)->check(CLI::PositiveNumber)->capture_default_str();
  syn_cmd->add_option("--seg-len-max", syn.seg_len_frames.max)->check(CLI::PositiveNumber)->capture_default_str();
  syn_cmd->add_option("--segs-min", syn.segs_per_utt.min)->check(CLI::PositiveNumber)->capture_default_str();
  syn_cmd->add_option("--segs-max", syn.segs_per_utt.max)->check(CLI::PositiveNumber)->capture_default_str();
  syn_cmd->add_option("--noise-sigma", syn.noise_sigma)->check(CLI::NonNegativeNumber)->capture_default_str();
  syn_cmd->add_option("--seed", syn.seed)->capture_default_str();

  PipelineOpts pl;
  auto* pl_cmd = app.add_subcommand("pipeline", "segment -> cluster -> evaluate into one directory");
  pl_cmd->add_option("--manifest", pl.manifest, "Feature manifest")->required();
  pl_cmd->add_option("--ref", pl.ref, "Reference alignment TSV (evaluation skipped if absent)");
  pl_cmd->add_option("--multisyllabic-words", pl.words, "Word alignment TSV for purity filtering");
  pl_cmd->add_option("-o,--out", pl.out_dir, "Output directory")->required();
  pl_cmd->add_option("--tier", pl.tier, "Tier")->check(CLI::IsMember({"syllable", "word"}));
  pl_cmd->add_flag("--allow-partial", pl.allow_partial, "Tolerate failed utterances");
  pl_cmd->add_flag("--percent", pl.percent, "Show the table in percent");
  add_tolerance_flags(pl_cmd, pl.tolerance, pl.zerospeech);
  add_merge_flags(pl_cmd, pl.merge, pl.ssm);
  add_cluster_flags(pl_cmd, pl.fit);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  if (common.verbose) log::set_level(log::Level::kDebug);
  if (common.quiet) log::set_level(log::Level::kWarning);

  try {
    if (*seg_cmd) {
      if (seg.manifest.empty() == seg.attention_manifest.empty()) {
        throw UsageError("segment: give exactly one of --manifest or --attention");
      }
      return run_segment(seg, common);
    }
    if (*clu_cmd) return run_cluster(clu, common);
    if (*ev_cmd) return run_evaluate(ev, common);
    if (*sw_cmd) {
      sw.sps_grid = parse_grid(sps_text);
      sw.thres_grid = parse_grid(thres_text);
      return run_sweep(sw, common);
    }
    if (*syn_cmd) return run_synth(syn, syn_out, common);
    if (*pl_cmd) return run_pipeline(pl, common);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ContractViolation& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const sylcut::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
