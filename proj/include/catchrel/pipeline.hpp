#pragma once

// Workspace-level operations. The CLI and the HTTP service are both thin
// wrappers over these, so every subcommand and endpoint maps to one call.

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "catchrel/curator.hpp"
#include "catchrel/evaluator.hpp"
#include "catchrel/release.hpp"
#include "catchrel/stt.hpp"
#include "catchrel/transcript.hpp"
#include "catchrel/workspace.hpp"

namespace catchrel {

using Progress = std::function<void(double)>;

// --- transcription --------------------------------------------------------

struct TranscribeRequest {
  std::string asset_id;
  std::optional<std::pair<double, double>> window;  // asset seconds; whole asset if absent
  std::optional<double> chunk_len_s;
  std::optional<double> threshold;
  std::optional<std::string> language;
  std::optional<std::string> provider;  // "offline" | "remote"
  std::optional<std::string> search_term;
  std::optional<std::string> credential_path;
  std::optional<std::string> offline_script;
  std::optional<std::string> endpoint;
};

struct TranscribeOutcome {
  Transcript transcript;  // unfiltered; the threshold is applied on read
  double threshold = kDefaultConfidenceThreshold;
  std::size_t utterances_kept = 0;
  std::vector<SearchHit> hits;
};

inline void to_json(Json& j, const TranscribeOutcome& o) {
  std::size_t failed = 0;
  for (const auto& c : o.transcript.chunks) failed += c.status == ChunkState::failed;
  j = {{"asset_id", o.transcript.asset_id},
       {"provider_id", o.transcript.provider_id},
       {"language", o.transcript.language},
       {"utterances", o.transcript.utterances.size()},
       {"utterances_kept", o.utterances_kept},
       {"threshold", o.threshold},
       {"chunks", o.transcript.chunks.size()},
       {"chunks_failed", failed},
       {"hits", o.hits}};
}

/// Builds the provider a request asks for (defined with the network code).
std::unique_ptr<SttProvider> make_provider(const Config& config, const TranscribeRequest& request);

/// Validates every transcription form field before any work starts.
inline void validate_transcribe_request(const TranscribeRequest& r, const MediaAsset& asset) {
  if (r.chunk_len_s && (*r.chunk_len_s < kMinChunkSeconds || *r.chunk_len_s > kMaxChunkSeconds)) {
    throw Error(ErrorCode::invalid_argument, "chunk length must be within [5, 59] seconds");
  }
  if (r.threshold) check_threshold(*r.threshold);
  if (r.provider && *r.provider != "offline" && *r.provider != "remote") {
    throw Error(ErrorCode::invalid_argument, "provider must be offline or remote");
  }
  if (r.window) {
    const auto [s, e] = *r.window;
    if (!(e > s)) throw Error(ErrorCode::empty_window, "transcription window is empty");
    if (s < 0.0 || e > asset.duration_s + kTimeTolerance) {
      throw Error(ErrorCode::invalid_argument, "transcription window exceeds the asset");
    }
  }
  if (r.search_term && r.search_term->find_first_not_of(" \t") == std::string::npos) {
    throw Error(ErrorCode::empty_term, "search term is empty");
  }
}

inline TranscribeOutcome run_transcribe(Workspace& ws, MediaBackend& backend, const TranscribeRequest& r,
                                        const Progress& progress = {}) {
  const auto src = ws.asset_source(r.asset_id);
  validate_transcribe_request(r, src.asset);
  const auto provider = make_provider(ws.config(), r);
  TranscribeOptions opt;
  opt.chunk_len_s = r.chunk_len_s.value_or(ws.config().chunk_len_s);
  opt.window = r.window;
  opt.language = r.language.value_or(src.asset.language.empty() ? ws.config().language : src.asset.language);
  opt.parallelism = ws.config().parallelism;
  opt.progress = progress;
  TranscribeOutcome out;
  out.transcript = transcribe(backend, src.file, src.asset, *provider, opt);
  ws.save_transcript(out.transcript);
  out.threshold = r.threshold.value_or(ws.config().confidence_threshold);
  const auto kept = filter_utterances(out.transcript, out.threshold);
  out.utterances_kept = kept.utterances.size();
  if (r.search_term) out.hits = search(kept, *r.search_term);
  return out;
}

inline std::vector<SearchHit> search_asset(const Workspace& ws, const std::string& asset_id, const std::string& term,
                                           std::optional<double> threshold) {
  const auto t = ws.load_transcript(asset_id);
  return search(filter_utterances(t, threshold.value_or(ws.config().confidence_threshold)), term);
}

// --- labels ---------------------------------------------------------------

struct LabelRequest {
  std::string dataset_id;
  std::string asset_id;
  std::string label;
  std::optional<std::string> term;  // keyword spans from the stored transcript
  std::optional<double> threshold;
  double pad_before_s = kDefaultPadBefore;
  double pad_after_s = kDefaultPadAfter;
  bool whole_video = false;
  std::vector<std::pair<double, double>> intervals;  // expert spans
  std::string note;
};

/// Records spans for later extraction; returns the spans newly added.
inline std::vector<LabelSpan> run_label(Workspace& ws, const LabelRequest& r) {
  const auto m = ws.dataset(r.dataset_id).head();
  const auto asset = ws.get_asset(r.asset_id);
  std::vector<LabelSpan> spans;
  const int modes = (r.term ? 1 : 0) + (r.whole_video ? 1 : 0) + (r.intervals.empty() ? 0 : 1);
  if (modes != 1) throw Error(ErrorCode::invalid_argument, "give exactly one of: term, whole video, intervals");
  if (r.term) {
    spans = spans_from_hits(m, search_asset(ws, r.asset_id, *r.term, r.threshold), r.label, r.pad_before_s,
                            r.pad_after_s, asset);
  } else if (r.whole_video) {
    spans.push_back(span_whole_video(m, asset, r.label));
  } else {
    require_label(m, r.label);
    for (const auto& [s, e] : r.intervals) spans.push_back({asset.asset_id, r.label, s, e, LabelSource::expert, r.note});
    spans = merge_spans(std::move(spans));
  }
  return ws.add_spans(r.dataset_id, spans);
}

// --- extraction and curation ---------------------------------------------

struct ExtractRequest {
  std::string dataset_id;
  std::optional<double> fps_cap;
  std::set<std::string> context_tags;
  std::optional<std::vector<LabelSpan>> spans;  // default: every recorded span
};

inline Json run_extract(Workspace& ws, MediaBackend& backend, const ExtractRequest& r, const Progress& progress = {}) {
  auto store = ws.dataset(r.dataset_id);
  auto frames = ws.frame_store(r.dataset_id);
  const auto spans = r.spans ? *r.spans : ws.load_spans(r.dataset_id);
  ExtractOptions opt;
  opt.fps_cap = r.fps_cap.value_or(ws.config().fps_cap);
  opt.context_tags = r.context_tags;
  opt.parallelism = ws.config().parallelism;
  ExtractionResult result;
  const auto committed = store.commit([&](const DatasetManifest& m) {
    result = extract_labeled_frames(m, spans, opt, backend, ws.resolver(), frames);
    return result.manifest;
  });
  if (progress) progress(1.0);
  Json skipped = Json::array();
  for (const auto& s : result.skipped) skipped.push_back({{"span", s.span}, {"reason", s.reason}});
  std::map<std::string, std::size_t> per_label;
  for (const auto& f : committed.frames) ++per_label[f.label];
  return {{"dataset_id", r.dataset_id},
          {"version", committed.version},
          {"spans", spans.size()},
          {"frames_added", result.added},
          {"frames_already_present", result.already_present},
          {"frames_total", committed.frames.size()},
          {"frames_per_label", per_label},
          {"cross_label_frames", result.cross_label_frames},
          {"skipped", skipped}};
}

struct CurateRequest {
  std::string dataset_id;
  std::optional<double> blur_threshold;
  std::optional<int> hamming_max;
  std::optional<std::size_t> balance_min;
  std::optional<std::size_t> balance_max;
  std::uint64_t seed = 0;
};

/// Blur filter, near-duplicate removal and balancing, committed as one version.
inline Json run_curate(Workspace& ws, const CurateRequest& r) {
  auto store = ws.dataset(r.dataset_id);
  const auto& c = ws.config();
  const auto out = store.commit([&](const DatasetManifest& m) {
    auto cur = filter_blurry(m, r.blur_threshold.value_or(c.blur_threshold));
    cur = dedup_near_duplicates(cur, r.hamming_max.value_or(c.hamming_max));
    cur = balance(cur, r.balance_min.value_or(c.balance_min), r.balance_max.value_or(c.balance_max), r.seed);
    cur.version = m.version + 1;
    cur.frames_changed_version = cur.version;
    cur.balance->ran_against_version = cur.version;
    cur.last_operation = "curate";
    return cur;
  });
  return curation_report(out);
}

struct SplitRequest {
  std::string dataset_id;
  double train_fraction = kDefaultTrainFraction;
  std::uint64_t seed = 0;
  bool normalize = true;
};

inline Json run_split(Workspace& ws, const SplitRequest& r) {
  auto store = ws.dataset(r.dataset_id);
  auto frames = ws.frame_store(r.dataset_id);
  const auto out = store.commit([&](const DatasetManifest& m) {
    auto cur = split(m, r.train_fraction, r.seed);
    if (r.normalize) {
      cur.normalization = compute_normalization(cur, frames);
    }
    return cur;
  });
  auto report = curation_report(out);
  report["normalization"] = out.normalization ? Json(*out.normalization) : Json(nullptr);
  return report;
}

inline DatasetManifest run_manual(Workspace& ws, const std::string& dataset_id, const std::vector<std::string>& ids,
                                  bool exclude, const std::string& note) {
  auto store = ws.dataset(dataset_id);
  return store.commit([&](const DatasetManifest& m) {
    return exclude ? exclude_manual(m, ids, note) : include_manual(m, ids);
  });
}

inline ReleaseSummary run_export(Workspace& ws, const std::string& dataset_id, bool include_excluded) {
  const auto m = ws.dataset(dataset_id).head();
  const auto frames = ws.frame_store(dataset_id);
  return export_release(m, frames, ws.releases_dir(), {include_excluded, ws.config().parallelism});
}

struct MergeRequest {
  std::string dataset_id;
  std::string target_label;
  std::vector<MergeInput> inputs;
  std::optional<double> fps_cap;
  std::set<std::string> context_tags;
};

inline MergeReport run_merge(Workspace& ws, MediaBackend& backend, const MergeRequest& r) {
  auto store = ws.dataset(r.dataset_id);
  auto frames = ws.frame_store(r.dataset_id);
  MergeOptions opt;
  opt.extract.fps_cap = r.fps_cap.value_or(ws.config().fps_cap);
  opt.extract.context_tags = r.context_tags;
  opt.extract.parallelism = ws.config().parallelism;
  opt.blur_threshold = ws.config().blur_threshold;
  opt.hamming_max = ws.config().hamming_max;
  MergeReport report;
  store.commit([&](const DatasetManifest& m) {
    auto res = merge_collection(m, r.inputs, r.target_label, backend, ws.resolver(), frames, opt);
    report = std::move(res.report);
    return res.manifest;
  });
  return report;
}

// --- evaluation -----------------------------------------------------------

struct EvaluateRequest {
  std::string dataset_id;
  std::vector<int> ks{1, 3};
  std::optional<std::string> subset_tag;
  SplitAssignment split = SplitAssignment::eval;
};

/// Scores `log`, stores log and report, and returns the stored report document.
inline Json run_evaluate(Workspace& ws, const EvaluateRequest& r, const PredictionLog& log) {
  const auto m = ws.dataset(r.dataset_id).head();
  if (r.ks.empty()) throw Error(ErrorCode::invalid_argument, "at least one k is required");
  const int k = *std::max_element(r.ks.begin(), r.ks.end());
  const auto report = r.subset_tag ? context_report(log, m, *r.subset_tag, k)
                                   : topk_error(log, m, k, {r.split, std::nullopt});
  Json by_k = Json::object();
  for (int kk : r.ks) {
    const auto rk = topk_error(log, m, kk, {r.split, r.subset_tag});
    by_k[std::to_string(kk)] = rk.macro_topk_error_pct;
  }
  Json doc = {{"dataset_id", r.dataset_id},
              {"manifest_version", m.version},
              {"log_id", ws.save_log(log)},
              {"report", report},
              {"macro_error_pct_by_k", by_k}};
  const auto id = ws.save_report(doc);
  doc["report_id"] = id;
  return doc;
}

inline Json run_vote(Workspace& ws, const EvaluateRequest& r, const std::vector<PredictionLog>& logs) {
  const auto m = ws.dataset(r.dataset_id).head();
  const auto records = vote_records(logs);
  auto doc = run_evaluate(ws, r, records);
  Json ids = Json::array();
  for (const auto& l : logs) ids.push_back(l.empty() ? "" : l.front().classifier_id);
  doc["voters"] = ids;
  return doc;
}

inline PredictionLog run_baseline(const Workspace& ws, const std::string& dataset_id) {
  const auto m = ws.dataset(dataset_id).head();
  const auto frames = ws.frame_store(dataset_id);
  return baseline_classify(m, frames);
}

}  // namespace catchrel
