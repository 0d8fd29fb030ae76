#pragma once

// Transcript evidence and expert annotation -> label spans -> labeled frames.
// Extraction samples each span at the fps cap and stores whole frames; there
// is no cropping or segmentation anywhere in this path.

#include <algorithm>
#include <cmath>
#include <functional>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "catchrel/frame_store.hpp"
#include "catchrel/hashing.hpp"
#include "catchrel/image_metrics.hpp"
#include "catchrel/manifest.hpp"
#include "catchrel/media.hpp"
#include "catchrel/transcript.hpp"

namespace catchrel {

inline constexpr double kDefaultPadBefore = 2.0;
inline constexpr double kDefaultPadAfter = 5.0;

inline void require_label(const DatasetManifest& m, const std::string& label) {
  if (!m.has_category(label)) throw Error(ErrorCode::unregistered_label, "label '" + label + "' is not registered");
}

/// Union of overlapping spans that share asset and label. Output is ordered by
/// (asset, label, start).
inline std::vector<LabelSpan> merge_spans(std::vector<LabelSpan> spans) {
  std::sort(spans.begin(), spans.end(), [](const LabelSpan& a, const LabelSpan& b) {
    return std::tie(a.asset_id, a.label, a.start_s, a.end_s) < std::tie(b.asset_id, b.label, b.start_s, b.end_s);
  });
  std::vector<LabelSpan> out;
  for (auto& s : spans) {
    if (!out.empty() && out.back().asset_id == s.asset_id && out.back().label == s.label &&
        s.start_s <= out.back().end_s) {
      out.back().end_s = std::max(out.back().end_s, s.end_s);
      if (!s.note.empty() && out.back().note.find(s.note) == std::string::npos) {
        out.back().note += (out.back().note.empty() ? "" : "; ") + s.note;
      }
    } else {
      out.push_back(std::move(s));
    }
  }
  return out;
}

/// Each hit padded by (pad_before, pad_after), clamped to the asset, and
/// overlapping results merged.
inline std::vector<LabelSpan> spans_from_hits(const DatasetManifest& m, const std::vector<SearchHit>& hits,
                                              const std::string& label, double pad_before_s, double pad_after_s,
                                              const MediaAsset& asset) {
  require_label(m, label);
  if (!(pad_before_s >= 0.0 && pad_after_s >= 0.0)) {
    throw Error(ErrorCode::invalid_argument, "pads must be non-negative");
  }
  std::vector<LabelSpan> spans;
  for (const auto& h : hits) {
    LabelSpan s;
    s.asset_id = asset.asset_id;
    s.label = label;
    s.start_s = std::clamp(h.start_s - pad_before_s, 0.0, asset.duration_s);
    s.end_s = std::clamp(h.end_s + pad_after_s, 0.0, asset.duration_s);
    s.source = LabelSource::keyword;
    s.note = h.matched_token;
    if (s.end_s > s.start_s) spans.push_back(std::move(s));
  }
  return merge_spans(std::move(spans));
}

/// One clip, one plant: the whole asset carries the label.
inline LabelSpan span_whole_video(const DatasetManifest& m, const MediaAsset& asset, const std::string& label) {
  require_label(m, label);
  if (!(asset.duration_s > 0.0)) throw Error(ErrorCode::zero_duration, asset.asset_id);
  return {asset.asset_id, label, 0.0, asset.duration_s, LabelSource::whole_video, {}};
}

/// JSON-lines import/export so annotators can work off-site.
inline void write_spans_jsonl(std::ostream& out, const std::vector<LabelSpan>& spans) {
  for (const auto& s : spans) out << Json(s).dump() << '\n';
}

inline std::vector<LabelSpan> read_spans_jsonl(std::istream& in) {
  std::vector<LabelSpan> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(Json::parse(line).get<LabelSpan>());
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::parse_error, "span line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

struct AssetSource {
  MediaAsset asset;
  std::filesystem::path file;
};

using AssetResolver = std::function<AssetSource(const std::string& asset_id)>;

struct ExtractOptions {
  double fps_cap = kDefaultFpsCap;
  std::set<std::string> context_tags;
  int parallelism = 2;
  std::size_t decode_batch = 64;  // frames decoded per backend call
};

struct SkippedSpan {
  LabelSpan span;
  std::string reason;
};

struct ExtractionResult {
  DatasetManifest manifest;
  std::size_t added = 0;
  std::size_t already_present = 0;
  std::vector<SkippedSpan> skipped;
  std::vector<std::string> cross_label_frames;  // new frames sharing (asset, time) with another label
};

/// Identity of an extracted frame: asset, label, timestamp (us) and pixels.
inline std::string frame_content_id(const std::string& asset_id, const std::string& label, double timestamp_s,
                                    const Image& pixels) {
  Sha256 h;
  h.update(asset_id).update("|").update(label).update("|");
  h.update(std::to_string(std::llround(timestamp_s * 1e6))).update("|");
  h.update(pixels.bytes());
  return h.hex_digest().substr(0, kIdLength);
}

/// Calls `on_frame` for every sampled frame of [start, end) at `fps_cap`,
/// decoding in batches so memory stays bounded on long spans.
template <typename OnFrame>
void for_each_sampled_frame(MediaBackend& backend, const AssetSource& src, double start_s, double end_s,
                            double fps_cap, std::size_t batch, OnFrame&& on_frame) {
  // Validation and the first batch go through sample_frames' checks.
  const auto times = sample_timestamps(start_s, end_s, fps_cap);
  if (!(fps_cap > 0.0 && fps_cap <= src.asset.frame_rate + 1e-9)) {
    throw Error(ErrorCode::precondition, "fps_cap must be within (0, asset frame rate]");
  }
  if (start_s < 0.0 || end_s > src.asset.duration_s + kTimeTolerance) {
    throw Error(ErrorCode::precondition, "span outside asset duration");
  }
  for (std::size_t i = 0; i < times.size(); i += batch) {
    std::vector<double> part(times.begin() + static_cast<std::ptrdiff_t>(i),
                             times.begin() + static_cast<std::ptrdiff_t>(std::min(times.size(), i + batch)));
    auto frames = backend.decode_frames(src.file, src.asset, part);
    if (frames.size() != part.size()) throw Error(ErrorCode::decode_failure, "decoder dropped frames");
    for (auto& f : frames) {
      if (f.pixels.width != src.asset.width_px || f.pixels.height != src.asset.height_px) {
        throw Error(ErrorCode::decode_failure, "decoded frame dimensions differ from probe");
      }
      on_frame(std::move(f));
    }
  }
}

inline ExtractionResult extract_labeled_frames(const DatasetManifest& m, const std::vector<LabelSpan>& spans,
                                               const ExtractOptions& opt, MediaBackend& backend,
                                               const AssetResolver& resolve, FrameStore& store) {
  for (const auto& s : spans) {
    require_label(m, s.label);
    if (!(s.end_s > s.start_s)) throw Error(ErrorCode::empty_span, s.asset_id + " " + s.label);
  }
  if (!(opt.fps_cap > 0.0)) throw Error(ErrorCode::precondition, "fps_cap must be positive");

  // Resolve assets up front; fps validity is a precondition, not a skip.
  std::map<std::string, AssetSource> sources;
  for (const auto& s : spans) {
    if (sources.contains(s.asset_id)) continue;
    auto src = resolve(s.asset_id);
    if (opt.fps_cap > src.asset.frame_rate + 1e-9) {
      throw Error(ErrorCode::precondition, "fps_cap exceeds frame rate of asset " + s.asset_id);
    }
    sources.emplace(s.asset_id, std::move(src));
  }

  struct SpanOutput {
    std::vector<FrameRecord> records;
    std::optional<std::string> failure;
  };
  std::vector<SpanOutput> outputs(spans.size());
  std::set<std::string> known;
  for (const auto& f : m.frames) known.insert(f.frame_id);

  // Spans of one asset run sequentially in one worker; assets run in parallel.
  std::map<std::string, std::vector<std::size_t>> by_asset;
  for (std::size_t i = 0; i < spans.size(); ++i) by_asset[spans[i].asset_id].push_back(i);
  std::vector<const std::vector<std::size_t>*> jobs;
  for (const auto& [id, idx] : by_asset) jobs.push_back(&idx);

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (auto j = next++; j < jobs.size(); j = next++) {
      for (const auto i : *jobs[j]) {
        const auto& span = spans[i];
        const auto& src = sources.at(span.asset_id);
        try {
          for_each_sampled_frame(backend, src, span.start_s, std::min(span.end_s, src.asset.duration_s), opt.fps_cap,
                                 std::max<std::size_t>(1, opt.decode_batch), [&](DecodedFrame f) {
                                   FrameRecord r;
                                   r.frame_id = frame_content_id(span.asset_id, span.label, f.timestamp_s, f.pixels);
                                   r.asset_id = span.asset_id;
                                   r.timestamp_s = f.timestamp_s;
                                   r.label = span.label;
                                   if (!known.contains(r.frame_id)) {
                                     r.blur_score = blur_score(f.pixels);
                                     r.perceptual_hash = perceptual_hash(f.pixels);
                                     r.context_tags = opt.context_tags;
                                     store.write(span.label, r.frame_id, f.pixels);
                                   }
                                   outputs[i].records.push_back(std::move(r));
                                 });
        } catch (const Error& e) {
          if (e.code() != ErrorCode::decode_failure && e.code() != ErrorCode::unreadable_file) throw;
          outputs[i].records.clear();
          outputs[i].failure = e.what();
        }
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    const auto n = std::min<std::size_t>(std::max(1, opt.parallelism), jobs.size());
    for (std::size_t k = 0; k + 1 < n; ++k) pool.emplace_back(worker);
    worker();
  }

  ExtractionResult result;
  DatasetManifest out = next_version(m, "extract_labeled_frames");
  std::map<std::pair<std::string, long long>, std::set<std::string>> labels_at;
  for (const auto& f : m.frames) labels_at[{f.asset_id, std::llround(f.timestamp_s * 1e6)}].insert(f.label);
  bool assets_added = false;
  for (const auto& [id, src] : sources) {
    if (!out.find_asset(id)) {
      out.assets.push_back(src.asset);
      assets_added = true;
    }
  }
  for (std::size_t i = 0; i < spans.size(); ++i) {
    if (outputs[i].failure) {
      result.skipped.push_back({spans[i], *outputs[i].failure});
      continue;
    }
    for (auto& r : outputs[i].records) {
      if (known.contains(r.frame_id)) {
        ++result.already_present;
        continue;
      }
      known.insert(r.frame_id);
      auto& at = labels_at[{r.asset_id, std::llround(r.timestamp_s * 1e6)}];
      if (!at.empty() && !at.contains(r.label)) result.cross_label_frames.push_back(r.frame_id);
      at.insert(r.label);
      out.frames.push_back(std::move(r));
      ++result.added;
    }
  }
  if (result.added == 0 && !assets_added) {
    result.manifest = m;
    return result;
  }
  if (result.added > 0) mark_frames_changed(out);
  result.manifest = std::move(out);
  return result;
}

}  // namespace catchrel
