#pragma once

// Release snapshots and secondary-collection merges.
//
// Export re-encodes every image from decoded pixels, so whatever metadata the
// stored files carried (EXIF, XMP, GPS, text chunks) cannot survive. The
// scanner below is the independent check that nothing slipped through.

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <thread>
#include <unistd.h>
#include <vector>

#include "catchrel/curator.hpp"
#include "catchrel/labeler.hpp"
#include "catchrel/manifest_store.hpp"
#include "catchrel/png.hpp"

namespace catchrel {

struct ReleaseSummary {
  std::filesystem::path root;
  std::string dataset_id;
  std::int64_t version = 0;
  std::size_t frames_exported = 0;
  std::size_t frames_quarantined = 0;
  std::map<std::string, std::size_t> per_category;  // exported (kept) frames
  std::string digest;                               // sha256 over the tree listing
};

inline void to_json(Json& j, const ReleaseSummary& s) {
  j = {{"root", s.root.string()},
       {"dataset_id", s.dataset_id},
       {"version", s.version},
       {"frames_exported", s.frames_exported},
       {"frames_quarantined", s.frames_quarantined},
       {"per_category", s.per_category},
       {"digest", s.digest}};
}

inline std::string release_dir_name(const DatasetManifest& m) {
  return m.dataset_id + "-v" + std::to_string(m.version);
}

/// SHA-256 over "<sha256(file)>  <relative path>\n" lines for every regular
/// file below `root` except DIGEST itself, in byte order of the paths.
inline std::string tree_digest(const std::filesystem::path& root) {
  std::vector<std::string> rel;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    auto r = std::filesystem::relative(e.path(), root).generic_string();
    if (r != "DIGEST") rel.push_back(std::move(r));
  }
  std::sort(rel.begin(), rel.end());
  Sha256 h;
  for (const auto& r : rel) h.update(file_sha256_hex(root / r)).update("  ").update(r).update("\n");
  return h.hex_digest();
}

namespace detail {

inline void write_json_file(const std::filesystem::path& p, const Json& j) {
  write_text_atomic(p, j.dump(2) + "\n");
}

template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto run = [&] {
    for (auto i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next = n;
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    const auto k = std::min<std::size_t>(static_cast<std::size_t>(std::max(1, workers)), std::max<std::size_t>(1, n));
    for (std::size_t t = 0; t + 1 < k; ++t) pool.emplace_back(run);
    run();
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace detail

struct ExportOptions {
  bool include_excluded = false;
  int parallelism = 2;
};

/// Writes `<out_root>/<dataset>-v<N>/` with frames, manifest, split lists,
/// normalization and counts. Same manifest version in, same bytes out.
inline ReleaseSummary export_release(const DatasetManifest& m, const FrameStore& store,
                                     const std::filesystem::path& out_root, const ExportOptions& opt = {}) {
  namespace fs = std::filesystem;
  if (auto v = validate_manifest(m); !v.empty()) {
    std::vector<std::string> details;
    for (const auto& x : v) details.push_back(x.field + ": " + x.rule);
    throw Error(ErrorCode::invalid_manifest, "manifest is invalid", details);
  }
  if (!m.balance_valid()) throw Error(ErrorCode::precondition, "balance has not been run on the current frames");
  if (!m.split_recorded()) throw Error(ErrorCode::precondition, "no train/eval split recorded");

  const auto final_dir = out_root / release_dir_name(m);
  const auto staging = out_root / ("." + release_dir_name(m) + ".tmp-" + std::to_string(::getpid()));
  std::error_code ec;
  fs::create_directories(out_root, ec);
  fs::remove_all(staging, ec);
  fs::create_directories(staging / "frames", ec);
  if (ec || !fs::is_directory(staging)) {
    throw Error(ErrorCode::unwritable_directory, out_root.string() + (ec ? ": " + ec.message() : ""));
  }

  try {
    std::vector<const FrameRecord*> frames;
    for (const auto& f : m.frames) {
      if (!f.excluded || opt.include_excluded) frames.push_back(&f);
    }
    std::set<std::string> dirs;
    for (const auto* f : frames) dirs.insert((f->excluded ? "quarantine/" : "frames/") + f->label);
    for (const auto& d : dirs) fs::create_directories(staging / d);

    detail::parallel_for(frames.size(), opt.parallelism, [&](std::size_t i) {
      const auto& f = *frames[i];
      const auto pixels = store.read(f.label, f.frame_id);  // decode: metadata is left behind here
      write_file_bytes(staging / (f.excluded ? "quarantine" : "frames") / f.label / (f.frame_id + ".png"),
                       encode_png(pixels));
    });

    ReleaseSummary s;
    s.dataset_id = m.dataset_id;
    s.version = m.version;
    Json reasons = Json::object();
    Json train = Json::array(), eval = Json::array();
    for (const auto& f : m.frames) {
      if (f.excluded) {
        if (opt.include_excluded) {
          reasons[f.frame_id] = {{"label", f.label}, {"reason", f.exclusion_reason}, {"note", f.note}};
          ++s.frames_quarantined;
        }
        continue;
      }
      ++s.frames_exported;
      ++s.per_category[f.label];
    }
    for (const auto& [id, which] : m.split) (which == SplitAssignment::train ? train : eval).push_back(id);
    if (opt.include_excluded) detail::write_json_file(staging / "quarantine" / "reasons.json", reasons);

    detail::write_text_atomic(staging / "manifest.json", serialize_manifest(m));
    detail::write_json_file(staging / "splits.json", {{"seed", m.split_seed},
                                                      {"train_fraction", *m.split_fraction},
                                                      {"prng", SplitMix64::kName},
                                                      {"train", train},
                                                      {"eval", eval}});
    auto report = curation_report(m);
    detail::write_json_file(
        staging / "summary.json",
        {{"dataset_id", m.dataset_id},
         {"version", m.version},
         {"frames", s.frames_exported},
         {"quarantined", s.frames_quarantined},
         {"categories", report["categories"]},
         {"normalization", m.normalization ? Json(*m.normalization) : Json(nullptr)},
         {"balance", {{"min", m.balance_min}, {"max", m.balance_max}, {"deficient", m.balance->deficient}}}});
    s.digest = tree_digest(staging);
    detail::write_text_atomic(staging / "DIGEST", s.digest + "\n");

    fs::remove_all(final_dir, ec);
    fs::rename(staging, final_dir);
    s.root = final_dir;
    return s;
  } catch (...) {
    fs::remove_all(staging, ec);
    throw;
  }
}

struct MetadataFinding {
  std::filesystem::path file;
  std::string what;
};

/// PNG chunk types a scrubbed image may contain: pixels and structure only.
inline bool png_chunk_allowed(const std::string& type) {
  return type == "IHDR" || type == "PLTE" || type == "IDAT" || type == "IEND";
}

inline std::vector<MetadataFinding> scan_png_bytes(const std::filesystem::path& file,
                                                   std::span<const std::uint8_t> bytes) {
  std::vector<MetadataFinding> out;
  try {
    for (const auto& c : png_chunks(bytes)) {
      if (!png_chunk_allowed(c.type)) out.push_back({file, "png chunk " + c.type});
    }
  } catch (const Error& e) {
    out.push_back({file, std::string("unparseable png: ") + e.what()});
  }
  // Raw signatures catch metadata embedded anywhere, e.g. inside an unknown container.
  static constexpr std::string_view kMarkers[] = {
      std::string_view("Exif\0\0", 6), "http://ns.adobe.com/xap", "GPSLatitude", "<x:xmpmeta"};
  const std::string_view text(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  for (const auto mark : kMarkers) {
    if (text.find(mark) != std::string_view::npos) out.push_back({file, "metadata signature"});
  }
  return out;
}

/// Walks a release tree: images may hold only pixel chunks, JSON files may not
/// carry location-shaped keys or coordinate text, and nothing else may appear.
inline std::vector<MetadataFinding> scan_release(const std::filesystem::path& root) {
  std::vector<MetadataFinding> out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    const auto ext = e.path().extension().string();
    const auto name = e.path().filename().string();
    if (ext == ".png") {
      const auto bytes = read_file_bytes(e.path());
      auto found = scan_png_bytes(e.path(), bytes);
      out.insert(out.end(), found.begin(), found.end());
    } else if (ext == ".json") {
      Json j;
      try {
        j = Json::parse(detail::read_text(e.path()));
      } catch (const Json::exception&) {
        out.push_back({e.path(), "unparseable json"});
        continue;
      }
      for (const auto& k : find_location_keys(j)) out.push_back({e.path(), "location key " + k});
      std::vector<const Json*> stack{&j};
      while (!stack.empty()) {
        const auto* v = stack.back();
        stack.pop_back();
        if (v->is_string() && text_contains_coordinates(v->get_ref<const std::string&>())) {
          out.push_back({e.path(), "coordinate text"});
        }
        if (v->is_structured()) {
          for (const auto& child : *v) stack.push_back(&child);
        }
      }
    } else if (name != "DIGEST") {
      out.push_back({e.path(), "unexpected file type"});
    }
  }
  return out;
}

// --- merging a secondary collection -------------------------------------

struct MergeInput {
  std::string asset_id;
  std::vector<std::pair<double, double>> intervals;  // empty => whole video
};

struct MergeCategoryDelta {
  std::size_t kept_before = 0;
  std::size_t kept_after = 0;
  std::size_t balance_excluded_before = 0;
  std::size_t balance_excluded_after = 0;
  bool deficient_before = false;
  bool deficient_after = false;
};

struct MergeReport {
  std::string target_label;
  std::size_t frames_added = 0;
  std::size_t excluded_blur = 0;
  std::size_t excluded_duplicate = 0;
  std::vector<SkippedSpan> skipped;
  std::map<std::string, MergeCategoryDelta> categories;  // only categories that changed
  std::vector<std::string> clamp_changed;                // balance outcome differs
};

inline void to_json(Json& j, const MergeReport& r) {
  Json cats = Json::object();
  for (const auto& [slug, d] : r.categories) {
    cats[slug] = {{"kept_before", d.kept_before},
                  {"kept_after", d.kept_after},
                  {"delta", static_cast<long long>(d.kept_after) - static_cast<long long>(d.kept_before)},
                  {"balance_excluded_before", d.balance_excluded_before},
                  {"balance_excluded_after", d.balance_excluded_after},
                  {"deficient_before", d.deficient_before},
                  {"deficient_after", d.deficient_after}};
  }
  Json skipped = Json::array();
  for (const auto& s : r.skipped) skipped.push_back({{"span", s.span}, {"reason", s.reason}});
  j = {{"target_label", r.target_label},
       {"frames_added", r.frames_added},
       {"excluded_blur", r.excluded_blur},
       {"excluded_duplicate", r.excluded_duplicate},
       {"skipped", skipped},
       {"categories", cats},
       {"clamp_changed", r.clamp_changed}};
}

struct MergeOptions {
  ExtractOptions extract;
  double blur_threshold = kDefaultBlurThreshold;
  int hamming_max = kDefaultHammingMax;
};

struct MergeResult {
  DatasetManifest manifest;
  MergeReport report;
};

namespace detail {

inline std::map<std::string, MergeCategoryDelta> category_state(const DatasetManifest& m) {
  std::map<std::string, MergeCategoryDelta> out;
  for (const auto& c : m.categories) out[c.slug];
  for (const auto& f : m.frames) {
    if (!f.excluded) ++out[f.label].kept_before;
    if (f.exclusion_reason == ExclusionReason::balance) ++out[f.label].balance_excluded_before;
  }
  if (m.balance_valid()) {
    for (const auto& s : m.balance->deficient) out[s].deficient_before = true;
  }
  return out;
}

}  // namespace detail

/// Extracts new material for `target_label`, curates only the new frames, then
/// re-runs balance and split with the dataset's stored parameters. The result
/// is a single new version; pre-existing records change only in balance flags.
inline MergeResult merge_collection(const DatasetManifest& m, const std::vector<MergeInput>& inputs,
                                    const std::string& target_label, MediaBackend& backend,
                                    const AssetResolver& resolve, FrameStore& store, const MergeOptions& opt = {}) {
  require_label(m, target_label);
  MergeResult result{m, {}};
  result.report.target_label = target_label;
  if (inputs.empty()) return result;

  std::vector<LabelSpan> spans;
  for (const auto& in : inputs) {
    const auto src = resolve(in.asset_id);
    if (in.intervals.empty()) {
      spans.push_back(span_whole_video(m, src.asset, target_label));
      continue;
    }
    for (const auto& [s, e] : in.intervals) spans.push_back({in.asset_id, target_label, s, e, LabelSource::expert, ""});
  }
  spans = merge_spans(std::move(spans));

  const auto before = detail::category_state(m);
  auto extracted = extract_labeled_frames(m, spans, opt.extract, backend, resolve, store);
  result.report.skipped = extracted.skipped;
  result.report.frames_added = extracted.added;
  auto cur = std::move(extracted.manifest);
  if (cur == m) return result;

  std::set<std::string> fresh;
  {
    std::set<std::string> old;
    for (const auto& f : m.frames) old.insert(f.frame_id);
    for (const auto& f : cur.frames) {
      if (!old.contains(f.frame_id)) fresh.insert(f.frame_id);
    }
  }
  cur = dedup_near_duplicates(filter_blurry(cur, opt.blur_threshold, &fresh), opt.hamming_max, &fresh);
  for (const auto& f : cur.frames) {
    if (!fresh.contains(f.frame_id)) continue;
    result.report.excluded_blur += f.exclusion_reason == ExclusionReason::blur;
    result.report.excluded_duplicate += f.exclusion_reason == ExclusionReason::duplicate;
  }
  if (m.balance) {
    cur = balance(cur, m.balance->min_count, m.balance->max_count, m.balance->seed);
  }
  if (m.split_recorded() && (!m.balance || cur.balance_valid())) {
    cur = split(cur, *m.split_fraction, m.split_seed);
  }

  // Collapse the intermediate versions into one.
  const auto v = m.version + 1;
  if (cur.frames_changed_version > m.version) cur.frames_changed_version = v;
  if (cur.balance && cur.balance->ran_against_version > m.version) cur.balance->ran_against_version = v;
  cur.version = v;
  cur.last_operation = "merge_collection";

  auto after = detail::category_state(cur);
  for (auto& [slug, d] : after) {
    const auto& b = before.count(slug) ? before.at(slug) : MergeCategoryDelta{};
    MergeCategoryDelta delta{b.kept_before, d.kept_before, b.balance_excluded_before, d.balance_excluded_before,
                             b.deficient_before, d.deficient_before};
    if (delta.kept_before != delta.kept_after || delta.balance_excluded_before != delta.balance_excluded_after ||
        delta.deficient_before != delta.deficient_after) {
      result.report.categories[slug] = delta;
    }
    if (delta.balance_excluded_before != delta.balance_excluded_after ||
        delta.deficient_before != delta.deficient_after) {
      result.report.clamp_changed.push_back(slug);
    }
  }
  result.manifest = std::move(cur);
  return result;
}

}  // namespace catchrel
