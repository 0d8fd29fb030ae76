#pragma once

// On-disk workspace shared by the CLI and the HTTP service:
//
//   <root>/catchrel.json               configuration
//   <root>/assets/<asset_id>.<ext>     ingested media (+ <asset_id>.json probe record)
//   <root>/transcripts/<asset_id>.json
//   <root>/datasets/<dataset_id>/      manifest store, frames/, spans.jsonl
//   <root>/logs/<log_id>.jsonl         uploaded prediction logs
//   <root>/reports/<report_id>.json    evaluation reports
//   <root>/releases/<dataset>-v<N>/    exported snapshots
//   <root>/jobs/<job_id>.json          service job records
//
// Every id reaching a path is checked against a strict pattern first, so no
// request can name a file outside its own area.

#include <filesystem>
#include <fstream>
#include <mutex>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "catchrel/config.hpp"
#include "catchrel/evaluator.hpp"
#include "catchrel/frame_store.hpp"
#include "catchrel/labeler.hpp"
#include "catchrel/manifest_store.hpp"
#include "catchrel/media.hpp"
#include "catchrel/model.hpp"

namespace catchrel {

inline bool is_dataset_id(std::string_view id) { return id.size() <= 64 && is_valid_slug(id); }

inline void require_dataset_id(std::string_view id) {
  if (!is_dataset_id(id)) {
    throw Error(ErrorCode::invalid_argument, "dataset id must be lowercase alphanumeric plus hyphen");
  }
}

inline void require_content_id(std::string_view id, const char* what) {
  if (!is_content_id(id)) throw Error(ErrorCode::not_found, std::string(what) + " '" + std::string(id) + "'");
}

class Workspace {
 public:
  /// Opens `root`, creating the directory skeleton if needed.
  static Workspace open(const std::filesystem::path& root) {
    std::error_code ec;
    for (const char* d : {"assets", "transcripts", "datasets", "logs", "reports", "releases", "jobs"}) {
      std::filesystem::create_directories(root / d, ec);
      if (ec) throw Error(ErrorCode::unwritable_directory, (root / d).string() + ": " + ec.message());
    }
    return Workspace(std::filesystem::weakly_canonical(root), load_config(root));
  }

  const std::filesystem::path& root() const { return root_; }
  const Config& config() const { return config_; }
  Config& config() { return config_; }

  std::filesystem::path releases_dir() const { return root_ / "releases"; }
  std::filesystem::path jobs_dir() const { return root_ / "jobs"; }

  // --- assets -----------------------------------------------------------

  /// Probes `file`, then copies it in under its content id. Re-ingesting the
  /// same bytes returns the existing record.
  MediaAsset ingest(MediaBackend& backend, const std::filesystem::path& file, const std::string& site_note = {},
                    const std::string& source_name = {}) {
    auto asset = probe(backend, file);
    if (!source_name.empty()) asset.source_name = source_name;
    if (!site_note.empty()) {
      if (text_contains_coordinates(site_note)) {
        throw Error(ErrorCode::invalid_argument, "site notes may not contain coordinates");
      }
      asset.site_note = site_note;
    }
    if (asset.language.empty()) asset.language = config_.language;
    std::lock_guard lock(mu_);
    const auto dest = asset_file(asset);
    if (std::filesystem::exists(asset_record(asset.asset_id))) return get_asset(asset.asset_id);
    const auto tmp = dest.string() + ".tmp";
    std::error_code ec;
    std::filesystem::copy_file(file, tmp, std::filesystem::copy_options::overwrite_existing, ec);
    if (ec) throw Error(ErrorCode::io_error, "copy " + file.string() + ": " + ec.message());
    std::filesystem::rename(tmp, dest);
    detail::write_text_atomic(asset_record(asset.asset_id), Json(asset).dump(2) + "\n");
    return asset;
  }

  MediaAsset get_asset(const std::string& id) const {
    require_content_id(id, "asset");
    const auto rec = asset_record(id);
    if (!std::filesystem::exists(rec)) throw Error(ErrorCode::not_found, "asset '" + id + "'");
    return Json::parse(detail::read_text(rec)).get<MediaAsset>();
  }

  std::vector<MediaAsset> list_assets() const {
    std::vector<MediaAsset> out;
    for (const auto& e : std::filesystem::directory_iterator(root_ / "assets")) {
      if (e.path().extension() == ".json" && is_content_id(e.path().stem().string())) {
        out.push_back(get_asset(e.path().stem().string()));
      }
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.asset_id < b.asset_id; });
    return out;
  }

  std::filesystem::path asset_file(const MediaAsset& a) const {
    return root_ / "assets" / (a.asset_id + container_extension(a.container));
  }

  AssetSource asset_source(const std::string& id) const {
    auto a = get_asset(id);
    auto file = asset_file(a);
    return {std::move(a), std::move(file)};
  }

  AssetResolver resolver() const {
    return [this](const std::string& id) { return asset_source(id); };
  }

  // --- transcripts ------------------------------------------------------

  void save_transcript(const Transcript& t) {
    require_content_id(t.asset_id, "asset");
    detail::write_text_atomic(root_ / "transcripts" / (t.asset_id + ".json"), Json(t).dump(2) + "\n");
  }

  Transcript load_transcript(const std::string& asset_id) const {
    require_content_id(asset_id, "asset");
    const auto p = root_ / "transcripts" / (asset_id + ".json");
    if (!std::filesystem::exists(p)) throw Error(ErrorCode::not_found, "no transcript for asset '" + asset_id + "'");
    return Json::parse(detail::read_text(p)).get<Transcript>();
  }

  // --- datasets ---------------------------------------------------------

  std::filesystem::path dataset_dir(const std::string& id) const {
    require_dataset_id(id);
    return root_ / "datasets" / id;
  }

  ManifestStore create_dataset(const std::string& id, const std::vector<Category>& categories) {
    auto store = ManifestStore::create(dataset_dir(id), id);
    if (!categories.empty()) {
      store.commit([&](const DatasetManifest& m) { return register_categories(m, categories); });
    }
    return store;
  }

  ManifestStore dataset(const std::string& id) const {
    const auto dir = dataset_dir(id);
    if (!std::filesystem::exists(dir / "HEAD")) throw Error(ErrorCode::not_found, "dataset '" + id + "'");
    return ManifestStore::open(dir);
  }

  std::vector<std::string> list_datasets() const {
    std::vector<std::string> out;
    for (const auto& e : std::filesystem::directory_iterator(root_ / "datasets")) {
      const auto name = e.path().filename().string();
      if (is_dataset_id(name) && std::filesystem::exists(e.path() / "HEAD")) out.push_back(name);
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  DirectoryFrameStore frame_store(const std::string& dataset_id) const {
    return DirectoryFrameStore(dataset_dir(dataset_id) / "frames");
  }

  /// Spans recorded for later extraction.
  std::vector<LabelSpan> load_spans(const std::string& dataset_id) const {
    const auto p = dataset_dir(dataset_id) / "spans.jsonl";
    if (!std::filesystem::exists(p)) return {};
    std::ifstream in(p);
    return read_spans_jsonl(in);
  }

  /// Appends spans after checking labels against the dataset head. Spans that
  /// are already recorded are skipped; returns those actually added.
  std::vector<LabelSpan> add_spans(const std::string& dataset_id, const std::vector<LabelSpan>& spans) {
    const auto m = dataset(dataset_id).head();
    for (const auto& s : spans) {
      require_label(m, s.label);
      if (!(s.end_s > s.start_s)) throw Error(ErrorCode::empty_span, s.asset_id + " " + s.label);
      const auto a = get_asset(s.asset_id);
      if (s.start_s < 0.0 || s.end_s > a.duration_s + kTimeTolerance) {
        throw Error(ErrorCode::precondition, "span outside asset duration");
      }
    }
    std::lock_guard lock(mu_);
    auto existing = load_spans(dataset_id);
    std::vector<LabelSpan> added;
    for (const auto& s : spans) {
      if (std::find(existing.begin(), existing.end(), s) != existing.end()) continue;
      existing.push_back(s);
      added.push_back(s);
    }
    std::ostringstream out;
    write_spans_jsonl(out, existing);
    detail::write_text_atomic(dataset_dir(dataset_id) / "spans.jsonl", out.str());
    return added;
  }

  // --- logs and reports -------------------------------------------------

  std::string save_log(const PredictionLog& log) {
    std::ostringstream out;
    write_prediction_log(out, log);
    const auto text = out.str();
    const auto id = content_id(text);
    detail::write_text_atomic(root_ / "logs" / (id + ".jsonl"), text);
    return id;
  }

  PredictionLog load_log(const std::string& id) const {
    require_content_id(id, "log");
    const auto p = root_ / "logs" / (id + ".jsonl");
    if (!std::filesystem::exists(p)) throw Error(ErrorCode::not_found, "log '" + id + "'");
    std::ifstream in(p);
    return read_prediction_log(in);
  }

  std::string save_report(const Json& report) {
    const auto text = report.dump(2) + "\n";
    const auto id = content_id(text);
    detail::write_text_atomic(root_ / "reports" / (id + ".json"), text);
    return id;
  }

  Json load_report(const std::string& id) const {
    require_content_id(id, "report");
    const auto p = root_ / "reports" / (id + ".json");
    if (!std::filesystem::exists(p)) throw Error(ErrorCode::not_found, "report '" + id + "'");
    return Json::parse(detail::read_text(p));
  }

 private:
  Workspace(std::filesystem::path root, Config config) : root_(std::move(root)), config_(std::move(config)) {}

  std::filesystem::path asset_record(const std::string& id) const { return root_ / "assets" / (id + ".json"); }

  std::filesystem::path root_;
  Config config_;
  mutable std::mutex mu_;
};

}  // namespace catchrel
