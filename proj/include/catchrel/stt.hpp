#pragma once

// Speech-to-text orchestration: chunk the asset's audio, hand each chunk to a
// provider, and reassemble a time-rebased transcript. Provider failures on a
// chunk are recorded and the rest proceed; credential and reachability
// failures abort the whole job.

#include <algorithm>
#include <atomic>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "catchrel/media.hpp"
#include "catchrel/transcript.hpp"

namespace catchrel {

/// One recognized stretch of speech. Times are chunk-relative; absent times
/// mean the provider gave no word timings and the segment spans its chunk.
struct RecognizedSegment {
  std::string text;
  double confidence = 0.0;
  std::optional<double> start_s;
  std::optional<double> end_s;
};

class SttProvider {
 public:
  virtual ~SttProvider() = default;
  virtual std::string provider_id() const = 0;
  /// Must be safe to call concurrently.
  virtual std::vector<RecognizedSegment> recognize(const MediaAsset& asset, const AudioChunk& chunk,
                                                   const std::string& language) = 0;
};

enum class ProviderKind { offline, remote };

struct SttProviderConfig {
  std::string provider_id;
  ProviderKind kind = ProviderKind::offline;
  std::optional<std::string> endpoint;
  std::optional<std::filesystem::path> credential_path;
  std::string language;
};

inline void validate_provider_config(const SttProviderConfig& c) {
  if (c.kind == ProviderKind::remote) {
    if (!c.endpoint || c.endpoint->empty() || !c.credential_path) {
      throw Error(ErrorCode::invalid_argument, "remote provider needs an endpoint and a credential key file");
    }
  } else if (c.endpoint || c.credential_path) {
    throw Error(ErrorCode::invalid_argument, "offline provider takes no endpoint or credentials");
  }
}

/// Deterministic provider driven by a JSON script:
///
///   {"provider_id": "...",
///    "chunks":   {"0": [{"text", "confidence", "start_s"?, "end_s"?}], ...},
///    "failures": [2],
///    "assets":   {"<asset_id or source_name>": {"chunks": {...}, "failures": [...]}}}
///
/// Times are chunk-relative. Per-asset entries override the top-level script.
class OfflineProvider final : public SttProvider {
 public:
  explicit OfflineProvider(Json script) : script_(std::move(script)) {
    if (!script_.is_object()) throw Error(ErrorCode::parse_error, "offline script must be a JSON object");
  }

  static OfflineProvider from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::not_found, "offline script " + path.string());
    try {
      return OfflineProvider(Json::parse(in));
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::parse_error, path.string() + ": " + e.what());
    }
  }

  std::string provider_id() const override { return script_.value("provider_id", "offline"); }

  std::vector<RecognizedSegment> recognize(const MediaAsset& asset, const AudioChunk& chunk,
                                           const std::string& /*language*/) override {
    const Json* scope = &script_;
    if (script_.contains("assets")) {
      const auto& assets = script_["assets"];
      if (assets.contains(asset.asset_id)) scope = &assets[asset.asset_id];
      else if (assets.contains(asset.source_name)) scope = &assets[asset.source_name];
    }
    const auto failures = scope->value("failures", std::vector<int>{});
    if (std::find(failures.begin(), failures.end(), chunk.index) != failures.end()) {
      throw Error(ErrorCode::provider_error, "scripted failure on chunk " + std::to_string(chunk.index));
    }
    std::vector<RecognizedSegment> out;
    const auto key = std::to_string(chunk.index);
    if (!scope->contains("chunks") || !(*scope)["chunks"].contains(key)) return out;
    for (const auto& seg : (*scope)["chunks"][key]) {
      RecognizedSegment s;
      s.text = seg.at("text").get<std::string>();
      s.confidence = seg.at("confidence").get<double>();
      if (seg.contains("start_s")) s.start_s = seg["start_s"].get<double>();
      if (seg.contains("end_s")) s.end_s = seg["end_s"].get<double>();
      out.push_back(std::move(s));
    }
    return out;
  }

 private:
  Json script_;
};

struct TranscribeOptions {
  double chunk_len_s = kDefaultChunkSeconds;
  std::optional<std::pair<double, double>> window;  // asset seconds
  std::string language;
  int parallelism = 2;
  std::function<void(double)> progress;  // fraction of chunks finished
  std::filesystem::path work_dir;        // chunk WAVs; a temp dir if empty
};

/// Converts provider segments for one chunk into asset-time utterances.
inline std::vector<Utterance> rebase_segments(const std::vector<RecognizedSegment>& segments,
                                              const ChunkBounds& chunk) {
  std::vector<Utterance> out;
  for (const auto& seg : segments) {
    if (!(seg.confidence >= 0.0 && seg.confidence <= 1.0)) {
      throw Error(ErrorCode::provider_error, "confidence outside [0,1]");
    }
    Utterance u;
    u.text = seg.text;
    u.confidence = seg.confidence;
    if (seg.start_s && seg.end_s) {
      u.start_s = std::clamp(chunk.start_s + *seg.start_s, chunk.start_s, chunk.end_s);
      u.end_s = std::clamp(chunk.start_s + *seg.end_s, chunk.start_s, chunk.end_s);
    } else {
      u.start_s = chunk.start_s;
      u.end_s = chunk.end_s;
    }
    if (!(u.start_s < u.end_s)) throw Error(ErrorCode::provider_error, "segment has no extent inside its chunk");
    out.push_back(std::move(u));
  }
  return out;
}

inline std::vector<ChunkBounds> plan_window_chunks(const MediaAsset& asset, const TranscribeOptions& opt) {
  double start = 0.0;
  double end = asset.duration_s;
  if (opt.window) {
    std::tie(start, end) = *opt.window;
    if (!(end > start)) throw Error(ErrorCode::empty_window, "transcription window is empty");
    if (start < 0.0 || end > asset.duration_s + kTimeTolerance) {
      throw Error(ErrorCode::precondition, "transcription window outside asset duration");
    }
    end = std::min(end, asset.duration_s);
  }
  auto chunks = plan_chunks(end - start, opt.chunk_len_s);
  for (auto& c : chunks) {
    c.start_s += start;
    c.end_s += start;
  }
  return chunks;
}

inline Transcript transcribe(MediaBackend& backend, const std::filesystem::path& file, const MediaAsset& asset,
                             SttProvider& provider, const TranscribeOptions& opt) {
  const auto chunks = plan_window_chunks(asset, opt);

  std::filesystem::path work = opt.work_dir;
  bool own_work = false;
  if (work.empty()) {
    work = std::filesystem::temp_directory_path() /
           ("catchrel-stt-" + asset.asset_id + "-" + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id())));
    own_work = true;
  }
  std::filesystem::create_directories(work);

  std::vector<std::vector<Utterance>> per_chunk(chunks.size());
  std::vector<ChunkStatus> status(chunks.size());
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> finished{0};
  std::atomic<bool> abort{false};
  std::exception_ptr fatal;
  std::mutex guard;

  auto worker = [&] {
    while (!abort) {
      const auto i = next++;
      if (i >= chunks.size()) return;
      const auto& b = chunks[i];
      status[i] = {b.index, b.start_s, b.end_s, ChunkState::ok, {}};
      try {
        const auto wav = work / ("chunk-" + std::to_string(b.index) + ".wav");
        const auto audio = extract_audio(backend, file, asset, b, wav);
        per_chunk[i] = rebase_segments(provider.recognize(asset, audio, opt.language), b);
        std::filesystem::remove(wav);
      } catch (const Error& e) {
        if (e.code() == ErrorCode::credential_invalid || e.code() == ErrorCode::provider_unreachable) {
          std::lock_guard lock(guard);
          if (!fatal) fatal = std::current_exception();
          abort = true;
          return;
        }
        status[i].status = ChunkState::failed;
        status[i].detail = e.what();
      } catch (const std::exception& e) {
        status[i].status = ChunkState::failed;
        status[i].detail = e.what();
      }
      const auto done = ++finished;
      if (opt.progress) {
        std::lock_guard lock(guard);
        opt.progress(static_cast<double>(done) / static_cast<double>(chunks.size()));
      }
    }
  };

  {
    const auto n = static_cast<std::size_t>(std::max(1, opt.parallelism));
    std::vector<std::jthread> pool;
    for (std::size_t k = 0; k < std::min(n, chunks.size()); ++k) pool.emplace_back(worker);
  }
  if (own_work) {
    std::error_code ec;
    std::filesystem::remove_all(work, ec);
  }
  if (fatal) std::rethrow_exception(fatal);

  Transcript t;
  t.asset_id = asset.asset_id;
  t.provider_id = provider.provider_id();
  t.language = opt.language;
  for (auto& u : per_chunk) t.utterances.insert(t.utterances.end(), u.begin(), u.end());
  std::stable_sort(t.utterances.begin(), t.utterances.end(),
                   [](const Utterance& a, const Utterance& b) { return a.start_s < b.start_s; });
  t.chunks = std::move(status);
  return t;
}

}  // namespace catchrel
