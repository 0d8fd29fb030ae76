#pragma once

// Media adapter: the narrow surface through which the pipeline touches video.
// A `MediaBackend` does the decoding; everything else here is backend-free
// bookkeeping (container gating, chunk planning, sample timestamps).

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "catchrel/hashing.hpp"
#include "catchrel/image.hpp"
#include "catchrel/model.hpp"

namespace catchrel {

inline constexpr double kMinChunkSeconds = 5.0;
inline constexpr double kMaxChunkSeconds = 59.0;
inline constexpr double kDefaultChunkSeconds = 30.0;
inline constexpr double kDefaultFpsCap = 2.0;
inline constexpr int kAudioSampleRate = 16000;

struct ChunkBounds {
  int index = 0;
  double start_s = 0.0;
  double end_s = 0.0;

  double length() const { return end_s - start_s; }
  bool operator==(const ChunkBounds&) const = default;
};

struct AudioChunk {
  int index = 0;
  double start_s = 0.0;
  double end_s = 0.0;
  std::filesystem::path payload_path;  // mono 16 kHz 16-bit PCM WAV
};

struct DecodedFrame {
  double timestamp_s = 0.0;
  Image pixels;
};

/// Tiles [0, duration_s] into chunks of `chunk_len_s`.
///
/// Remainder rule: a tail shorter than 5 s is merged into the previous chunk
/// when the merged length stays <= 59 s; otherwise the final chunk becomes
/// [duration-5, duration] and overlaps its predecessor. An asset shorter than
/// 5 s is a single chunk.
inline std::vector<ChunkBounds> plan_chunks(double duration_s, double chunk_len_s) {
  if (!(chunk_len_s >= kMinChunkSeconds && chunk_len_s <= kMaxChunkSeconds)) {
    throw Error(ErrorCode::invalid_argument, "chunk length must be within [5, 59] s");
  }
  if (!(duration_s > 0.0) || !std::isfinite(duration_s)) {
    throw Error(ErrorCode::zero_duration, "duration must be positive");
  }
  constexpr double kEps = 1e-6;
  std::vector<ChunkBounds> out;
  const auto full = static_cast<int>(std::floor((duration_s + kEps) / chunk_len_s));
  for (int i = 0; i < full; ++i) {
    out.push_back({i, i * chunk_len_s, (i + 1) * chunk_len_s});
  }
  const double covered = full * chunk_len_s;
  const double rest = duration_s - covered;
  if (out.empty()) {
    out.push_back({0, 0.0, duration_s});
  } else if (rest <= kEps) {
    out.back().end_s = duration_s;
  } else if (rest >= kMinChunkSeconds) {
    out.push_back({full, covered, duration_s});
  } else if (chunk_len_s + rest <= kMaxChunkSeconds) {
    out.back().end_s = duration_s;
  } else {
    out.push_back({full, duration_s - kMinChunkSeconds, duration_s});
  }
  return out;
}

inline std::optional<Container> container_from_path(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (ext == ".mp4") return Container::mp4;
  if (ext == ".webm") return Container::webm;
  return std::nullopt;
}

inline std::string container_extension(Container c) { return c == Container::webm ? ".webm" : ".mp4"; }

/// Timestamps start, start+1/fps, ... strictly inside [start, end).
///
/// The count is floor(length * fps); a non-empty span shorter than one period
/// still yields its start frame (the +1 boundary case).
inline std::vector<double> sample_timestamps(double start_s, double end_s, double fps_cap) {
  const double length = end_s - start_s;
  if (!(length > 0.0)) throw Error(ErrorCode::empty_span, "span has no length");
  const auto n = std::max<long long>(1, static_cast<long long>(std::floor(length * fps_cap + 1e-9)));
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(n));
  for (long long i = 0; i < n; ++i) {
    const double t = start_s + static_cast<double>(i) / fps_cap;
    if (t >= end_s) break;
    out.push_back(t);
  }
  return out;
}

/// Decoder contract. Given a file and an interval or timestamps, produce PCM
/// or RGB output. Implementations must be safe to call concurrently on
/// distinct files.
class MediaBackend {
 public:
  virtual ~MediaBackend() = default;

  /// Fills duration, frame rate and dimensions. Identity fields (asset_id,
  /// source_name, container) are set by `probe()` below.
  virtual MediaAsset probe_stream(const std::filesystem::path& file) = 0;

  /// Writes mono 16 kHz 16-bit PCM for [start, end) to `out_wav`.
  virtual void extract_pcm(const std::filesystem::path& file, const MediaAsset& asset,
                           const ChunkBounds& bounds, const std::filesystem::path& out_wav) = 0;

  /// One frame per requested timestamp (ascending): the frame on screen at that time.
  virtual std::vector<DecodedFrame> decode_frames(const std::filesystem::path& file,
                                                  const MediaAsset& asset,
                                                  const std::vector<double>& timestamps) = 0;
};

inline MediaAsset probe(MediaBackend& backend, const std::filesystem::path& file) {
  const auto container = container_from_path(file);
  if (!container) {
    throw Error(ErrorCode::unsupported_container,
                file.filename().string() + ": only .webm and .mp4 are accepted");
  }
  std::error_code ec;
  const auto size = std::filesystem::file_size(file, ec);
  if (ec || size == 0) throw Error(ErrorCode::unreadable_file, file.string());
  auto asset = backend.probe_stream(file);
  if (!(asset.duration_s > 0.0)) throw Error(ErrorCode::zero_duration, file.string());
  asset.asset_id = file_content_id(file);
  asset.source_name = file.filename().string();
  asset.container = *container;
  return asset;
}

inline constexpr double kTimeTolerance = 1e-6;

inline AudioChunk extract_audio(MediaBackend& backend, const std::filesystem::path& file,
                                const MediaAsset& asset, const ChunkBounds& bounds,
                                const std::filesystem::path& out_wav) {
  if (!(bounds.start_s >= 0.0 && bounds.end_s > bounds.start_s &&
        bounds.end_s <= asset.duration_s + kTimeTolerance)) {
    throw Error(ErrorCode::precondition, "audio bounds outside asset duration");
  }
  backend.extract_pcm(file, asset, bounds, out_wav);
  return {bounds.index, bounds.start_s, bounds.end_s, out_wav};
}

inline std::vector<DecodedFrame> sample_frames(MediaBackend& backend, const std::filesystem::path& file,
                                               const MediaAsset& asset, double start_s, double end_s,
                                               double fps_cap) {
  if (!(fps_cap > 0.0 && fps_cap <= asset.frame_rate + 1e-9)) {
    throw Error(ErrorCode::precondition, "fps_cap must be within (0, asset frame rate]");
  }
  if (!(end_s > start_s)) throw Error(ErrorCode::empty_span, "span has no length");
  if (start_s < 0.0 || end_s > asset.duration_s + kTimeTolerance) {
    throw Error(ErrorCode::precondition, "span outside asset duration");
  }
  const auto times = sample_timestamps(start_s, end_s, fps_cap);
  auto frames = backend.decode_frames(file, asset, times);
  if (frames.size() != times.size()) {
    throw Error(ErrorCode::decode_failure, "decoder returned " + std::to_string(frames.size()) +
                                               " of " + std::to_string(times.size()) + " frames");
  }
  for (const auto& f : frames) {
    if (f.pixels.width != asset.width_px || f.pixels.height != asset.height_px) {
      throw Error(ErrorCode::decode_failure, "decoded frame dimensions differ from probe");
    }
  }
  return frames;
}

}  // namespace catchrel
