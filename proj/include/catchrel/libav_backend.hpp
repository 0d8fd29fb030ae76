#pragma once

// In-process decoder backend over libavformat/libavcodec. Compiled separately
// (link target `catchrel::media`); the header-only core never depends on it.

#include <filesystem>
#include <functional>

#include "catchrel/media.hpp"

namespace catchrel {

class LibavBackend final : public MediaBackend {
 public:
  MediaAsset probe_stream(const std::filesystem::path& file) override;
  void extract_pcm(const std::filesystem::path& file, const MediaAsset& asset,
                   const ChunkBounds& bounds, const std::filesystem::path& out_wav) override;
  std::vector<DecodedFrame> decode_frames(const std::filesystem::path& file, const MediaAsset& asset,
                                          const std::vector<double>& timestamps) override;
};

/// Parameters for a generated test video. Container is chosen by extension
/// (.mp4: MPEG-4 Part 2 + AAC, .webm: VP8 + Opus).
struct SyntheticVideoSpec {
  double duration_s = 10.0;
  int fps = 30;
  int width = 320;
  int height = 240;
  std::function<Image(int frame_index)> frame;  // defaults to mid-gray
  bool with_audio = true;
  double tone_hz = 0.0;  // 0 => silence
};

void write_synthetic_video(const std::filesystem::path& path, const SyntheticVideoSpec& spec);

}  // namespace catchrel
