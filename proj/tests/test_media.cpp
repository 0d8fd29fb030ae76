#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "catchrel/libav_backend.hpp"
#include "catchrel/wav.hpp"
#include "support/temp_dir.hpp"

using namespace catchrel;
using catchrel::testing::TempDir;

namespace {

// Frame i is a solid gray whose level encodes which second it belongs to.
Image second_coded_frame(int i, int fps, int w, int h) {
  const auto level = static_cast<std::uint8_t>(20 + 20 * (i / fps));
  return solid_image(w, h, level, level, level);
}

std::filesystem::path make_video(const TempDir& dir, const std::string& name, double duration, int fps,
                                 int w, int h) {
  const auto path = dir / name;
  SyntheticVideoSpec spec;
  spec.duration_s = duration;
  spec.fps = fps;
  spec.width = w;
  spec.height = h;
  spec.frame = [=](int i) { return second_coded_frame(i, fps, w, h); };
  write_synthetic_video(path, spec);
  return path;
}

}  // namespace

TEST(PlanChunks, ExactTiling) {
  const auto c = plan_chunks(60, 30);
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c[0], (ChunkBounds{0, 0, 30}));
  EXPECT_EQ(c[1], (ChunkBounds{1, 30, 60}));
}

TEST(PlanChunks, ShortRemainderMergesIntoLastChunk) {
  const auto c = plan_chunks(122, 30);
  ASSERT_EQ(c.size(), 4u);
  EXPECT_EQ(c[3], (ChunkBounds{3, 90, 122}));
  EXPECT_DOUBLE_EQ(c[3].length(), 32.0);
}

TEST(PlanChunks, FiveSecondRemainderIsItsOwnChunk) {
  const auto c = plan_chunks(125, 30);
  ASSERT_EQ(c.size(), 5u);
  EXPECT_EQ(c[4], (ChunkBounds{4, 120, 125}));
}

TEST(PlanChunks, RemainderThatWouldExceedCeilingOverlaps) {
  const auto c = plan_chunks(120, 59);
  ASSERT_EQ(c.size(), 3u);
  EXPECT_EQ(c[1], (ChunkBounds{1, 59, 118}));
  EXPECT_EQ(c[2], (ChunkBounds{2, 115, 120}));
}

TEST(PlanChunks, ShortAssetIsOneChunk) {
  const auto c = plan_chunks(4, 30);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c[0], (ChunkBounds{0, 0, 4}));
}

TEST(PlanChunks, RejectsOutOfRangeLength) {
  EXPECT_THROW(plan_chunks(100, 60), Error);
  EXPECT_THROW(plan_chunks(100, 4.9), Error);
  EXPECT_THROW(plan_chunks(0, 30), Error);
}

TEST(SampleTimestamps, CountFollowsFpsArithmetic) {
  const auto t = sample_timestamps(0, 10, 2);
  ASSERT_EQ(t.size(), 20u);
  for (std::size_t i = 0; i < t.size(); ++i) EXPECT_DOUBLE_EQ(t[i], 0.5 * i);
  EXPECT_EQ(sample_timestamps(3, 13, 30).size(), 300u);
  EXPECT_EQ(sample_timestamps(1.0, 1.2, 2).size(), 1u);  // shorter than one period
  EXPECT_THROW(sample_timestamps(5, 5, 2), Error);
}

TEST(SampleTimestamps, StrictlyIncreasingInsideSpan) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> start(0, 100), len(0.01, 60), fps(0.1, 60);
  for (int trial = 0; trial < 2000; ++trial) {
    const double s = start(rng), e = s + len(rng), f = fps(rng);
    const auto t = sample_timestamps(s, e, f);
    ASSERT_FALSE(t.empty());
    EXPECT_DOUBLE_EQ(t.front(), s);
    for (std::size_t i = 0; i < t.size(); ++i) {
      EXPECT_LT(t[i], e);
      if (i) {
        EXPECT_GT(t[i], t[i - 1]);
      }
    }
  }
}

TEST(Probe, SyntheticMp4HasKnownParameters) {
  TempDir dir;
  const auto path = make_video(dir, "clip.mp4", 10.0, 30, 320, 240);
  LibavBackend backend;
  const auto a = probe(backend, path);
  EXPECT_NEAR(a.duration_s, 10.0, 0.1);
  EXPECT_NEAR(a.frame_rate, 30.0, 1e-6);
  EXPECT_EQ(a.width_px, 320);
  EXPECT_EQ(a.height_px, 240);
  EXPECT_EQ(a.container, Container::mp4);
  EXPECT_EQ(a.source_name, "clip.mp4");
  EXPECT_TRUE(is_content_id(a.asset_id));
  // Deterministic: a second probe agrees on every field.
  EXPECT_EQ(probe(backend, path), a);
}

TEST(Probe, WebmIsAccepted) {
  TempDir dir;
  const auto path = make_video(dir, "clip.webm", 3.0, 10, 64, 48);
  LibavBackend backend;
  const auto a = probe(backend, path);
  EXPECT_EQ(a.container, Container::webm);
  EXPECT_NEAR(a.duration_s, 3.0, 0.1);
  EXPECT_EQ(a.width_px, 64);
}

TEST(Probe, SameBytesSameId) {
  TempDir dir;
  const auto p = make_video(dir, "a.mp4", 2.0, 10, 64, 48);
  std::filesystem::copy_file(p, dir / "b.mp4");
  LibavBackend backend;
  EXPECT_EQ(probe(backend, p).asset_id, probe(backend, dir / "b.mp4").asset_id);
}

TEST(Probe, RejectsOtherContainers) {
  TempDir dir;
  std::ofstream(dir / "clip.avi") << "RIFF....AVI ";
  LibavBackend backend;
  try {
    probe(backend, dir / "clip.avi");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::unsupported_container);
  }
}

TEST(Probe, EmptyFileIsUnreadable) {
  TempDir dir;
  std::ofstream(dir / "empty.mp4").close();
  LibavBackend backend;
  try {
    probe(backend, dir / "empty.mp4");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::unreadable_file);
  }
}

TEST(ExtractAudio, ChunkDurationWithinFiftyMs) {
  TempDir dir;
  const auto path = make_video(dir, "long.mp4", 60.0, 5, 64, 48);
  LibavBackend backend;
  const auto a = probe(backend, path);
  const auto chunk = extract_audio(backend, path, a, {0, 0.0, 30.0}, dir / "c0.wav");
  const auto pcm = read_wav(chunk.payload_path);
  EXPECT_EQ(pcm.sample_rate, 16000);
  EXPECT_EQ(pcm.channels, 1);
  EXPECT_NEAR(pcm.duration_s(), 30.0, 0.05);
  EXPECT_THROW(extract_audio(backend, path, a, {1, 50.0, 70.0}, dir / "c1.wav"), Error);
}

TEST(ExtractAudio, ShortAssetWholeChunk) {
  TempDir dir;
  const auto path = make_video(dir, "short.mp4", 4.0, 10, 64, 48);
  LibavBackend backend;
  const auto a = probe(backend, path);
  const auto chunks = plan_chunks(a.duration_s, 30);
  ASSERT_EQ(chunks.size(), 1u);
  const auto c = extract_audio(backend, path, a, chunks[0], dir / "all.wav");
  EXPECT_NEAR(read_wav(c.payload_path).duration_s(), a.duration_s, 0.05);
  EXPECT_NEAR(a.duration_s, 4.0, 0.1);
}

TEST(ExtractAudio, ToneSurvivesResampling) {
  TempDir dir;
  SyntheticVideoSpec spec;
  spec.duration_s = 3;
  spec.fps = 5;
  spec.width = 32;
  spec.height = 32;
  spec.tone_hz = 440;
  write_synthetic_video(dir / "tone.webm", spec);
  LibavBackend backend;
  const auto a = probe(backend, dir / "tone.webm");
  const auto c = extract_audio(backend, dir / "tone.webm", a, {0, 1.0, 2.0}, dir / "t.wav");
  const auto pcm = read_wav(c.payload_path);
  double energy = 0;
  for (auto s : pcm.samples) energy += static_cast<double>(s) * s;
  const double rms = std::sqrt(energy / pcm.samples.size());
  EXPECT_NEAR(rms / 32767.0, 0.25 / std::sqrt(2.0), 0.03);
}

TEST(SampleFrames, TwoFpsOverTenSeconds) {
  TempDir dir;
  const auto path = make_video(dir, "clip.mp4", 12.0, 30, 64, 48);
  LibavBackend backend;
  const auto a = probe(backend, path);
  const auto frames = sample_frames(backend, path, a, 1.0, 11.0, 2.0);
  ASSERT_EQ(frames.size(), 20u);
  for (std::size_t i = 0; i < frames.size(); ++i) {
    EXPECT_DOUBLE_EQ(frames[i].timestamp_s, 1.0 + 0.5 * i);
    EXPECT_EQ(frames[i].pixels.width, 64);
    EXPECT_EQ(frames[i].pixels.height, 48);
    // The decoded content belongs to the right second.
    const int second = static_cast<int>(std::floor(frames[i].timestamp_s + 1e-9));
    EXPECT_NEAR(frames[i].pixels.at(32, 24)[0], 20 + 20 * second, 3) << "t=" << frames[i].timestamp_s;
  }
}

TEST(SampleFrames, FullRateAndCapLimits) {
  TempDir dir;
  const auto path = make_video(dir, "clip.mp4", 10.0, 30, 32, 32);
  LibavBackend backend;
  const auto a = probe(backend, path);
  EXPECT_EQ(sample_frames(backend, path, a, 0.0, 10.0, 30.0).size(), 300u);
  try {
    sample_frames(backend, path, a, 0.0, 10.0, 60.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::precondition);
  }
  EXPECT_THROW(sample_frames(backend, path, a, 4.0, 4.0, 2.0), Error);
  EXPECT_THROW(sample_frames(backend, path, a, 5.0, 20.0, 2.0), Error);
}
