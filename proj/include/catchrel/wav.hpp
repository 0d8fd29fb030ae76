#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "catchrel/error.hpp"

namespace catchrel {

struct PcmAudio {
  int sample_rate = 16000;
  int channels = 1;
  std::vector<std::int16_t> samples;  // interleaved

  double duration_s() const {
    return channels > 0 && sample_rate > 0
               ? static_cast<double>(samples.size()) / channels / sample_rate
               : 0.0;
  }
};

namespace detail {
inline void put_u32(std::ofstream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v), static_cast<char>(v >> 8), static_cast<char>(v >> 16),
                     static_cast<char>(v >> 24)};
  out.write(b, 4);
}
inline void put_u16(std::ofstream& out, std::uint16_t v) {
  const char b[2] = {static_cast<char>(v), static_cast<char>(v >> 8)};
  out.write(b, 2);
}
inline std::uint32_t get_u32(const std::uint8_t* p) {
  return std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) | (std::uint32_t{p[2]} << 16) |
         (std::uint32_t{p[3]} << 24);
}
inline std::uint16_t get_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
}  // namespace detail

/// Canonical 44-byte-header RIFF/WAVE, 16-bit little-endian PCM.
inline void write_wav(const std::filesystem::path& path, const PcmAudio& audio) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::unwritable_directory, "cannot write " + path.string());
  const auto data_bytes = static_cast<std::uint32_t>(audio.samples.size() * 2);
  const auto block_align = static_cast<std::uint16_t>(audio.channels * 2);
  out.write("RIFF", 4);
  detail::put_u32(out, 36 + data_bytes);
  out.write("WAVEfmt ", 8);
  detail::put_u32(out, 16);
  detail::put_u16(out, 1);
  detail::put_u16(out, static_cast<std::uint16_t>(audio.channels));
  detail::put_u32(out, static_cast<std::uint32_t>(audio.sample_rate));
  detail::put_u32(out, static_cast<std::uint32_t>(audio.sample_rate) * block_align);
  detail::put_u16(out, block_align);
  detail::put_u16(out, 16);
  out.write("data", 4);
  detail::put_u32(out, data_bytes);
  for (auto s : audio.samples) detail::put_u16(out, static_cast<std::uint16_t>(s));
  if (!out) throw Error(ErrorCode::io_error, "short write to " + path.string());
}

inline PcmAudio read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::unreadable_file, "cannot open " + path.string());
  std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() < 12 || std::memcmp(buf.data(), "RIFF", 4) != 0 || std::memcmp(buf.data() + 8, "WAVE", 4) != 0) {
    throw Error(ErrorCode::parse_error, "not a RIFF/WAVE file: " + path.string());
  }
  PcmAudio audio;
  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= buf.size()) {
    const std::string id(reinterpret_cast<const char*>(&buf[pos]), 4);
    const std::size_t len = detail::get_u32(&buf[pos + 4]);
    const std::size_t body = pos + 8;
    if (body + len > buf.size()) throw Error(ErrorCode::parse_error, "truncated WAV chunk " + id);
    if (id == "fmt ") {
      if (len < 16 || detail::get_u16(&buf[body]) != 1 || detail::get_u16(&buf[body + 14]) != 16) {
        throw Error(ErrorCode::parse_error, "only 16-bit PCM WAV is supported");
      }
      audio.channels = detail::get_u16(&buf[body + 2]);
      audio.sample_rate = static_cast<int>(detail::get_u32(&buf[body + 4]));
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw Error(ErrorCode::parse_error, "WAV data before fmt");
      audio.samples.resize(len / 2);
      for (std::size_t i = 0; i < audio.samples.size(); ++i) {
        audio.samples[i] = static_cast<std::int16_t>(detail::get_u16(&buf[body + 2 * i]));
      }
      return audio;
    }
    pos = body + len + (len & 1);
  }
  throw Error(ErrorCode::parse_error, "WAV without data chunk");
}

}  // namespace catchrel
