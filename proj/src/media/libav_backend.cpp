#include "catchrel/libav_backend.hpp"

extern "C" {
#include <libavcodec/avcodec.h>
#include <libavformat/avformat.h>
#include <libavutil/channel_layout.h>
#include <libavutil/imgutils.h>
#include <libavutil/opt.h>
#include <libswresample/swresample.h>
#include <libswscale/swscale.h>
}

#include <cmath>
#include <cstring>
#include <memory>
#include <string>

#include "catchrel/wav.hpp"

namespace catchrel {

namespace {

std::string av_error_text(int err) {
  char buf[AV_ERROR_MAX_STRING_SIZE] = {};
  av_strerror(err, buf, sizeof buf);
  return buf;
}

struct FormatCloser {
  void operator()(AVFormatContext* f) const { avformat_close_input(&f); }
};
struct CodecCloser {
  void operator()(AVCodecContext* c) const { avcodec_free_context(&c); }
};
struct FrameCloser {
  void operator()(AVFrame* f) const { av_frame_free(&f); }
};
struct PacketCloser {
  void operator()(AVPacket* p) const { av_packet_free(&p); }
};
struct SwsCloser {
  void operator()(SwsContext* s) const { sws_freeContext(s); }
};
struct SwrCloser {
  void operator()(SwrContext* s) const { swr_free(&s); }
};

using FormatPtr = std::unique_ptr<AVFormatContext, FormatCloser>;
using CodecPtr = std::unique_ptr<AVCodecContext, CodecCloser>;
using FramePtr = std::unique_ptr<AVFrame, FrameCloser>;
using PacketPtr = std::unique_ptr<AVPacket, PacketCloser>;
using SwsPtr = std::unique_ptr<SwsContext, SwsCloser>;
using SwrPtr = std::unique_ptr<SwrContext, SwrCloser>;

FramePtr make_frame() {
  FramePtr f(av_frame_alloc());
  if (!f) throw Error(ErrorCode::io_error, "av_frame_alloc failed");
  return f;
}
PacketPtr make_packet() {
  PacketPtr p(av_packet_alloc());
  if (!p) throw Error(ErrorCode::io_error, "av_packet_alloc failed");
  return p;
}

FormatPtr open_input(const std::filesystem::path& file) {
  static const bool quiet = [] {
    av_log_set_level(AV_LOG_ERROR);
    return true;
  }();
  (void)quiet;
  AVFormatContext* raw = nullptr;
  if (int err = avformat_open_input(&raw, file.c_str(), nullptr, nullptr); err < 0) {
    throw Error(ErrorCode::unreadable_file, file.string() + ": " + av_error_text(err));
  }
  FormatPtr fmt(raw);
  if (int err = avformat_find_stream_info(fmt.get(), nullptr); err < 0) {
    throw Error(ErrorCode::unreadable_file, file.string() + ": " + av_error_text(err));
  }
  return fmt;
}

struct OpenStream {
  int index = -1;
  AVStream* stream = nullptr;
  CodecPtr codec;
};

OpenStream open_decoder(AVFormatContext* fmt, AVMediaType type, const std::filesystem::path& file) {
  OpenStream s;
  s.index = av_find_best_stream(fmt, type, -1, -1, nullptr, 0);
  if (s.index < 0) {
    throw Error(ErrorCode::decode_failure,
                file.string() + ": no " + av_get_media_type_string(type) + " stream");
  }
  s.stream = fmt->streams[s.index];
  const AVCodec* dec = avcodec_find_decoder(s.stream->codecpar->codec_id);
  if (!dec) throw Error(ErrorCode::decode_failure, file.string() + ": no decoder for stream");
  s.codec.reset(avcodec_alloc_context3(dec));
  avcodec_parameters_to_context(s.codec.get(), s.stream->codecpar);
  s.codec->pkt_timebase = s.stream->time_base;
  if (int err = avcodec_open2(s.codec.get(), dec, nullptr); err < 0) {
    throw Error(ErrorCode::decode_failure, file.string() + ": " + av_error_text(err));
  }
  return s;
}

double stream_origin(const AVStream* st) {
  return st->start_time == AV_NOPTS_VALUE ? 0.0 : static_cast<double>(st->start_time) * av_q2d(st->time_base);
}

double frame_time(const AVFrame* f, const AVStream* st) {
  const auto ts = f->best_effort_timestamp != AV_NOPTS_VALUE ? f->best_effort_timestamp : f->pts;
  if (ts == AV_NOPTS_VALUE) return NAN;
  return static_cast<double>(ts) * av_q2d(st->time_base) - stream_origin(st);
}

void seek_to(AVFormatContext* fmt, const OpenStream& s, double t) {
  const auto target = static_cast<int64_t>((t + stream_origin(s.stream)) / av_q2d(s.stream->time_base));
  av_seek_frame(fmt, s.index, target, AVSEEK_FLAG_BACKWARD);
  avcodec_flush_buffers(s.codec.get());
}

/// Feeds packets of one stream to its decoder and invokes `on_frame` for each
/// decoded frame until it returns false or input ends (decoder flushed).
template <typename OnFrame>
void decode_stream(AVFormatContext* fmt, OpenStream& s, OnFrame&& on_frame) {
  auto pkt = make_packet();
  auto frame = make_frame();
  bool keep_going = true;
  auto drain = [&]() {
    while (keep_going) {
      const int err = avcodec_receive_frame(s.codec.get(), frame.get());
      if (err == AVERROR(EAGAIN) || err == AVERROR_EOF) return;
      if (err < 0) throw Error(ErrorCode::decode_failure, av_error_text(err));
      keep_going = on_frame(frame.get());
      av_frame_unref(frame.get());
    }
  };
  while (keep_going) {
    const int err = av_read_frame(fmt, pkt.get());
    if (err < 0) break;
    if (pkt->stream_index == s.index) {
      const int send = avcodec_send_packet(s.codec.get(), pkt.get());
      if (send < 0 && send != AVERROR(EAGAIN) && send != AVERROR_INVALIDDATA) {
        av_packet_unref(pkt.get());
        throw Error(ErrorCode::decode_failure, av_error_text(send));
      }
      drain();
    }
    av_packet_unref(pkt.get());
  }
  if (keep_going) {
    avcodec_send_packet(s.codec.get(), nullptr);
    drain();
  }
}

Image to_rgb(const AVFrame* f, SwsPtr& sws) {
  sws.reset(sws_getCachedContext(sws.release(), f->width, f->height, static_cast<AVPixelFormat>(f->format),
                                 f->width, f->height, AV_PIX_FMT_RGB24,
                                 SWS_BICUBIC | SWS_ACCURATE_RND | SWS_FULL_CHR_H_INT, nullptr, nullptr,
                                 nullptr));
  if (!sws) throw Error(ErrorCode::decode_failure, "no pixel conversion for frame format");
  Image img(f->width, f->height);
  uint8_t* dst[4] = {img.pixels.data(), nullptr, nullptr, nullptr};
  int stride[4] = {f->width * 3, 0, 0, 0};
  sws_scale(sws.get(), f->data, f->linesize, 0, f->height, dst, stride);
  return img;
}

}  // namespace

MediaAsset LibavBackend::probe_stream(const std::filesystem::path& file) {
  auto fmt = open_input(file);
  const std::string format_name = fmt->iformat->name;
  if (format_name.find("mp4") == std::string::npos && format_name.find("webm") == std::string::npos) {
    throw Error(ErrorCode::unsupported_container, file.string() + ": detected '" + format_name + "'");
  }
  const int vi = av_find_best_stream(fmt.get(), AVMEDIA_TYPE_VIDEO, -1, -1, nullptr, 0);
  if (vi < 0) throw Error(ErrorCode::unreadable_file, file.string() + ": no video stream");
  const AVStream* st = fmt->streams[vi];
  MediaAsset a;
  if (fmt->duration != AV_NOPTS_VALUE) {
    a.duration_s = static_cast<double>(fmt->duration) / AV_TIME_BASE;
  } else if (st->duration != AV_NOPTS_VALUE) {
    a.duration_s = static_cast<double>(st->duration) * av_q2d(st->time_base);
  }
  const AVRational rate = av_guess_frame_rate(fmt.get(), const_cast<AVStream*>(st), nullptr);
  a.frame_rate = rate.num > 0 && rate.den > 0 ? av_q2d(rate) : 0.0;
  a.width_px = st->codecpar->width;
  a.height_px = st->codecpar->height;
  if (a.frame_rate <= 0.0 || a.width_px <= 0 || a.height_px <= 0) {
    throw Error(ErrorCode::unreadable_file, file.string() + ": video stream lacks rate or size");
  }
  return a;
}

std::vector<DecodedFrame> LibavBackend::decode_frames(const std::filesystem::path& file,
                                                      const MediaAsset& /*asset*/,
                                                      const std::vector<double>& timestamps) {
  std::vector<DecodedFrame> out;
  if (timestamps.empty()) return out;
  auto fmt = open_input(file);
  auto s = open_decoder(fmt.get(), AVMEDIA_TYPE_VIDEO, file);
  seek_to(fmt.get(), s, timestamps.front());

  constexpr double kEps = 1e-4;
  SwsPtr sws;
  auto held = make_frame();  // last frame at or before the next target
  bool have_held = false;
  std::size_t next = 0;

  decode_stream(fmt.get(), s, [&](AVFrame* f) {
    const double t = frame_time(f, s.stream);
    while (next < timestamps.size() && timestamps[next] < t - kEps) {
      // Target falls before this frame: the held frame is what is on screen.
      out.push_back({timestamps[next], to_rgb(have_held ? held.get() : f, sws)});
      ++next;
    }
    av_frame_unref(held.get());
    av_frame_ref(held.get(), f);
    have_held = true;
    return next < timestamps.size();
  });
  if (next < timestamps.size() && !have_held) {
    throw Error(ErrorCode::decode_failure, file.string() + ": no decodable video frames");
  }
  while (next < timestamps.size()) {
    out.push_back({timestamps[next], to_rgb(held.get(), sws)});
    ++next;
  }
  return out;
}

void LibavBackend::extract_pcm(const std::filesystem::path& file, const MediaAsset& /*asset*/,
                               const ChunkBounds& bounds, const std::filesystem::path& out_wav) {
  auto fmt = open_input(file);
  auto s = open_decoder(fmt.get(), AVMEDIA_TYPE_AUDIO, file);
  auto* ctx = s.codec.get();
  const int64_t in_layout = ctx->channel_layout ? static_cast<int64_t>(ctx->channel_layout)
                                                : av_get_default_channel_layout(ctx->channels);
  SwrPtr swr(swr_alloc_set_opts(nullptr, AV_CH_LAYOUT_MONO, AV_SAMPLE_FMT_S16, kAudioSampleRate, in_layout,
                                ctx->sample_fmt, ctx->sample_rate, 0, nullptr));
  if (!swr || swr_init(swr.get()) < 0) throw Error(ErrorCode::decode_failure, "resampler init failed");

  seek_to(fmt.get(), s, std::max(0.0, bounds.start_s - 0.5));

  // Resampled output is contiguous from the first decoded frame on; place it
  // on the absolute 16 kHz grid by that frame's timestamp.
  std::vector<int16_t> pcm;
  double origin = NAN;
  std::vector<int16_t> scratch;
  decode_stream(fmt.get(), s, [&](AVFrame* f) {
    if (std::isnan(origin)) {
      const double t = frame_time(f, s.stream);
      origin = std::isnan(t) ? 0.0 : t;
    }
    const int cap = swr_get_out_samples(swr.get(), f->nb_samples) + 32;
    scratch.resize(static_cast<std::size_t>(cap));
    uint8_t* dst[1] = {reinterpret_cast<uint8_t*>(scratch.data())};
    const int got = swr_convert(swr.get(), dst, cap, const_cast<const uint8_t**>(f->extended_data), f->nb_samples);
    if (got < 0) throw Error(ErrorCode::decode_failure, "resample failed");
    pcm.insert(pcm.end(), scratch.begin(), scratch.begin() + got);
    return origin + static_cast<double>(pcm.size()) / kAudioSampleRate < bounds.end_s + 0.1;
  });
  {
    scratch.resize(4096);
    uint8_t* dst[1] = {reinterpret_cast<uint8_t*>(scratch.data())};
    const int got = swr_convert(swr.get(), dst, 4096, nullptr, 0);
    if (got > 0) pcm.insert(pcm.end(), scratch.begin(), scratch.begin() + got);
  }
  if (std::isnan(origin)) throw Error(ErrorCode::decode_failure, file.string() + ": no decodable audio");

  PcmAudio audio;
  audio.sample_rate = kAudioSampleRate;
  audio.channels = 1;
  const auto want = static_cast<std::size_t>(std::llround(bounds.length() * kAudioSampleRate));
  const auto first = std::llround((bounds.start_s - origin) * kAudioSampleRate);
  audio.samples.assign(want, 0);
  for (std::size_t i = 0; i < want; ++i) {
    const long long src = first + static_cast<long long>(i);
    if (src >= 0 && src < static_cast<long long>(pcm.size())) audio.samples[i] = pcm[static_cast<std::size_t>(src)];
  }
  write_wav(out_wav, audio);
}

}  // namespace catchrel
