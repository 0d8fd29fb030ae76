#include "catchrel/libav_backend.hpp"

extern "C" {
#include <libavcodec/avcodec.h>
#include <libavformat/avformat.h>
#include <libavutil/channel_layout.h>
#include <libavutil/opt.h>
#include <libswscale/swscale.h>
}

#include <cmath>
#include <memory>
#include <numbers>
#include <string>

namespace catchrel {

namespace {

std::string av_error_text(int err) {
  char buf[AV_ERROR_MAX_STRING_SIZE] = {};
  av_strerror(err, buf, sizeof buf);
  return buf;
}

void check(int err, const char* what) {
  if (err < 0) throw Error(ErrorCode::io_error, std::string(what) + ": " + av_error_text(err));
}

struct Output {
  AVFormatContext* fmt = nullptr;
  AVCodecContext* video = nullptr;
  AVCodecContext* audio = nullptr;
  AVStream* vst = nullptr;
  AVStream* ast = nullptr;
  SwsContext* sws = nullptr;
  AVFrame* frame = nullptr;
  AVPacket* pkt = nullptr;

  ~Output() {
    sws_freeContext(sws);
    av_frame_free(&frame);
    av_packet_free(&pkt);
    avcodec_free_context(&video);
    avcodec_free_context(&audio);
    if (fmt) {
      if (fmt->pb) avio_closep(&fmt->pb);
      avformat_free_context(fmt);
    }
  }
};

void write_packets(Output& o, AVCodecContext* ctx, AVStream* st, const AVFrame* frame) {
  check(avcodec_send_frame(ctx, frame), "send frame");
  while (true) {
    const int err = avcodec_receive_packet(ctx, o.pkt);
    if (err == AVERROR(EAGAIN) || err == AVERROR_EOF) return;
    check(err, "receive packet");
    av_packet_rescale_ts(o.pkt, ctx->time_base, st->time_base);
    o.pkt->stream_index = st->index;
    check(av_interleaved_write_frame(o.fmt, o.pkt), "write packet");
  }
}

void fill_audio(AVFrame* f, int64_t first_sample, int rate, double tone_hz) {
  for (int i = 0; i < f->nb_samples; ++i) {
    const double t = static_cast<double>(first_sample + i) / rate;
    const double v = tone_hz > 0.0 ? 0.25 * std::sin(2.0 * std::numbers::pi * tone_hz * t) : 0.0;
    switch (f->format) {
      case AV_SAMPLE_FMT_FLTP:
      case AV_SAMPLE_FMT_FLT:
        reinterpret_cast<float*>(f->data[0])[i] = static_cast<float>(v);
        break;
      case AV_SAMPLE_FMT_S16:
        reinterpret_cast<int16_t*>(f->data[0])[i] = static_cast<int16_t>(v * 32767);
        break;
      default:
        throw Error(ErrorCode::io_error, "unsupported encoder sample format");
    }
  }
}

}  // namespace

void write_synthetic_video(const std::filesystem::path& path, const SyntheticVideoSpec& spec) {
  const auto container = container_from_path(path);
  if (!container) throw Error(ErrorCode::unsupported_container, path.string());
  const bool webm = *container == Container::webm;

  av_log_set_level(AV_LOG_ERROR);
  Output o;
  check(avformat_alloc_output_context2(&o.fmt, nullptr, webm ? "webm" : "mp4", path.c_str()), "output context");
  o.fmt->flags |= AVFMT_FLAG_BITEXACT;

  const AVCodec* vcodec = avcodec_find_encoder_by_name(webm ? "libvpx" : "mpeg4");
  if (!vcodec) throw Error(ErrorCode::io_error, "video encoder unavailable");
  o.vst = avformat_new_stream(o.fmt, nullptr);
  o.video = avcodec_alloc_context3(vcodec);
  o.video->width = spec.width;
  o.video->height = spec.height;
  o.video->pix_fmt = AV_PIX_FMT_YUV420P;
  o.video->time_base = AVRational{1, spec.fps};
  o.video->framerate = AVRational{spec.fps, 1};
  o.video->gop_size = spec.fps;
  o.video->flags |= AV_CODEC_FLAG_BITEXACT;
  if (webm) {
    o.video->bit_rate = 8'000'000;
    o.video->qmin = 0;
    o.video->qmax = 8;
    av_opt_set(o.video->priv_data, "deadline", "realtime", 0);
    av_opt_set(o.video->priv_data, "cpu-used", "8", 0);
  } else {
    o.video->flags |= AV_CODEC_FLAG_QSCALE;
    o.video->global_quality = FF_QP2LAMBDA * 2;
  }
  if (o.fmt->oformat->flags & AVFMT_GLOBALHEADER) o.video->flags |= AV_CODEC_FLAG_GLOBAL_HEADER;
  check(avcodec_open2(o.video, vcodec, nullptr), "open video encoder");
  check(avcodec_parameters_from_context(o.vst->codecpar, o.video), "video params");
  o.vst->time_base = o.video->time_base;
  o.vst->avg_frame_rate = o.video->framerate;

  if (spec.with_audio) {
    const AVCodec* acodec = avcodec_find_encoder_by_name(webm ? "libopus" : "aac");
    if (!acodec) throw Error(ErrorCode::io_error, "audio encoder unavailable");
    o.ast = avformat_new_stream(o.fmt, nullptr);
    o.audio = avcodec_alloc_context3(acodec);
    o.audio->sample_rate = webm ? 48000 : 44100;
    o.audio->channel_layout = AV_CH_LAYOUT_MONO;
    o.audio->channels = 1;
    o.audio->sample_fmt = webm ? AV_SAMPLE_FMT_FLT : AV_SAMPLE_FMT_FLTP;
    o.audio->bit_rate = 64000;
    o.audio->time_base = AVRational{1, o.audio->sample_rate};
    o.audio->flags |= AV_CODEC_FLAG_BITEXACT;
    if (o.fmt->oformat->flags & AVFMT_GLOBALHEADER) o.audio->flags |= AV_CODEC_FLAG_GLOBAL_HEADER;
    check(avcodec_open2(o.audio, acodec, nullptr), "open audio encoder");
    check(avcodec_parameters_from_context(o.ast->codecpar, o.audio), "audio params");
    o.ast->time_base = o.audio->time_base;
  }

  check(avio_open(&o.fmt->pb, path.c_str(), AVIO_FLAG_WRITE), "open output file");
  check(avformat_write_header(o.fmt, nullptr), "write header");

  o.frame = av_frame_alloc();
  o.pkt = av_packet_alloc();
  o.sws = sws_getContext(spec.width, spec.height, AV_PIX_FMT_RGB24, spec.width, spec.height,
                         AV_PIX_FMT_YUV420P, SWS_BICUBIC | SWS_ACCURATE_RND, nullptr, nullptr, nullptr);

  const auto total_frames = static_cast<int>(std::llround(spec.duration_s * spec.fps));
  const int64_t total_samples = spec.with_audio ? std::llround(spec.duration_s * o.audio->sample_rate) : 0;
  int64_t samples_done = 0;

  auto write_audio_until = [&](double t) {
    if (!spec.with_audio) return;
    const int64_t limit = std::min<int64_t>(total_samples, std::llround(t * o.audio->sample_rate));
    while (samples_done < limit) {
      AVFrame* af = av_frame_alloc();
      af->format = o.audio->sample_fmt;
      af->channel_layout = o.audio->channel_layout;
      af->channels = 1;
      af->sample_rate = o.audio->sample_rate;
      af->nb_samples = static_cast<int>(std::min<int64_t>(o.audio->frame_size, total_samples - samples_done));
      check(av_frame_get_buffer(af, 0), "audio buffer");
      fill_audio(af, samples_done, o.audio->sample_rate, spec.tone_hz);
      af->pts = samples_done;
      samples_done += af->nb_samples;
      try {
        write_packets(o, o.audio, o.ast, af);
      } catch (...) {
        av_frame_free(&af);
        throw;
      }
      av_frame_free(&af);
    }
  };

  for (int i = 0; i < total_frames; ++i) {
    Image img = spec.frame ? spec.frame(i) : solid_image(spec.width, spec.height, 128, 128, 128);
    if (img.width != spec.width || img.height != spec.height) {
      throw Error(ErrorCode::invalid_argument, "synthetic frame size mismatch");
    }
    av_frame_unref(o.frame);
    o.frame->format = AV_PIX_FMT_YUV420P;
    o.frame->width = spec.width;
    o.frame->height = spec.height;
    check(av_frame_get_buffer(o.frame, 0), "video buffer");
    const uint8_t* src[1] = {img.pixels.data()};
    const int src_stride[1] = {spec.width * 3};
    sws_scale(o.sws, src, src_stride, 0, spec.height, o.frame->data, o.frame->linesize);
    o.frame->pts = i;
    if (!webm) o.frame->quality = o.video->global_quality;
    write_packets(o, o.video, o.vst, o.frame);
    write_audio_until(static_cast<double>(i + 1) / spec.fps);
  }
  write_audio_until(spec.duration_s + 1.0);
  write_packets(o, o.video, o.vst, nullptr);
  if (spec.with_audio) write_packets(o, o.audio, o.ast, nullptr);
  check(av_write_trailer(o.fmt), "write trailer");
}

}  // namespace catchrel
