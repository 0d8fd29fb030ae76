#include <gtest/gtest.h>

#include <httplib.h>

#include <fstream>
#include <random>
#include <thread>

#include "catchrel/libav_backend.hpp"
#include "catchrel/remote_stt.hpp"
#include "catchrel/stt.hpp"
#include "support/temp_dir.hpp"

using namespace catchrel;
using catchrel::testing::TempDir;

namespace {

Transcript make_transcript(std::vector<std::pair<std::string, double>> items) {
  Transcript t;
  t.asset_id = "0123456789abcdef";
  t.provider_id = "test";
  double at = 0;
  for (auto& [text, conf] : items) {
    t.utterances.push_back({at, at + 1.0, text, conf});
    at += 2.0;
  }
  return t;
}

struct Fixture {
  TempDir dir;
  LibavBackend backend;
  std::filesystem::path file;
  MediaAsset asset;

  explicit Fixture(double duration = 64.0) {
    file = dir / "interview.mp4";
    SyntheticVideoSpec spec;
    spec.duration_s = duration;
    spec.fps = 5;
    spec.width = 32;
    spec.height = 32;
    write_synthetic_video(file, spec);
    asset = probe(backend, file);
  }
};

}  // namespace

TEST(FilterUtterances, KeepsAtOrAboveThreshold) {
  const auto t = make_transcript({{"a", 0.95}, {"b", 0.50}});
  const auto f = filter_utterances(t, 0.9);
  ASSERT_EQ(f.utterances.size(), 1u);
  EXPECT_EQ(f.utterances[0].text, "a");
  EXPECT_EQ(filter_utterances(t, 0.0), t);
  EXPECT_TRUE(filter_utterances(t, 1.0).utterances.empty());
}

TEST(FilterUtterances, InclusiveAtOne) {
  const auto t = make_transcript({{"perfect", 1.0}, {"almost", 0.999}});
  const auto f = filter_utterances(t, 1.0);
  ASSERT_EQ(f.utterances.size(), 1u);
  EXPECT_EQ(f.utterances[0].text, "perfect");
}

TEST(FilterUtterances, RejectsOutOfRange) {
  const auto t = make_transcript({{"a", 0.5}});
  EXPECT_THROW(filter_utterances(t, -0.1), Error);
  EXPECT_THROW(filter_utterances(t, 1.1), Error);
  EXPECT_THROW(filter_utterances(t, std::nan("")), Error);
}

TEST(FilterUtterances, ComposesAsMax) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 200; ++trial) {
    Transcript t;
    for (int i = 0; i < 20; ++i) t.utterances.push_back({double(i), i + 0.5, "w", u(rng)});
    const double a = u(rng), b = u(rng);
    EXPECT_EQ(filter_utterances(filter_utterances(t, a), b), filter_utterances(t, std::max(a, b)));
  }
}

TEST(Tokenize, FoldsCaseAndStripsPunctuation) {
  EXPECT_EQ(tokenize("Ini KAYU-manis!"), (std::vector<std::string>{"ini", "kayu", "manis"}));
  EXPECT_EQ(tokenize("«Durián» \u2014 ÉCLAIR"), (std::vector<std::string>{"durián", "éclair"}));
  EXPECT_EQ(tokenize("ŁÓDŹ"), (std::vector<std::string>{"łódź"}));
  EXPECT_EQ(tokenize("ПРИВЕТ, мир"), (std::vector<std::string>{"привет", "мир"}));
  EXPECT_TRUE(tokenize("  ...  ").empty());
}

TEST(Search, WholeTokenCaseInsensitive) {
  const auto t = make_transcript({{"Ini kayu manis", 0.9}, {"pohon durian", 0.9}});
  const auto hits = search(t, "durian");
  ASSERT_EQ(hits.size(), 1u);
  EXPECT_EQ(hits[0].utterance_index, 1);
  EXPECT_EQ(hits[0].matched_token, "durian");
  EXPECT_DOUBLE_EQ(hits[0].start_s, 2.0);
  EXPECT_EQ(search(t, "Durian"), hits);
  EXPECT_TRUE(search(t, "duri").empty());
}

TEST(Search, PhraseAndPunctuation) {
  const auto t = make_transcript({{"Ini... kayu, manis?", 0.9}, {"manis kayu", 0.9}});
  const auto hits = search(t, "Kayu Manis");
  ASSERT_EQ(hits.size(), 1u);
  EXPECT_EQ(hits[0].utterance_index, 0);
  EXPECT_EQ(hits[0].matched_token, "kayu manis");
}

TEST(Search, EmptyTermRejected) {
  const auto t = make_transcript({{"a", 0.9}});
  try {
    search(t, " ?! ");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::empty_term);
  }
}

TEST(Search, InvariantUnderFilteringWhenHitsSurvive) {
  const auto t = make_transcript({{"pohon durian", 0.95}, {"durian lagi", 0.97}, {"noise", 0.2}});
  const auto before = search(t, "durian");
  const auto filtered = filter_utterances(t, 0.9);
  const auto after = search(filtered, "durian");
  ASSERT_EQ(before.size(), after.size());
  for (std::size_t i = 0; i < before.size(); ++i) {
    EXPECT_DOUBLE_EQ(before[i].start_s, after[i].start_s);
    EXPECT_EQ(before[i].matched_token, after[i].matched_token);
  }
}

TEST(ProviderConfig, RemoteNeedsEndpointAndKey) {
  EXPECT_THROW(validate_provider_config({"gcp", ProviderKind::remote, std::nullopt, std::nullopt, "id-ID"}), Error);
  EXPECT_NO_THROW(validate_provider_config({"gcp", ProviderKind::remote, "http://x", "/k.json", "id-ID"}));
  EXPECT_NO_THROW(validate_provider_config({"offline", ProviderKind::offline, std::nullopt, std::nullopt, ""}));
  EXPECT_THROW(validate_provider_config({"offline", ProviderKind::offline, "http://x", std::nullopt, ""}), Error);
}

TEST(Transcribe, OfflineScriptRebasesToAssetTime) {
  Fixture fx;
  OfflineProvider provider(Json::parse(R"({"chunks": {"0": [
      {"text": "kayu manis", "confidence": 0.93, "start_s": 2.0, "end_s": 3.5}]}})"));
  TranscribeOptions opt;
  opt.chunk_len_s = 30;
  opt.language = "id-ID";
  const auto t = transcribe(fx.backend, fx.file, fx.asset, provider, opt);
  ASSERT_EQ(t.utterances.size(), 1u);
  EXPECT_DOUBLE_EQ(t.utterances[0].start_s, 2.0);
  EXPECT_DOUBLE_EQ(t.utterances[0].end_s, 3.5);
  EXPECT_EQ(t.utterances[0].text, "kayu manis");
  EXPECT_EQ(t.provider_id, "offline");
  EXPECT_EQ(t.language, "id-ID");
  ASSERT_EQ(t.chunks.size(), 2u);  // 64 s: 0-30, 30-64 (4 s tail merged)
  EXPECT_DOUBLE_EQ(t.chunks[1].end_s, fx.asset.duration_s);
}

TEST(Transcribe, ConcatenationOfRebasedChunks) {
  Fixture fx;
  const auto script = Json::parse(R"({"chunks": {
      "0": [{"text": "a", "confidence": 0.5, "start_s": 1.0, "end_s": 2.0},
            {"text": "b", "confidence": 0.6}],
      "1": [{"text": "c", "confidence": 0.7, "start_s": 0.0, "end_s": 4.0}],
      "2": [{"text": "d", "confidence": 0.8, "start_s": 3.0, "end_s": 99.0}]}})");
  OfflineProvider provider(script);
  TranscribeOptions opt;
  opt.chunk_len_s = 20;
  opt.parallelism = 3;
  std::vector<double> progress;
  opt.progress = [&](double p) { progress.push_back(p); };
  const auto t = transcribe(fx.backend, fx.file, fx.asset, provider, opt);

  // Expected: each chunk's segments shifted by the chunk start, clamped to the chunk.
  std::vector<Utterance> expected;
  const auto chunks = plan_chunks(fx.asset.duration_s, 20);
  for (const auto& c : chunks) {
    AudioChunk ac{c.index, c.start_s, c.end_s, {}};
    for (const auto& u : rebase_segments(provider.recognize(fx.asset, ac, ""), c)) expected.push_back(u);
  }
  std::stable_sort(expected.begin(), expected.end(),
                   [](const Utterance& a, const Utterance& b) { return a.start_s < b.start_s; });
  EXPECT_EQ(t.utterances, expected);
  ASSERT_EQ(t.utterances.size(), 4u);
  EXPECT_DOUBLE_EQ(t.utterances[0].start_s, 0.0);  // "b" spans all of chunk 0
  EXPECT_DOUBLE_EQ(t.utterances[0].end_s, 20.0);
  EXPECT_DOUBLE_EQ(t.utterances[3].end_s, fx.asset.duration_s);
  EXPECT_TRUE(validate_transcript(t, fx.asset.duration_s).empty());
  ASSERT_FALSE(progress.empty());
  EXPECT_DOUBLE_EQ(progress.back(), 1.0);
  EXPECT_TRUE(std::is_sorted(progress.begin(), progress.end()));
}

TEST(Transcribe, WindowOffsetsChunks) {
  Fixture fx;
  OfflineProvider provider(Json::parse(R"({"chunks": {"0": [
      {"text": "x", "confidence": 0.9, "start_s": 1.0, "end_s": 2.0}]}})"));
  TranscribeOptions opt;
  opt.window = std::pair{40.0, 60.0};
  const auto t = transcribe(fx.backend, fx.file, fx.asset, provider, opt);
  ASSERT_EQ(t.utterances.size(), 1u);
  EXPECT_DOUBLE_EQ(t.utterances[0].start_s, 41.0);
  ASSERT_EQ(t.chunks.size(), 1u);
  EXPECT_DOUBLE_EQ(t.chunks[0].start_s, 40.0);
}

TEST(Transcribe, EmptyWindowRejected) {
  Fixture fx(6.0);
  OfflineProvider provider(Json::object());
  TranscribeOptions opt;
  opt.window = std::pair{0.0, 0.0};
  try {
    transcribe(fx.backend, fx.file, fx.asset, provider, opt);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::empty_window);
  }
  opt.window = std::pair{0.0, 600.0};
  EXPECT_THROW(transcribe(fx.backend, fx.file, fx.asset, provider, opt), Error);
}

TEST(Transcribe, ChunkFailureIsPartial) {
  Fixture fx;
  OfflineProvider provider(Json::parse(R"({"failures": [0], "chunks": {"1": [
      {"text": "ok", "confidence": 0.9, "start_s": 1.0, "end_s": 2.0}]}})"));
  const auto t = transcribe(fx.backend, fx.file, fx.asset, provider, {});
  ASSERT_EQ(t.chunks.size(), 2u);
  EXPECT_EQ(t.chunks[0].status, ChunkState::failed);
  EXPECT_EQ(t.chunks[1].status, ChunkState::ok);
  ASSERT_EQ(t.utterances.size(), 1u);
  EXPECT_DOUBLE_EQ(t.utterances[0].start_s, 31.0);
}

TEST(Transcribe, PerAssetScriptOverridesDefault) {
  Fixture fx(10.0);
  Json script = Json::parse(R"({"chunks": {"0": [{"text": "default", "confidence": 0.9}]}})");
  script["assets"][fx.asset.source_name]["chunks"]["0"] = Json::array({{{"text", "specific"}, {"confidence", 0.8}}});
  OfflineProvider provider(script);
  const auto t = transcribe(fx.backend, fx.file, fx.asset, provider, {});
  ASSERT_EQ(t.utterances.size(), 1u);
  EXPECT_EQ(t.utterances[0].text, "specific");
}

TEST(TranscriptJson, RoundTrips) {
  Transcript t = make_transcript({{"a", 0.5}, {"b", 1.0}});
  t.chunks.push_back({0, 0, 30, ChunkState::failed, "boom"});
  EXPECT_EQ(Json(t).get<Transcript>(), t);
  const auto j = Json(t);
  for (const char* key : {"asset_id", "provider_id", "language", "utterances", "chunks"}) EXPECT_TRUE(j.contains(key));
}

// --- remote provider against an in-process recognizer -------------------

namespace {

class MockRecognizer {
 public:
  MockRecognizer() {
    server_.Post("/v1/recognize", [this](const httplib::Request& req, httplib::Response& res) {
      const auto body = Json::parse(req.body);
      last_request_ = body;
      if (body["credential"].value("api_key", "") != "good") {
        res.status = 401;
        return;
      }
      const int chunk = body["chunk_index"].get<int>();
      if (chunk == 1) {
        res.status = 503;
        res.set_content("overloaded", "text/plain");
        return;
      }
      Json out{{"results", Json::array()}};
      out["results"].push_back({{"text", "pohon durian"},
                                {"confidence", 0.91},
                                {"words", Json::array({{{"word", "pohon"}, {"start_s", 1.25}, {"end_s", 1.5}},
                                                       {{"word", "durian"}, {"start_s", 1.5}, {"end_s", 2.0}}})}});
      out["results"].push_back({{"text", "tanpa waktu"}, {"confidence", 0.4}});
      res.set_content(out.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~MockRecognizer() {
    server_.stop();
    thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1/recognize"; }
  const Json& last_request() const { return last_request_; }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
  Json last_request_;
};

}  // namespace

TEST(RemoteProvider, BadKeyFileIsCredentialInvalid) {
  TempDir dir;
  std::ofstream(dir / "key.json") << "not json";
  try {
    RemoteProvider p("remote", "http://127.0.0.1:9/x", dir / "key.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::credential_invalid);
  }
  EXPECT_THROW(RemoteProvider("remote", "http://127.0.0.1:9/x", dir / "missing.json"), Error);
}

TEST(RemoteProvider, PostsWavAndParsesWordTimings) {
  Fixture fx;
  MockRecognizer mock;
  std::ofstream(fx.dir / "key.json") << R"({"api_key": "good"})";
  RemoteProvider provider("remote", mock.url(), fx.dir / "key.json");
  TranscribeOptions opt;
  opt.language = "id-ID";
  opt.parallelism = 1;
  const auto t = transcribe(fx.backend, fx.file, fx.asset, provider, opt);
  ASSERT_EQ(t.chunks.size(), 2u);
  EXPECT_EQ(t.chunks[0].status, ChunkState::ok);
  EXPECT_EQ(t.chunks[1].status, ChunkState::failed);  // 503 on chunk 1 only
  ASSERT_EQ(t.utterances.size(), 2u);
  EXPECT_DOUBLE_EQ(t.utterances[0].start_s, 0.0);  // untimed result spans chunk
  EXPECT_DOUBLE_EQ(t.utterances[1].start_s, 1.25);
  EXPECT_DOUBLE_EQ(t.utterances[1].end_s, 2.0);
  EXPECT_EQ(mock.last_request()["language"], "id-ID");
  EXPECT_EQ(mock.last_request()["sample_rate_hz"], 16000);
  EXPECT_FALSE(mock.last_request()["audio_wav_base64"].get<std::string>().empty());
}

TEST(RemoteProvider, RejectedKeyAbortsJob) {
  Fixture fx(10.0);
  MockRecognizer mock;
  std::ofstream(fx.dir / "key.json") << R"({"api_key": "bad"})";
  RemoteProvider provider("remote", mock.url(), fx.dir / "key.json");
  try {
    transcribe(fx.backend, fx.file, fx.asset, provider, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::credential_invalid);
  }
}

TEST(RemoteProvider, UnreachableEndpoint) {
  Fixture fx(10.0);
  std::ofstream(fx.dir / "key.json") << R"({"api_key": "good"})";
  RemoteProvider provider("remote", "http://127.0.0.1:1/v1/recognize", fx.dir / "key.json", std::chrono::seconds(2));
  try {
    transcribe(fx.backend, fx.file, fx.asset, provider, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::provider_unreachable);
  }
}

TEST(RemoteProvider, ParseResponseErrors) {
  EXPECT_THROW(RemoteProvider::parse_response("{}"), Error);
  EXPECT_THROW(RemoteProvider::parse_response("nope"), Error);
  EXPECT_TRUE(RemoteProvider::parse_response(R"({"results": []})").empty());
  EXPECT_EQ(base64_encode("Man"), "TWFu");
  EXPECT_EQ(base64_encode("Ma"), "TWE=");
}
