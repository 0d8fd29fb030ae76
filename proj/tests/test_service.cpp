#include <gtest/gtest.h>
#include <httplib.h>

#include <cstdlib>
#include <fstream>
#include <future>
#include <thread>

#include "catchrel/libav_backend.hpp"
#include "catchrel/pipeline.hpp"
#include "catchrel/service.hpp"
#include "support/synthetic_frames.hpp"
#include "support/temp_dir.hpp"

using namespace catchrel;
using catchrel::testing::TempDir;
using catchrel::testing::tile_frame;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

std::filesystem::path make_clip(const std::filesystem::path& path, std::array<std::uint8_t, 3> hue, std::uint64_t seed,
                                double duration = 8.0) {
  SyntheticVideoSpec spec;
  spec.duration_s = duration;
  spec.fps = 10;
  spec.width = 48;
  spec.height = 36;
  spec.frame = [=](int i) { return tile_frame(48, 36, hue, seed, i); };
  write_synthetic_video(path, spec);
  return path;
}

const char* kScript = R"({
  "provider_id": "offline-test",
  "chunks": {"0": [
    {"text": "ini pohon durian besar", "confidence": 0.95, "start_s": 2.0, "end_s": 4.0},
    {"text": "durian lagi", "confidence": 0.5, "start_s": 5.0, "end_s": 6.0}
  ]}
})";

class ServiceTest : public ::testing::Test {
 protected:
  void SetUp() override { start(Json::object()); }
  void TearDown() override { shutdown(); }

  void start(Json config) {
    write_file(dir_ / "script.json", kScript);
    std::filesystem::create_directories(dir_ / "ws");
    config["offline_script"] = (dir_ / "script.json").string();
    write_file(dir_ / "ws" / "catchrel.json", config.dump());
    ws_.reset(new Workspace(Workspace::open(dir_ / "ws")));
    service_ = std::make_unique<Service>(*ws_, backend_);
    port_ = service_->bind_ephemeral();
    ASSERT_GT(port_, 0);
    thread_ = std::thread([this] { service_->serve(); });
    service_->wait_until_ready();
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
    client_->set_read_timeout(60, 0);
  }

  void shutdown() {
    if (service_) service_->stop();
    if (thread_.joinable()) thread_.join();
    client_.reset();
    service_.reset();
    ws_.reset();
  }

  httplib::Result post_json(const std::string& path, const Json& body, const httplib::Headers& headers = {}) {
    return client_->Post(path, headers, body.dump(), "application/json");
  }

  static Json body(const httplib::Result& r) { return Json::parse(r->body); }

  httplib::Result upload(const std::filesystem::path& file, const std::string& name) {
    httplib::MultipartFormDataItems items{{"file", slurp(file), name, "video/mp4"}};
    return client_->Post("/assets", items);
  }

  Json wait_job(const std::string& id) {
    for (int i = 0; i < 600; ++i) {
      auto r = client_->Get("/jobs/" + id);
      EXPECT_EQ(r->status, 200);
      const auto j = body(r);
      if (j["status"] == "done" || j["status"] == "failed") return j;
      std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
    ADD_FAILURE() << "job " << id << " did not finish";
    return {};
  }

  std::string ingest_clip(const std::string& name, std::array<std::uint8_t, 3> hue, std::uint64_t seed) {
    const auto r = upload(make_clip(dir_ / name, hue, seed), name);
    EXPECT_EQ(r->status, 201) << r->body;
    return body(r)["asset_id"];
  }

  TempDir dir_;
  LibavBackend backend_;
  std::unique_ptr<Workspace> ws_;
  std::unique_ptr<Service> service_;
  std::unique_ptr<httplib::Client> client_;
  std::thread thread_;
  int port_ = 0;
};

}  // namespace

TEST(Config, DefaultsMatchTheTranscriptionForm) {
  const Config c;
  EXPECT_EQ(c.chunk_len_s, 30.0);
  EXPECT_EQ(c.confidence_threshold, 0.9);
  EXPECT_EQ(c.balance_min, 1200u);
  EXPECT_EQ(c.balance_max, 2500u);
  EXPECT_EQ(c.provider, "offline");
}

TEST(Config, FileThenEnvironment) {
  TempDir dir;
  write_file(dir / "catchrel.json", R"({"fps_cap": 1.5, "blur_threshold": 80})");
  ::setenv("CATCHREL_BLUR_THRESHOLD", "120", 1);
  const auto c = load_config(dir.path());
  ::unsetenv("CATCHREL_BLUR_THRESHOLD");
  EXPECT_EQ(c.fps_cap, 1.5);
  EXPECT_EQ(c.blur_threshold, 120.0);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  TempDir dir;
  write_file(dir / "catchrel.json", R"({"blur_treshold": 80})");
  try {
    load_config(dir.path());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::invalid_argument);
    EXPECT_EQ(e.details(), std::vector<std::string>{"blur_treshold"});
  }
  write_file(dir / "catchrel.json", R"({"chunk_len_s": 60})");
  EXPECT_THROW(load_config(dir.path()), Error);
}

TEST(Jobs, ProgressIsMonotoneAndTerminalStatesStick) {
  TempDir dir;
  std::vector<double> seen;
  std::string id;
  {
    JobQueue q(dir.path(), 1);
    std::promise<void> release;
    auto gate = release.get_future().share();
    const auto job = q.submit(JobKind::extract, {{"n", 1}}, [&, gate](const JobQueue::ProgressFn& p) {
      gate.wait();
      for (double v : {0.2, 0.6, 0.4, 0.9}) {
        p(v);
        seen.push_back(q.get(id).progress);
      }
      return Json{{"ok", true}};
    });
    id = job.job_id;
    EXPECT_EQ(job.status, JobStatus::queued);
    release.set_value();
    const auto done = q.wait(id);
    EXPECT_EQ(done.status, JobStatus::done);
    EXPECT_EQ(done.progress, 1.0);
    EXPECT_EQ(done.result_ref, (Json{{"ok", true}}));
  }
  EXPECT_EQ(seen, (std::vector<double>{0.2, 0.6, 0.6, 0.9}));
  JobQueue reopened(dir.path(), 1);
  EXPECT_EQ(reopened.get(id).status, JobStatus::done);
}

TEST(Jobs, FailureCarriesTheErrorCode) {
  TempDir dir;
  JobQueue q(dir.path(), 1);
  const auto job = q.submit(JobKind::curate, {}, [](const JobQueue::ProgressFn&) -> Json {
    throw Error(ErrorCode::empty_dataset, "nothing to curate");
  });
  const auto done = q.wait(job.job_id);
  EXPECT_EQ(done.status, JobStatus::failed);
  EXPECT_EQ(done.error_detail["error"], "empty-dataset");
}

TEST(Jobs, IdempotencyKeyReturnsTheOriginalJob) {
  TempDir dir;
  JobQueue q(dir.path(), 1);
  std::atomic<int> runs{0};
  auto work = [&](const JobQueue::ProgressFn&) {
    ++runs;
    return Json();
  };
  const auto a = q.submit(JobKind::export_, {{"ds", "x"}}, work, "key-1");
  const auto b = q.submit(JobKind::export_, {{"ds", "x"}}, work, "key-1");
  EXPECT_EQ(a.job_id, b.job_id);
  q.wait(a.job_id);
  EXPECT_EQ(runs.load(), 1);
  try {
    q.submit(JobKind::export_, {{"ds", "y"}}, work, "key-1");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::duplicate);
  }
  const auto c = q.submit(JobKind::export_, {{"ds", "x"}}, work);
  EXPECT_NE(c.job_id, a.job_id);
}

TEST(Jobs, RestartReportsUnfinishedJobsAsInterrupted) {
  TempDir dir;
  Job stale;
  stale.job_id = "00112233aabbccdd";
  stale.kind = JobKind::transcribe;
  stale.status = JobStatus::running;
  stale.progress = 0.4;
  stale.idempotency_key = "retry-me";
  write_file(dir / "00112233aabbccdd.json", Json(stale).dump());
  JobQueue q(dir.path(), 1);
  const auto j = q.get(stale.job_id);
  EXPECT_EQ(j.status, JobStatus::failed);
  EXPECT_EQ(j.progress, 0.4);
  EXPECT_EQ(j.error_detail["error"], "interrupted");
  EXPECT_EQ(Json::parse(slurp(dir / "00112233aabbccdd.json"))["status"], "failed");
  EXPECT_THROW(q.get("../../etc/passwd"), Error);
}

TEST_F(ServiceTest, MetaAdvertisesFormDefaults) {
  const auto r = client_->Get("/meta");
  ASSERT_EQ(r->status, 200);
  const auto j = body(r);
  EXPECT_EQ(j["defaults"]["chunk_len_s"], 30.0);
  EXPECT_EQ(j["defaults"]["threshold"], 0.9);
  EXPECT_EQ(j["limits"]["chunk_len_s"]["min"], 5.0);
  EXPECT_EQ(j["limits"]["chunk_len_s"]["max"], 59.0);
  bool bahasa = false;
  for (const auto& l : j["languages"]) bahasa |= l["name"] == "Bahasa Indonesia";
  EXPECT_TRUE(bahasa);
  EXPECT_EQ(j["containers"], (Json{".webm", ".mp4"}));
}

TEST_F(ServiceTest, UploadRejectsOtherContainers) {
  write_file(dir_ / "clip.avi", "RIFF....AVI LIST");
  const auto r = upload(dir_ / "clip.avi", "clip.avi");
  EXPECT_EQ(r->status, 415);
  EXPECT_EQ(body(r)["error"], "unsupported-container");
  EXPECT_EQ(body(client_->Get("/assets")).size(), 0u);
}

TEST_F(ServiceTest, UploadRejectsCoordinatesInSiteNote) {
  const auto clip = make_clip(dir_ / "a.mp4", {10, 120, 10}, 1, 3.0);
  httplib::MultipartFormDataItems items{{"file", slurp(clip), "a.mp4", "video/mp4"},
                                        {"site_note", "field at -8.6512, 115.2167", "", ""}};
  EXPECT_EQ(client_->Post("/assets", items)->status, 422);
}

TEST_F(ServiceTest, TranscribeValidatesEveryFormField) {
  const auto id = ingest_clip("a.mp4", {10, 120, 10}, 1);
  const auto path = "/assets/" + id + "/transcribe";
  EXPECT_EQ(post_json(path, {{"chunk_len_s", 60}})->status, 422);
  EXPECT_EQ(post_json(path, {{"chunk_len_s", 4}})->status, 422);
  EXPECT_EQ(post_json(path, {{"threshold", 1.1}})->status, 422);
  EXPECT_EQ(post_json(path, {{"start_sec", 60}})->status, 422);
  EXPECT_EQ(post_json(path, {{"end_min", -1}})->status, 422);
  EXPECT_EQ(post_json(path, {{"start_sec", 5}, {"end_sec", 3}})->status, 422);
  EXPECT_EQ(post_json(path, {{"end_min", 10}})->status, 422);  // past the end of the asset
  EXPECT_EQ(post_json(path, {{"language", "Klingon"}})->status, 422);
  EXPECT_EQ(post_json(path, {{"provider", "cloud"}})->status, 422);
  EXPECT_EQ(post_json(path, {{"provider", "remote"}})->status, 422);  // no endpoint or key file
  EXPECT_EQ(client_->Post(path, "{not json", "application/json")->status, 400);
  EXPECT_EQ(post_json("/assets/0123456789abcdef/transcribe", Json::object())->status, 404);
  EXPECT_TRUE(body(client_->Get("/jobs")).empty());
}

TEST_F(ServiceTest, TranscribeJobRunsToDoneWithTheOfflineProvider) {
  const auto id = ingest_clip("a.mp4", {10, 120, 10}, 1);
  const Json req{{"start_min", 0}, {"start_sec", 0}, {"end_min", 0},       {"end_sec", 8},
                 {"chunk_len_s", 30}, {"threshold", 0.9}, {"language", "Bahasa Indonesia"},
                 {"provider", "offline"}, {"search_term", "durian"}};
  const auto r = post_json("/assets/" + id + "/transcribe", req, {{"Idempotency-Key", "t-1"}});
  ASSERT_EQ(r->status, 202) << r->body;
  const std::string job_id = body(r)["job_id"];
  const auto job = wait_job(job_id);
  ASSERT_EQ(job["status"], "done") << job.dump();
  EXPECT_EQ(job["progress"], 1.0);
  EXPECT_EQ(job["kind"], "transcribe");
  EXPECT_EQ(job["result_ref"]["language"], "id");
  EXPECT_EQ(job["result_ref"]["utterances_kept"], 1);
  ASSERT_EQ(job["result_ref"]["hits"].size(), 1u);
  EXPECT_EQ(job["result_ref"]["hits"][0]["start_s"], 2.0);

  const auto retry = post_json("/assets/" + id + "/transcribe", req, {{"Idempotency-Key", "t-1"}});
  EXPECT_EQ(body(retry)["job_id"], job_id);
  auto changed = req;
  changed["threshold"] = 0.5;
  EXPECT_EQ(post_json("/assets/" + id + "/transcribe", changed, {{"Idempotency-Key", "t-1"}})->status, 409);

  EXPECT_EQ(body(client_->Get("/assets/" + id + "/transcript"))["utterances"].size(), 1u);
  EXPECT_EQ(body(client_->Get("/assets/" + id + "/transcript?threshold=0.4"))["utterances"].size(), 2u);
  EXPECT_EQ(client_->Get("/assets/" + id + "/transcript?threshold=2")->status, 422);
  EXPECT_EQ(body(client_->Get("/assets/" + id + "/search?term=durian"))["hits"].size(), 1u);
  EXPECT_EQ(body(client_->Get("/assets/" + id + "/search?term=durian&threshold=0"))["hits"].size(), 2u);
  EXPECT_EQ(client_->Get("/assets/" + id + "/search?term=%20")->status, 422);
}

TEST_F(ServiceTest, VideoSupportsByteRanges) {
  const auto id = ingest_clip("a.mp4", {10, 120, 10}, 1);
  const auto original = slurp(dir_ / "a.mp4");
  const auto whole = client_->Get("/assets/" + id + "/video");
  ASSERT_EQ(whole->status, 200);
  EXPECT_EQ(whole->body, original);
  EXPECT_EQ(whole->get_header_value("Content-Type"), "video/mp4");
  const auto part = client_->Get("/assets/" + id + "/video", {{"Range", "bytes=100-199"}});
  ASSERT_EQ(part->status, 206);
  EXPECT_EQ(part->body, original.substr(100, 100));
  EXPECT_EQ(client_->Get("/assets/" + id + "/video", {{"Range", "bytes=999999999-"}})->status, 416);
}

TEST_F(ServiceTest, CurationWorkflowEndToEnd) {
  const auto durian_clip = ingest_clip("durian.mp4", {150, 100, 30}, 2);
  const auto banana_clip = ingest_clip("banana.mp4", {220, 210, 40}, 3);
  const Json cats = Json::array({{{"slug", "durian"}, {"display_name", "Durian"}, {"scientific_name", "Durio zibethinus"}},
                                 {{"slug", "banana"}, {"display_name", "Banana"}, {"scientific_name", "Musa spp."}}});
  ASSERT_EQ(post_json("/datasets", {{"dataset_id", "field"}, {"categories", cats}})->status, 201);
  EXPECT_EQ(post_json("/datasets", {{"dataset_id", "field"}})->status, 409);
  EXPECT_EQ(post_json("/datasets", {{"dataset_id", "Bad/Id"}})->status, 422);

  ASSERT_EQ(wait_job(body(post_json("/assets/" + durian_clip + "/transcribe", Json::object()))["job_id"])["status"],
            "done");
  auto lr = post_json("/labels", {{"dataset_id", "field"}, {"asset_id", durian_clip}, {"label", "durian"}, {"term", "durian"}});
  ASSERT_EQ(lr->status, 201) << lr->body;
  ASSERT_EQ(body(lr)["added"].size(), 1u);
  EXPECT_EQ(body(lr)["added"][0]["start_s"], 0.0);  // 2 s hit minus 2 s padding
  EXPECT_EQ(body(lr)["added"][0]["end_s"], 8.0);    // 4 s plus 5 s, clipped to the asset
  ASSERT_EQ(post_json("/labels", {{"dataset_id", "field"}, {"asset_id", banana_clip}, {"label", "banana"},
                                  {"intervals", {{1.0, 6.0}}}})->status, 201);
  EXPECT_EQ(post_json("/labels", {{"dataset_id", "field"}, {"asset_id", banana_clip}, {"label", "mango"},
                                  {"whole_video", true}})->status, 422);
  EXPECT_EQ(body(client_->Get("/labels?dataset_id=field"))["spans"].size(), 2u);

  auto job = wait_job(body(post_json("/datasets/field/extract", {{"fps_cap", 2}, {"context_tags", {"garden"}}}))["job_id"]);
  ASSERT_EQ(job["status"], "done") << job.dump();
  EXPECT_EQ(job["result_ref"]["frames_per_label"]["durian"], 16);
  EXPECT_EQ(job["result_ref"]["frames_per_label"]["banana"], 10);

  auto frames = body(client_->Get("/datasets/field/frames?label=banana"));
  ASSERT_EQ(frames["count"], 10);
  double prev = -1;
  for (const auto& f : frames["frames"]) {
    EXPECT_GT(f["timestamp_s"].get<double>(), prev);
    prev = f["timestamp_s"];
  }
  const std::string first = frames["frames"][0]["frame_id"];
  const auto img = client_->Get(frames["frames"][0]["image"].get<std::string>());
  ASSERT_EQ(img->status, 200);
  EXPECT_EQ(img->get_header_value("Content-Type"), "image/png");
  const auto decoded = decode_png({reinterpret_cast<const std::uint8_t*>(img->body.data()), img->body.size()});
  EXPECT_EQ(decoded.width, 48);

  auto report = body(post_json("/datasets/field/exclude", {{"frame_ids", {first}}, {"note", "hand in frame"}}));
  EXPECT_EQ(report["categories"]["banana"]["kept"], 9);
  EXPECT_EQ(report["categories"]["banana"]["excluded_by_reason"]["manual"], 1);
  EXPECT_EQ(post_json("/datasets/field/exclude", {{"frame_ids", {"ffffffffffffffff"}}})->status, 422);
  report = body(post_json("/datasets/field/include", {{"frame_ids", {first}}}));
  EXPECT_EQ(report["categories"]["banana"]["kept"], 10);

  // Export needs a valid balance and a split first.
  EXPECT_EQ(wait_job(body(post_json("/datasets/field/export", Json::object()))["job_id"])["error_detail"]["error"],
            "precondition");
  job = wait_job(body(post_json("/datasets/field/curate", {{"balance_min", 12}, {"balance_max", 14}, {"seed", 7}}))["job_id"]);
  ASSERT_EQ(job["status"], "done") << job.dump();
  EXPECT_EQ(job["result_ref"]["categories"]["durian"]["kept"], 14);
  EXPECT_EQ(job["result_ref"]["categories"]["banana"]["deficient"], true);
  const auto split = post_json("/datasets/field/split", {{"train_fraction", 0.5}, {"seed", 3}});
  ASSERT_EQ(split->status, 200) << split->body;
  EXPECT_EQ(body(split)["categories"]["durian"]["train"], 7);
  EXPECT_EQ(body(client_->Get("/datasets/field/report"))["split_recorded"], true);

  job = wait_job(body(post_json("/datasets/field/export", Json::object(), {{"Idempotency-Key", "x-1"}}))["job_id"]);
  ASSERT_EQ(job["status"], "done") << job.dump();
  EXPECT_EQ(job["result_ref"]["frames_exported"], 24);
  EXPECT_FALSE(job["result_ref"].contains("root"));
  const std::string release = job["result_ref"]["release"];
  EXPECT_EQ(body(client_->Get("/releases/" + release))["digest"], job["result_ref"]["digest"]);
  EXPECT_EQ(body(client_->Get("/datasets/field/releases")).size(), 1u);
  EXPECT_TRUE(scan_release(ws_->releases_dir() / release).empty());

  // Evaluation with the built-in baseline, then a vote over two logs.
  const auto log = run_baseline(*ws_, "field");
  std::ostringstream jsonl;
  write_prediction_log(jsonl, log);
  auto ev = post_json("/evaluations", {{"dataset_id", "field"}, {"k", {1, 3}}, {"log", jsonl.str()}});
  ASSERT_EQ(ev->status, 201) << ev->body;
  const auto doc = body(ev);
  EXPECT_EQ(doc["report"]["frames_scored"], 12);
  EXPECT_EQ(doc["report"]["macro_top1_error_pct"], 0.0);
  EXPECT_EQ(body(client_->Get("/reports/" + doc["report_id"].get<std::string>()))["report"], doc["report"]);
  auto ctx = post_json("/evaluations", {{"dataset_id", "field"}, {"log_id", doc["log_id"]}, {"subset_tag", "garden"}});
  ASSERT_EQ(ctx->status, 201) << ctx->body;
  EXPECT_EQ(body(ctx)["report"]["subset_tag"], "garden");
  EXPECT_EQ(post_json("/evaluations", {{"dataset_id", "field"}, {"log_id", doc["log_id"]}, {"subset_tag", "market"}})->status,
            422);
  PredictionLog other = log;
  for (auto& rec : other) rec.classifier_id = "copy";
  std::ostringstream other_jsonl;
  write_prediction_log(other_jsonl, other);
  const auto vote = post_json("/evaluations/vote",
                              {{"dataset_id", "field"}, {"log_ids", {doc["log_id"]}}, {"logs", {other_jsonl.str()}}});
  ASSERT_EQ(vote->status, 201) << vote->body;
  EXPECT_EQ(body(vote)["report"]["classifier_id"], "vote");
  EXPECT_EQ(post_json("/evaluations/vote", {{"dataset_id", "field"}, {"log_ids", {doc["log_id"]}}})->status, 422);

  const auto ds = body(client_->Get("/datasets/field"));
  EXPECT_EQ(ds["frames"], 26);
  EXPECT_GE(ds["versions"].size(), 6u);
  EXPECT_EQ(body(client_->Get("/datasets/field?version=0"))["frames"].size(), 0u);
}

TEST_F(ServiceTest, MergeJobAddsACollection) {
  const auto a = ingest_clip("a.mp4", {150, 100, 30}, 4);
  const auto b = ingest_clip("b.mp4", {150, 100, 30}, 5);
  const Json cats = Json::array({{{"slug", "durian"}, {"display_name", "Durian"}}});
  ASSERT_EQ(post_json("/datasets", {{"dataset_id", "m"}, {"categories", cats}})->status, 201);
  ASSERT_EQ(post_json("/labels", {{"dataset_id", "m"}, {"asset_id", a}, {"label", "durian"}, {"whole_video", true}})->status,
            201);
  wait_job(body(post_json("/datasets/m/extract", Json::object()))["job_id"]);
  wait_job(body(post_json("/datasets/m/curate", {{"balance_min", 10}, {"balance_max", 100}}))["job_id"]);
  post_json("/datasets/m/split", Json::object());
  EXPECT_EQ(post_json("/datasets/m/merge", {{"target_label", "banana"}, {"inputs", {{{"asset_id", b}}}}})->status, 422);
  const auto job = wait_job(body(post_json("/datasets/m/merge", {{"target_label", "durian"},
                                                                 {"inputs", {{{"asset_id", b}, {"intervals", {{0, 4}}}}}}}))["job_id"]);
  ASSERT_EQ(job["status"], "done") << job.dump();
  EXPECT_EQ(job["result_ref"]["frames_added"], 8);
  EXPECT_EQ(job["result_ref"]["categories"]["durian"]["kept_after"], 24);
  EXPECT_EQ(body(client_->Get("/datasets/m/report"))["split_recorded"], true);
}

TEST_F(ServiceTest, NoPathEscapesItsArea) {
  const Json cats = Json::array({{{"slug", "durian"}, {"display_name", "Durian"}}});
  post_json("/datasets", {{"dataset_id", "one"}, {"categories", cats}});
  post_json("/datasets", {{"dataset_id", "two"}, {"categories", cats}});
  for (const std::string path :
       {"/datasets/..%2F..%2Fcatchrel.json", "/datasets/..%2Ftwo/report", "/datasets/%2E%2E/report",
        "/assets/..%2F..%2Fcatchrel.json", "/assets/..%2Fcatchrel.json/video", "/releases/..%2F..%2Fcatchrel.json",
        "/releases/one-v1%2F..%2F..%2Fcatchrel.json", "/reports/..%2F..%2Fcatchrel.json", "/jobs/..%2F..%2Fcatchrel.json",
        "/datasets/one/frames/..%2F..%2F..%2Fcatchrel.json/image", "/assets/../../etc/passwd"}) {
    const auto r = client_->Get(path);
    ASSERT_TRUE(r) << path;
    EXPECT_GE(r->status, 400) << path;
    EXPECT_LT(r->status, 500) << path;
    EXPECT_EQ(r->body.find("offline_script"), std::string::npos) << path;
  }
  // A frame id from dataset "two" is unknown inside dataset "one".
  EXPECT_EQ(client_->Get("/datasets/one/frames/0123456789abcdef/image")->status, 404);
  // Responses never carry absolute workspace paths.
  EXPECT_EQ(client_->Get("/datasets/one")->body.find(ws_->root().string()), std::string::npos);
}

TEST_F(ServiceTest, BearerTokenWhenConfigured) {
  shutdown();
  start({{"api_token", "s3cret"}});
  EXPECT_EQ(client_->Get("/meta")->status, 401);
  EXPECT_EQ(client_->Get("/meta", {{"Authorization", "Bearer wrong"}})->status, 401);
  EXPECT_EQ(client_->Get("/meta", {{"Authorization", "Bearer s3cret"}})->status, 200);
}
