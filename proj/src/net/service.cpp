#include "catchrel/service.hpp"

#include <httplib.h>

#include <fstream>
#include <regex>

#include "catchrel/bali26.hpp"
#include "catchrel/pipeline.hpp"

namespace catchrel {

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::not_found: return 404;
    case ErrorCode::unsupported_container: return 415;
    case ErrorCode::duplicate: return 409;
    case ErrorCode::precondition: return 409;
    case ErrorCode::parse_error: return 400;
    case ErrorCode::provider_unreachable:
    case ErrorCode::provider_error: return 502;
    case ErrorCode::unwritable_directory:
    case ErrorCode::io_error:
    case ErrorCode::decode_failure: return 500;
    default: return 422;
  }
}

namespace {

using httplib::Request;
using httplib::Response;

constexpr const char* kJson = "application/json";

void send_json(Response& res, const Json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(2) + "\n", kJson);
}

void send_error(Response& res, int status, std::string_view code, const std::string& message,
                const std::vector<std::string>& details = {}) {
  send_json(res, {{"error", code}, {"message", message}, {"details", details}}, status);
}

Json body_json(const Request& req) {
  if (req.body.empty()) return Json::object();
  try {
    auto j = Json::parse(req.body);
    if (!j.is_object()) throw Error(ErrorCode::parse_error, "request body must be a JSON object");
    return j;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::parse_error, std::string("request body: ") + e.what());
  }
}

bool has(const Json& j, const char* key) { return j.contains(key) && !j.at(key).is_null(); }

template <typename T>
std::optional<T> opt_field(const Json& j, const char* key) {
  if (!has(j, key)) return std::nullopt;
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception&) {
    throw Error(ErrorCode::invalid_argument, std::string("field '") + key + "' has the wrong type");
  }
}

template <typename T>
T req_field(const Json& j, const char* key) {
  auto v = opt_field<T>(j, key);
  if (!v) throw Error(ErrorCode::invalid_argument, std::string("field '") + key + "' is required");
  return *v;
}

std::optional<std::string> query(const Request& req, const char* key) {
  if (!req.has_param(key)) return std::nullopt;
  return req.get_param_value(key);
}

std::optional<double> query_number(const Request& req, const char* key) {
  const auto v = query(req, key);
  if (!v) return std::nullopt;
  try {
    std::size_t used = 0;
    const double d = std::stod(*v, &used);
    if (used != v->size()) throw std::invalid_argument(*v);
    return d;
  } catch (const std::exception&) {
    throw Error(ErrorCode::invalid_argument, std::string("query parameter '") + key + "' must be a number");
  }
}

/// One form minute or second field: an integer in [0, 59].
std::optional<int> clock_field(const Json& j, const char* key) {
  if (!has(j, key)) return std::nullopt;
  const auto& v = j.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0 || v.get<long long>() > 59) {
    throw Error(ErrorCode::invalid_argument, std::string(key) + " must be an integer in [0, 59]");
  }
  return v.get<int>();
}

std::string resolve_language(const std::string& value) {
  for (const auto& [tag, name] : supported_languages()) {
    if (value == tag || value == name) return tag;
  }
  static const std::regex bcp47("^[a-z]{2,3}(-[A-Za-z0-9]{2,8})*$");
  if (std::regex_match(value, bcp47)) return value;
  throw Error(ErrorCode::invalid_argument, "unknown language '" + value + "'");
}

Json public_summary(const ReleaseSummary& s) {
  Json j = s;
  j.erase("root");
  j["release"] = s.root.filename().string();
  return j;
}

bool is_release_name(const std::string& name) {
  static const std::regex re("^[a-z0-9]+(-[a-z0-9]+)*-v[0-9]+$");
  return name.size() <= 96 && std::regex_match(name, re);
}

std::vector<std::string> string_list(const Json& j, const char* key) {
  auto v = opt_field<std::vector<std::string>>(j, key).value_or(std::vector<std::string>{});
  if (v.empty()) throw Error(ErrorCode::empty_list, std::string("field '") + key + "' must be a non-empty list");
  return v;
}

std::vector<std::pair<double, double>> interval_list(const Json& j, const char* key) {
  std::vector<std::pair<double, double>> out;
  if (!has(j, key)) return out;
  for (const auto& iv : j.at(key)) {
    if (iv.is_array() && iv.size() == 2) {
      out.emplace_back(iv[0].get<double>(), iv[1].get<double>());
    } else if (iv.is_object()) {
      out.emplace_back(iv.at("start_s").get<double>(), iv.at("end_s").get<double>());
    } else {
      throw Error(ErrorCode::invalid_argument, std::string(key) + " entries are [start_s, end_s]");
    }
  }
  return out;
}

PredictionLog log_from_field(const Json& v) {
  PredictionLog log;
  try {
    if (v.is_string()) {
      std::istringstream in(v.get<std::string>());
      return read_prediction_log(in);
    }
    if (v.is_array()) {
      for (const auto& r : v) log.push_back(r.get<PredictionRecord>());
      return log;
    }
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::parse_error, std::string("prediction log: ") + e.what());
  }
  throw Error(ErrorCode::invalid_argument, "log must be JSONL text or an array of records");
}

}  // namespace

struct Service::Impl {
  Workspace& ws;
  MediaBackend& backend;
  JobQueue jobs;
  httplib::Server server;
  std::mutex asset_locks_mu;
  std::map<std::string, std::unique_ptr<std::mutex>> asset_locks;

  Impl(Workspace& w, MediaBackend& b) : ws(w), backend(b), jobs(w.jobs_dir(), w.config().parallelism) { routes(); }

  std::mutex& asset_lock(const std::string& id) {
    std::lock_guard lock(asset_locks_mu);
    auto& slot = asset_locks[id];
    if (!slot) slot = std::make_unique<std::mutex>();
    return *slot;
  }

  using Handler = std::function<void(const Request&, Response&)>;

  /// Wraps a handler with the bearer check and error mapping.
  Handler guard(Handler h) {
    return [this, h = std::move(h)](const Request& req, Response& res) {
      const auto& token = ws.config().api_token;
      if (!token.empty() && req.get_header_value("Authorization") != "Bearer " + token) {
        send_error(res, 401, "unauthorized", "missing or wrong bearer token");
        return;
      }
      try {
        h(req, res);
      } catch (const Error& e) {
        send_error(res, http_status(e.code()), to_string(e.code()), e.what(), e.details());
      } catch (const std::exception& e) {
        send_error(res, 500, "internal", e.what());
      }
    };
  }

  void get(const std::string& pattern, Handler h) { server.Get(pattern, guard(std::move(h))); }
  void post(const std::string& pattern, Handler h) { server.Post(pattern, guard(std::move(h))); }

  void accepted(Response& res, const Job& job) {
    send_json(res, {{"job_id", job.job_id}, {"status", job.status}, {"job", Json(job)}}, 202);
  }

  std::string idempotency_key(const Request& req) const { return req.get_header_value("Idempotency-Key"); }

  void routes() {
    server.set_payload_max_length(std::size_t{4} << 30);

    get("/meta", [this](const Request&, Response& res) { send_json(res, meta()); });

    // --- assets ---------------------------------------------------------
    post("/assets", [this](const Request& req, Response& res) { upload(req, res); });
    get("/assets", [this](const Request&, Response& res) { send_json(res, ws.list_assets()); });
    get(R"(/assets/([^/]+))", [this](const Request& req, Response& res) {
      send_json(res, ws.get_asset(req.matches[1]));
    });
    get(R"(/assets/([^/]+)/video)", [this](const Request& req, Response& res) { video(req, res); });
    post(R"(/assets/([^/]+)/transcribe)", [this](const Request& req, Response& res) { transcribe(req, res); });
    get(R"(/assets/([^/]+)/transcript)", [this](const Request& req, Response& res) {
      const auto t = ws.load_transcript(req.matches[1]);
      const double threshold = query_number(req, "threshold").value_or(ws.config().confidence_threshold);
      check_threshold(threshold);
      const auto kept = filter_utterances(t, threshold);
      Json j = kept;
      j["threshold"] = threshold;
      j["utterances_total"] = t.utterances.size();
      send_json(res, j);
    });
    get(R"(/assets/([^/]+)/search)", [this](const Request& req, Response& res) {
      const auto term = query(req, "term").value_or("");
      const auto threshold = query_number(req, "threshold");
      if (threshold) check_threshold(*threshold);
      send_json(res, {{"term", term}, {"hits", search_asset(ws, req.matches[1], term, threshold)}});
    });

    // --- labels and datasets --------------------------------------------
    post("/labels", [this](const Request& req, Response& res) { label(req, res); });
    get("/labels", [this](const Request& req, Response& res) {
      const auto ds = query(req, "dataset_id");
      if (!ds) throw Error(ErrorCode::invalid_argument, "query parameter 'dataset_id' is required");
      ws.dataset(*ds);
      send_json(res, {{"dataset_id", *ds}, {"spans", ws.load_spans(*ds)}});
    });
    post("/datasets", [this](const Request& req, Response& res) { create_dataset(req, res); });
    get("/datasets", [this](const Request&, Response& res) {
      Json out = Json::array();
      for (const auto& id : ws.list_datasets()) out.push_back(dataset_summary(ws.dataset(id).head()));
      send_json(res, out);
    });
    get(R"(/datasets/([^/]+))", [this](const Request& req, Response& res) {
      auto store = ws.dataset(req.matches[1]);
      if (const auto v = query_number(req, "version")) {
        send_json(res, store.load(static_cast<std::int64_t>(*v)));
      } else if (query(req, "full").value_or("") == "1") {
        send_json(res, store.head());
      } else {
        auto j = dataset_summary(store.head());
        j["versions"] = store.versions();
        send_json(res, j);
      }
    });
    get(R"(/datasets/([^/]+)/frames)", [this](const Request& req, Response& res) { frames(req, res); });
    get(R"(/datasets/([^/]+)/frames/([^/]+)/image)", [this](const Request& req, Response& res) { image(req, res); });
    post(R"(/datasets/([^/]+)/exclude)", [this](const Request& req, Response& res) { manual(req, res, true); });
    post(R"(/datasets/([^/]+)/include)", [this](const Request& req, Response& res) { manual(req, res, false); });
    post(R"(/datasets/([^/]+)/split)", [this](const Request& req, Response& res) {
      const auto b = body_json(req);
      SplitRequest r;
      r.dataset_id = req.matches[1];
      r.train_fraction = opt_field<double>(b, "train_fraction").value_or(kDefaultTrainFraction);
      r.seed = opt_field<std::uint64_t>(b, "seed").value_or(0);
      r.normalize = opt_field<bool>(b, "normalize").value_or(true);
      send_json(res, run_split(ws, r));
    });
    get(R"(/datasets/([^/]+)/report)", [this](const Request& req, Response& res) {
      send_json(res, curation_report(ws.dataset(req.matches[1]).head()));
    });
    get(R"(/datasets/([^/]+)/releases)", [this](const Request& req, Response& res) {
      const std::string id = req.matches[1];
      ws.dataset(id);
      Json out = Json::array();
      for (const auto& e : std::filesystem::directory_iterator(ws.releases_dir())) {
        const auto name = e.path().filename().string();
        if (is_release_name(name) && name.rfind(id + "-v", 0) == 0 && std::filesystem::exists(e.path() / "summary.json")) {
          out.push_back(release_summary(name));
        }
      }
      send_json(res, out);
    });
    get(R"(/releases/([^/]+))", [this](const Request& req, Response& res) {
      send_json(res, release_summary(req.matches[1]));
    });

    // --- asynchronous dataset operations --------------------------------
    post(R"(/datasets/([^/]+)/extract)", [this](const Request& req, Response& res) {
      const auto b = body_json(req);
      ExtractRequest r;
      r.dataset_id = req.matches[1];
      r.fps_cap = opt_field<double>(b, "fps_cap");
      if (r.fps_cap && !(*r.fps_cap > 0)) throw Error(ErrorCode::invalid_argument, "fps_cap must be positive");
      const auto tags = opt_field<std::vector<std::string>>(b, "context_tags").value_or(std::vector<std::string>{});
      r.context_tags = {tags.begin(), tags.end()};
      ws.dataset(r.dataset_id);
      accepted(res, jobs.submit(JobKind::extract, with_target(b, r.dataset_id),
                                [this, r](const JobQueue::ProgressFn& p) { return run_extract(ws, backend, r, p); },
                                idempotency_key(req)));
    });
    post(R"(/datasets/([^/]+)/curate)", [this](const Request& req, Response& res) {
      const auto b = body_json(req);
      CurateRequest r;
      r.dataset_id = req.matches[1];
      r.blur_threshold = opt_field<double>(b, "blur_threshold");
      r.hamming_max = opt_field<int>(b, "hamming_max");
      r.balance_min = opt_field<std::size_t>(b, "balance_min");
      r.balance_max = opt_field<std::size_t>(b, "balance_max");
      r.seed = opt_field<std::uint64_t>(b, "seed").value_or(0);
      ws.dataset(r.dataset_id);
      accepted(res, jobs.submit(JobKind::curate, with_target(b, r.dataset_id),
                                [this, r](const JobQueue::ProgressFn&) { return run_curate(ws, r); },
                                idempotency_key(req)));
    });
    post(R"(/datasets/([^/]+)/export)", [this](const Request& req, Response& res) {
      const auto b = body_json(req);
      const std::string id = req.matches[1];
      const bool include_excluded = opt_field<bool>(b, "include_excluded").value_or(false);
      ws.dataset(id);
      accepted(res, jobs.submit(JobKind::export_, with_target(b, id),
                                [this, id, include_excluded](const JobQueue::ProgressFn&) {
                                  return public_summary(run_export(ws, id, include_excluded));
                                },
                                idempotency_key(req)));
    });
    post(R"(/datasets/([^/]+)/merge)", [this](const Request& req, Response& res) {
      const auto b = body_json(req);
      MergeRequest r;
      r.dataset_id = req.matches[1];
      r.target_label = req_field<std::string>(b, "target_label");
      r.fps_cap = opt_field<double>(b, "fps_cap");
      const auto tags = opt_field<std::vector<std::string>>(b, "context_tags").value_or(std::vector<std::string>{});
      r.context_tags = {tags.begin(), tags.end()};
      if (!has(b, "inputs") || !b["inputs"].is_array()) throw Error(ErrorCode::invalid_argument, "inputs is required");
      for (const auto& in : b["inputs"]) {
        MergeInput mi;
        mi.asset_id = req_field<std::string>(in, "asset_id");
        ws.get_asset(mi.asset_id);
        mi.intervals = interval_list(in, "intervals");
        r.inputs.push_back(std::move(mi));
      }
      require_label(ws.dataset(r.dataset_id).head(), r.target_label);
      accepted(res, jobs.submit(JobKind::merge, with_target(b, r.dataset_id),
                                [this, r](const JobQueue::ProgressFn&) { return Json(run_merge(ws, backend, r)); },
                                idempotency_key(req)));
    });

    // --- evaluation -----------------------------------------------------
    post("/evaluations", [this](const Request& req, Response& res) {
      const auto b = body_json(req);
      const auto r = evaluate_request(b);
      if (!has(b, "log") && !has(b, "log_id")) throw Error(ErrorCode::invalid_argument, "log or log_id is required");
      const auto log = has(b, "log") ? log_from_field(b["log"]) : ws.load_log(b["log_id"].get<std::string>());
      send_json(res, run_evaluate(ws, r, log), 201);
    });
    post("/evaluations/vote", [this](const Request& req, Response& res) {
      const auto b = body_json(req);
      const auto r = evaluate_request(b);
      std::vector<PredictionLog> logs;
      if (has(b, "log_ids")) {
        for (const auto& id : b["log_ids"]) logs.push_back(ws.load_log(id.get<std::string>()));
      }
      if (has(b, "logs")) {
        for (const auto& l : b["logs"]) logs.push_back(log_from_field(l));
      }
      send_json(res, run_vote(ws, r, logs), 201);
    });
    get(R"(/reports/([^/]+))", [this](const Request& req, Response& res) {
      auto doc = ws.load_report(req.matches[1]);
      doc["report_id"] = req.matches[1];
      send_json(res, doc);
    });

    // --- jobs -----------------------------------------------------------
    get("/jobs", [this](const Request&, Response& res) { send_json(res, jobs.list()); });
    get(R"(/jobs/([^/]+))", [this](const Request& req, Response& res) { send_json(res, jobs.get(req.matches[1])); });

    server.set_error_handler([](const Request&, Response& res) {
      if (res.body.empty()) {
        send_error(res, res.status, res.status == 404 ? "not-found" : "http-error", httplib::status_message(res.status));
      }
    });
  }

  static Json with_target(const Json& body, const std::string& target) {
    return {{"target", target}, {"body", body}};
  }

  Json meta() const {
    const auto& c = ws.config();
    Json langs = Json::array();
    for (const auto& [tag, name] : supported_languages()) langs.push_back({{"tag", tag}, {"name", name}});
    return {{"service", "catchrel"},
            {"containers", {".webm", ".mp4"}},
            {"languages", langs},
            {"providers", {"offline", "remote"}},
            {"limits",
             {{"chunk_len_s", {{"min", kMinChunkSeconds}, {"max", kMaxChunkSeconds}}},
              {"threshold", {{"min", 0.0}, {"max", 1.0}}},
              {"clock_field", {{"min", 0}, {"max", 59}}}}},
            {"defaults",
             {{"chunk_len_s", c.chunk_len_s},
              {"threshold", c.confidence_threshold},
              {"language", c.language},
              {"provider", c.provider},
              {"fps_cap", c.fps_cap},
              {"blur_threshold", c.blur_threshold},
              {"hamming_max", c.hamming_max},
              {"balance_min", c.balance_min},
              {"balance_max", c.balance_max},
              {"pad_before_s", kDefaultPadBefore},
              {"pad_after_s", kDefaultPadAfter},
              {"train_fraction", kDefaultTrainFraction}}},
            {"auth", !c.api_token.empty()}};
  }

  void upload(const Request& req, Response& res) {
    if (!req.is_multipart_form_data() || !req.has_file("file")) {
      throw Error(ErrorCode::invalid_argument, "multipart field 'file' is required");
    }
    const auto file = req.get_file_value("file");
    const auto name = std::filesystem::path(file.filename).filename();
    if (name.empty() || !container_from_path(name)) {
      throw Error(ErrorCode::unsupported_container, "only .webm and .mp4 are accepted");
    }
    const auto note = req.has_file("site_note") ? req.get_file_value("site_note").content : std::string();
    const auto tmp_dir = ws.root() / "assets" / ".upload";
    std::filesystem::create_directories(tmp_dir);
    const auto tmp = tmp_dir / (content_id(file.content) + name.extension().string());
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      out.write(file.content.data(), static_cast<std::streamsize>(file.content.size()));
      if (!out) throw Error(ErrorCode::io_error, "cannot stage upload");
    }
    try {
      const auto asset = ws.ingest(backend, tmp, note, name.string());
      std::filesystem::remove(tmp);
      send_json(res, asset, 201);
    } catch (...) {
      std::filesystem::remove(tmp);
      throw;
    }
  }

  void video(const Request& req, Response& res) {
    const auto src = ws.asset_source(req.matches[1]);
    const auto size = std::filesystem::file_size(src.file);
    const auto path = src.file;
    const char* mime = src.asset.container == Container::webm ? "video/webm" : "video/mp4";
    res.set_header("Accept-Ranges", "bytes");
    res.set_content_provider(size, mime, [path](std::size_t offset, std::size_t length, httplib::DataSink& sink) {
      std::ifstream in(path, std::ios::binary);
      in.seekg(static_cast<std::streamoff>(offset));
      std::vector<char> buf(std::min<std::size_t>(length, 1 << 16));
      while (length > 0 && in) {
        const auto n = std::min(length, buf.size());
        in.read(buf.data(), static_cast<std::streamsize>(n));
        const auto got = static_cast<std::size_t>(in.gcount());
        if (got == 0 || !sink.write(buf.data(), got)) return false;
        offset += got;
        length -= got;
      }
      return true;
    });
  }

  void transcribe(const Request& req, Response& res) {
    const auto b = body_json(req);
    const auto asset = ws.get_asset(req.matches[1]);
    TranscribeRequest r;
    r.asset_id = asset.asset_id;
    const auto sm = clock_field(b, "start_min"), ss = clock_field(b, "start_sec");
    const auto em = clock_field(b, "end_min"), es = clock_field(b, "end_sec");
    const double start = sm.value_or(0) * 60.0 + ss.value_or(0);
    if (em || es) {
      r.window = {start, em.value_or(0) * 60.0 + es.value_or(0)};
    } else if (start > 0) {
      r.window = {start, asset.duration_s};
    }
    r.chunk_len_s = opt_field<double>(b, "chunk_len_s");
    r.threshold = opt_field<double>(b, "threshold");
    if (auto lang = opt_field<std::string>(b, "language")) r.language = resolve_language(*lang);
    r.provider = opt_field<std::string>(b, "provider");
    r.search_term = opt_field<std::string>(b, "search_term");
    if (r.search_term && r.search_term->empty()) r.search_term.reset();
    if (has(b, "credential")) {
      if (!b["credential"].is_object()) throw Error(ErrorCode::credential_invalid, "credential must be a JSON key object");
      const auto text = b["credential"].dump();
      const auto dir = ws.root() / "credentials";
      std::filesystem::create_directories(dir);
      const auto path = dir / (content_id(text) + ".json");
      detail::write_text_atomic(path, text);
      std::filesystem::permissions(path, std::filesystem::perms::owner_read | std::filesystem::perms::owner_write);
      r.credential_path = path.string();
    }
    validate_transcribe_request(r, asset);
    make_provider(ws.config(), r);  // configuration problems surface now, not inside the job
    accepted(res, jobs.submit(JobKind::transcribe, with_target(b, r.asset_id),
                              [this, r](const JobQueue::ProgressFn& p) {
                                std::lock_guard lock(asset_lock(r.asset_id));
                                return Json(run_transcribe(ws, backend, r, p));
                              },
                              idempotency_key(req)));
  }

  void label(const Request& req, Response& res) {
    const auto b = body_json(req);
    LabelRequest r;
    r.dataset_id = req_field<std::string>(b, "dataset_id");
    r.asset_id = req_field<std::string>(b, "asset_id");
    r.label = req_field<std::string>(b, "label");
    r.term = opt_field<std::string>(b, "term");
    r.threshold = opt_field<double>(b, "threshold");
    r.pad_before_s = opt_field<double>(b, "pad_before_s").value_or(kDefaultPadBefore);
    r.pad_after_s = opt_field<double>(b, "pad_after_s").value_or(kDefaultPadAfter);
    r.whole_video = opt_field<bool>(b, "whole_video").value_or(false);
    r.intervals = interval_list(b, "intervals");
    r.note = opt_field<std::string>(b, "note").value_or("");
    const auto added = run_label(ws, r);
    send_json(res, {{"dataset_id", r.dataset_id}, {"added", added}, {"spans", ws.load_spans(r.dataset_id)}}, 201);
  }

  void create_dataset(const Request& req, Response& res) {
    const auto b = body_json(req);
    const auto id = req_field<std::string>(b, "dataset_id");
    std::vector<Category> cats;
    if (opt_field<std::string>(b, "preset").value_or("") == "bali26") {
      cats = bali26_categories();
    } else if (has(b, "preset")) {
      throw Error(ErrorCode::invalid_argument, "unknown preset");
    }
    if (has(b, "categories")) {
      for (const auto& c : b["categories"]) cats.push_back(c.get<Category>());
    }
    send_json(res, dataset_summary(ws.create_dataset(id, cats).head()), 201);
  }

  static Json dataset_summary(const DatasetManifest& m) {
    std::size_t kept = 0;
    for (const auto& f : m.frames) kept += !f.excluded;
    return {{"dataset_id", m.dataset_id},
            {"version", m.version},
            {"categories", m.categories},
            {"assets", m.assets.size()},
            {"frames", m.frames.size()},
            {"frames_kept", kept},
            {"balance_valid", m.balance_valid()},
            {"split_recorded", m.split_recorded()},
            {"last_operation", m.last_operation}};
  }

  void frames(const Request& req, Response& res) {
    const std::string id = req.matches[1];
    const auto m = ws.dataset(id).head();
    const auto label = query(req, "label");
    const auto status = query(req, "status").value_or("all");
    if (status != "all" && status != "kept" && status != "excluded") {
      throw Error(ErrorCode::invalid_argument, "status must be all, kept or excluded");
    }
    const auto tag = query(req, "tag");
    std::vector<const FrameRecord*> sel;
    for (const auto& f : m.frames) {
      if (label && f.label != *label) continue;
      if (status == "kept" && f.excluded) continue;
      if (status == "excluded" && !f.excluded) continue;
      if (tag && !f.context_tags.contains(*tag)) continue;
      sel.push_back(&f);
    }
    std::sort(sel.begin(), sel.end(), [](const FrameRecord* a, const FrameRecord* b) {
      return std::tie(a->label, a->asset_id, a->timestamp_s, a->frame_id) <
             std::tie(b->label, b->asset_id, b->timestamp_s, b->frame_id);
    });
    Json out = Json::array();
    for (const auto* f : sel) {
      Json j = *f;
      j["split"] = m.assignment(f->frame_id);
      j["image"] = "/datasets/" + id + "/frames/" + f->frame_id + "/image";
      out.push_back(std::move(j));
    }
    send_json(res, {{"dataset_id", id}, {"version", m.version}, {"count", out.size()}, {"frames", out}});
  }

  void image(const Request& req, Response& res) {
    const std::string id = req.matches[1];
    const std::string frame_id = req.matches[2];
    const auto m = ws.dataset(id).head();
    const auto it = std::find_if(m.frames.begin(), m.frames.end(),
                                 [&](const FrameRecord& f) { return f.frame_id == frame_id; });
    if (it == m.frames.end()) throw Error(ErrorCode::not_found, "frame '" + frame_id + "'");
    const auto bytes = read_file_bytes(ws.frame_store(id).path_for(it->label, it->frame_id));
    res.set_content(std::string(bytes.begin(), bytes.end()), "image/png");
  }

  void manual(const Request& req, Response& res, bool exclude) {
    const auto b = body_json(req);
    const auto ids = string_list(b, "frame_ids");
    const auto note = opt_field<std::string>(b, "note").value_or("");
    const auto m = run_manual(ws, req.matches[1], ids, exclude, note);
    send_json(res, curation_report(m));
  }

  EvaluateRequest evaluate_request(const Json& b) const {
    EvaluateRequest r;
    r.dataset_id = req_field<std::string>(b, "dataset_id");
    if (has(b, "k")) {
      r.ks = b["k"].is_array() ? b["k"].get<std::vector<int>>() : std::vector<int>{b["k"].get<int>()};
    }
    for (int k : r.ks) {
      if (k < 1) throw Error(ErrorCode::invalid_argument, "k must be positive");
    }
    r.subset_tag = opt_field<std::string>(b, "subset_tag");
    if (auto s = opt_field<std::string>(b, "split")) {
      if (*s == "train") r.split = SplitAssignment::train;
      else if (*s != "eval") throw Error(ErrorCode::invalid_argument, "split must be train or eval");
    }
    return r;
  }

  Json release_summary(const std::string& name) const {
    if (!is_release_name(name)) throw Error(ErrorCode::not_found, "release '" + name + "'");
    const auto p = ws.releases_dir() / name / "summary.json";
    if (!std::filesystem::exists(p)) throw Error(ErrorCode::not_found, "release '" + name + "'");
    auto j = Json::parse(detail::read_text(p));
    j.erase("root");
    j["release"] = name;
    const auto digest = detail::read_text(ws.releases_dir() / name / "DIGEST");
    j["digest"] = digest.substr(0, digest.find_first_of(" \n"));
    return j;
  }
};

Service::Service(Workspace& ws, MediaBackend& backend) : impl_(std::make_unique<Impl>(ws, backend)) {}
Service::~Service() { stop(); }

int Service::bind_ephemeral(const std::string& host) { return impl_->server.bind_to_any_port(host); }
bool Service::bind(const std::string& host, int port) { return impl_->server.bind_to_port(host, port); }
void Service::serve() { impl_->server.listen_after_bind(); }
void Service::stop() {
  if (impl_->server.is_running()) impl_->server.stop();
}
void Service::wait_until_ready() const { impl_->server.wait_until_ready(); }
JobQueue& Service::jobs() { return impl_->jobs; }

}  // namespace catchrel
