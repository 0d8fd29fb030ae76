#pragma once

// Asynchronous jobs for the service: an in-process queue drained by a fixed
// worker pool. Every state change is written to <jobs_dir>/<job_id>.json, so
// a restarted service still answers for old jobs; jobs that were queued or
// running when the process died are reported as failed ("interrupted").

#include <chrono>
#include <condition_variable>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "catchrel/hashing.hpp"
#include "catchrel/manifest_store.hpp"

namespace catchrel {

enum class JobKind { transcribe, extract, curate, export_, evaluate, merge };
enum class JobStatus { queued, running, done, failed };

NLOHMANN_JSON_SERIALIZE_ENUM(JobKind, {{JobKind::transcribe, "transcribe"},
                                       {JobKind::extract, "extract"},
                                       {JobKind::curate, "curate"},
                                       {JobKind::export_, "export"},
                                       {JobKind::evaluate, "evaluate"},
                                       {JobKind::merge, "merge"}})
NLOHMANN_JSON_SERIALIZE_ENUM(JobStatus, {{JobStatus::queued, "queued"},
                                         {JobStatus::running, "running"},
                                         {JobStatus::done, "done"},
                                         {JobStatus::failed, "failed"}})

inline bool is_terminal(JobStatus s) { return s == JobStatus::done || s == JobStatus::failed; }

struct Job {
  std::string job_id;
  JobKind kind = JobKind::transcribe;
  JobStatus status = JobStatus::queued;
  double progress = 0.0;
  Json result_ref;    // null until done
  Json error_detail;  // null unless failed
  std::string idempotency_key;
  std::string request_digest;
  std::string created_at;
  std::string updated_at;

  bool operator==(const Job&) const = default;
};

inline void to_json(Json& j, const Job& x) {
  j = {{"job_id", x.job_id},         {"kind", x.kind},
       {"status", x.status},         {"progress", x.progress},
       {"result_ref", x.result_ref}, {"error_detail", x.error_detail},
       {"idempotency_key", x.idempotency_key}, {"request_digest", x.request_digest},
       {"created_at", x.created_at}, {"updated_at", x.updated_at}};
}

inline void from_json(const Json& j, Job& x) {
  x.job_id = j.at("job_id").get<std::string>();
  x.kind = j.at("kind").get<JobKind>();
  x.status = j.at("status").get<JobStatus>();
  x.progress = j.at("progress").get<double>();
  x.result_ref = j.value("result_ref", Json());
  x.error_detail = j.value("error_detail", Json());
  x.idempotency_key = j.value("idempotency_key", "");
  x.request_digest = j.value("request_digest", "");
  x.created_at = j.value("created_at", "");
  x.updated_at = j.value("updated_at", "");
}

inline std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline bool is_job_id(std::string_view id) {
  return id.size() == 16 && std::all_of(id.begin(), id.end(), [](char c) {
           return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
         });
}

class JobQueue {
 public:
  /// Reports fractional progress; values below the current one are ignored.
  using ProgressFn = std::function<void(double)>;
  using Work = std::function<Json(const ProgressFn&)>;

  JobQueue(std::filesystem::path dir, int workers) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
    recover();
    for (int i = 0; i < std::max(1, workers); ++i) {
      pool_.emplace_back([this](std::stop_token st) { run(st); });
    }
  }

  ~JobQueue() {
    {
      std::lock_guard lock(mu_);
      stopping_ = true;
    }
    cv_.notify_all();
    for (auto& t : pool_) t.request_stop();
    pool_.clear();
  }

  JobQueue(const JobQueue&) = delete;
  JobQueue& operator=(const JobQueue&) = delete;

  /// Enqueues `work`. With a non-empty idempotency key, a retry of the same
  /// request returns the original job; reusing the key for a different
  /// request is a conflict.
  Job submit(JobKind kind, const Json& request, Work work, const std::string& idempotency_key = {}) {
    const auto digest = content_id(Json{{"kind", kind}, {"request", request}}.dump());
    std::lock_guard lock(mu_);
    if (!idempotency_key.empty()) {
      if (auto it = by_key_.find(idempotency_key); it != by_key_.end()) {
        const auto& prior = jobs_.at(it->second);
        if (prior.request_digest != digest) {
          throw Error(ErrorCode::duplicate, "idempotency key was used for a different request");
        }
        return prior;
      }
    }
    Job job;
    job.kind = kind;
    job.idempotency_key = idempotency_key;
    job.request_digest = digest;
    job.created_at = job.updated_at = utc_now();
    job.job_id = content_id(digest + "|" + job.created_at + "|" + std::to_string(++counter_) + "|" +
                            std::to_string(std::chrono::steady_clock::now().time_since_epoch().count()));
    persist(job);
    jobs_[job.job_id] = job;
    if (!idempotency_key.empty()) by_key_[idempotency_key] = job.job_id;
    queue_.push_back({job.job_id, std::move(work)});
    cv_.notify_one();
    return job;
  }

  Job get(const std::string& id) const {
    std::lock_guard lock(mu_);
    auto it = jobs_.find(id);
    if (!is_job_id(id) || it == jobs_.end()) throw Error(ErrorCode::not_found, "job '" + id + "'");
    return it->second;
  }

  std::vector<Job> list() const {
    std::lock_guard lock(mu_);
    std::vector<Job> out;
    for (const auto& [_, j] : jobs_) out.push_back(j);
    std::sort(out.begin(), out.end(), [](const Job& a, const Job& b) {
      return std::tie(a.created_at, a.job_id) < std::tie(b.created_at, b.job_id);
    });
    return out;
  }

  /// Blocks until the job is terminal or `timeout` passes.
  Job wait(const std::string& id, std::chrono::milliseconds timeout = std::chrono::minutes(5)) const {
    std::unique_lock lock(mu_);
    done_cv_.wait_for(lock, timeout, [&] {
      auto it = jobs_.find(id);
      return it == jobs_.end() || is_terminal(it->second.status);
    });
    auto it = jobs_.find(id);
    if (it == jobs_.end()) throw Error(ErrorCode::not_found, "job '" + id + "'");
    return it->second;
  }

 private:
  struct Pending {
    std::string id;
    Work work;
  };

  void persist(const Job& job) const {
    detail::write_text_atomic(dir_ / (job.job_id + ".json"), Json(job).dump(2) + "\n");
  }

  void recover() {
    for (const auto& e : std::filesystem::directory_iterator(dir_)) {
      const auto stem = e.path().stem().string();
      if (e.path().extension() != ".json" || !is_job_id(stem)) continue;
      Job job;
      try {
        job = Json::parse(detail::read_text(e.path())).get<Job>();
      } catch (const std::exception&) {
        continue;
      }
      if (!is_terminal(job.status)) {
        job.status = JobStatus::failed;
        job.error_detail = {{"error", "interrupted"}, {"message", "service stopped before the job finished"}};
        job.updated_at = utc_now();
        persist(job);
      }
      if (!job.idempotency_key.empty()) by_key_[job.idempotency_key] = job.job_id;
      jobs_[job.job_id] = std::move(job);
    }
  }

  /// Applies `change` unless the job is already terminal.
  void update(const std::string& id, const std::function<void(Job&)>& change) {
    std::lock_guard lock(mu_);
    auto& job = jobs_.at(id);
    if (is_terminal(job.status)) return;
    change(job);
    job.updated_at = utc_now();
    persist(job);
    if (is_terminal(job.status)) done_cv_.notify_all();
  }

  void run(std::stop_token st) {
    while (true) {
      Pending next;
      {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
        if (stopping_ || st.stop_requested()) return;
        next = std::move(queue_.front());
        queue_.pop_front();
      }
      update(next.id, [](Job& j) { j.status = JobStatus::running; });
      const ProgressFn progress = [&](double p) {
        update(next.id, [p](Job& j) { j.progress = std::clamp(std::max(j.progress, p), 0.0, 1.0); });
      };
      try {
        auto result = next.work(progress);
        update(next.id, [&](Job& j) {
          j.progress = 1.0;
          j.result_ref = std::move(result);
          j.status = JobStatus::done;
        });
      } catch (const Error& e) {
        update(next.id, [&](Job& j) {
          j.error_detail = {{"error", to_string(e.code())}, {"message", e.what()}, {"details", e.details()}};
          j.status = JobStatus::failed;
        });
      } catch (const std::exception& e) {
        update(next.id, [&](Job& j) {
          j.error_detail = {{"error", "internal"}, {"message", e.what()}};
          j.status = JobStatus::failed;
        });
      }
    }
  }

  std::filesystem::path dir_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  mutable std::condition_variable done_cv_;
  std::map<std::string, Job> jobs_;
  std::map<std::string, std::string> by_key_;
  std::deque<Pending> queue_;
  std::uint64_t counter_ = 0;
  bool stopping_ = false;
  std::vector<std::jthread> pool_;
};

}  // namespace catchrel
