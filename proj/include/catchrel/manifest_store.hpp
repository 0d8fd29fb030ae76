#pragma once

// Versioned, append-only manifest store.
//
// Layout:  <dataset>/manifest/v<N>.json   one immutable document per version
//          <dataset>/HEAD                 decimal number of the newest version
//          <dataset>/frames/<label>/<frame_id>.png
//
// Writers are serialized per dataset directory: an in-process mutex keyed by
// the canonical path plus an flock() on <dataset>/.writer.lock for other
// processes. Readers never lock; version files appear via atomic rename.

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <vector>

#include "catchrel/manifest.hpp"

namespace catchrel {

namespace detail {

inline std::mutex& writer_mutex_for(const std::filesystem::path& dir) {
  static std::mutex registry_guard;
  static std::map<std::string, std::unique_ptr<std::mutex>> registry;
  std::lock_guard lock(registry_guard);
  auto& slot = registry[std::filesystem::weakly_canonical(dir).string()];
  if (!slot) slot = std::make_unique<std::mutex>();
  return *slot;
}

class FileLock {
 public:
  explicit FileLock(const std::filesystem::path& path)
      : fd_(::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644)) {
    if (fd_ < 0) throw Error(ErrorCode::unwritable_directory, "cannot open lock " + path.string());
    if (::flock(fd_, LOCK_EX) != 0) {
      ::close(fd_);
      throw Error(ErrorCode::io_error, "flock failed on " + path.string());
    }
  }
  ~FileLock() {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
  FileLock(const FileLock&) = delete;
  FileLock& operator=(const FileLock&) = delete;

 private:
  int fd_;
};

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::not_found, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Writes via a temporary sibling and rename(2).
inline void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::unwritable_directory, "cannot write " + tmp.string());
    out << text;
    out.flush();
    if (!out) throw Error(ErrorCode::io_error, "short write " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::io_error, "rename to " + path.string() + ": " + ec.message());
}

}  // namespace detail

class ManifestStore {
 public:
  /// Creates a dataset directory holding an empty v0 manifest.
  static ManifestStore create(const std::filesystem::path& dir, const std::string& dataset_id) {
    namespace fs = std::filesystem;
    if (fs::exists(dir / "HEAD")) throw Error(ErrorCode::duplicate, "dataset exists at " + dir.string());
    std::error_code ec;
    fs::create_directories(dir / "manifest", ec);
    fs::create_directories(dir / "frames", ec);
    if (ec) throw Error(ErrorCode::unwritable_directory, dir.string() + ": " + ec.message());
    ManifestStore store(dir);
    auto m = make_manifest(dataset_id);
    detail::write_text_atomic(store.version_path(0), serialize_manifest(m));
    detail::write_text_atomic(dir / "HEAD", "0\n");
    return store;
  }

  static ManifestStore open(const std::filesystem::path& dir) {
    if (!std::filesystem::exists(dir / "HEAD")) {
      throw Error(ErrorCode::not_found, "no dataset at " + dir.string());
    }
    return ManifestStore(dir);
  }

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path frames_dir() const { return root_ / "frames"; }
  std::filesystem::path version_path(std::int64_t v) const {
    return root_ / "manifest" / ("v" + std::to_string(v) + ".json");
  }

  std::int64_t head_version() const {
    const auto text = detail::read_text(root_ / "HEAD");
    std::int64_t v = -1;
    const auto* begin = text.data();
    auto [ptr, ec] = std::from_chars(begin, begin + text.size(), v);
    if (ec != std::errc{} || v < 0) throw Error(ErrorCode::parse_error, "corrupt HEAD in " + root_.string());
    return v;
  }

  DatasetManifest load(std::int64_t version) const {
    const auto path = version_path(version);
    if (!std::filesystem::exists(path)) {
      throw Error(ErrorCode::not_found, "manifest version " + std::to_string(version));
    }
    return parse_manifest(detail::read_text(path));
  }

  DatasetManifest head() const { return load(head_version()); }

  std::vector<std::int64_t> versions() const {
    std::vector<std::int64_t> out;
    for (const auto& entry : std::filesystem::directory_iterator(root_ / "manifest")) {
      const auto name = entry.path().filename().string();
      if (name.size() < 7 || name.front() != 'v' || !name.ends_with(".json")) continue;
      std::int64_t v = 0;
      auto [ptr, ec] = std::from_chars(name.data() + 1, name.data() + name.size() - 5, v);
      if (ec == std::errc{} && ptr == name.data() + name.size() - 5) out.push_back(v);
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  using Mutation = std::function<DatasetManifest(const DatasetManifest&)>;

  /// Applies `mutation` to the head under the dataset's writer lock. The result
  /// must be head.version + 1 and valid; an unchanged manifest is a no-op.
  DatasetManifest commit(const Mutation& mutation) {
    std::lock_guard lock(detail::writer_mutex_for(root_));
    detail::FileLock file_lock(root_ / ".writer.lock");
    const auto current = head();
    auto next = mutation(current);
    if (next == current) return current;
    if (next.version != current.version + 1) {
      throw Error(ErrorCode::invalid_manifest,
                  "mutation produced version " + std::to_string(next.version) + " on head " +
                      std::to_string(current.version));
    }
    if (next.dataset_id != current.dataset_id) {
      throw Error(ErrorCode::invalid_manifest, "dataset_id is immutable");
    }
    if (auto violations = validate_manifest(next); !violations.empty()) {
      std::vector<std::string> details;
      for (const auto& v : violations) details.push_back(v.field + ": " + v.rule + " (" + v.message + ")");
      throw Error(ErrorCode::invalid_manifest, "mutation violates manifest invariants", details);
    }
    detail::write_text_atomic(version_path(next.version), serialize_manifest(next));
    detail::write_text_atomic(root_ / "HEAD", std::to_string(next.version) + "\n");
    return next;
  }

 private:
  explicit ManifestStore(std::filesystem::path dir) : root_(std::move(dir)) {}
  std::filesystem::path root_;
};

}  // namespace catchrel
