#pragma once

#include <filesystem>
#include <string>

#include "catchrel/png.hpp"

namespace catchrel {

/// Where extracted frame pixels live. Curation and release read through this.
class FrameStore {
 public:
  virtual ~FrameStore() = default;
  virtual void write(const std::string& label, const std::string& frame_id, const Image& img) = 0;
  virtual Image read(const std::string& label, const std::string& frame_id) const = 0;
};

/// `<root>/<label>/<frame_id>.png`
class DirectoryFrameStore : public FrameStore {
 public:
  explicit DirectoryFrameStore(std::filesystem::path root) : root_(std::move(root)) {}

  std::filesystem::path path_for(const std::string& label, const std::string& frame_id) const {
    return root_ / label / (frame_id + ".png");
  }

  void write(const std::string& label, const std::string& frame_id, const Image& img) override {
    std::error_code ec;
    std::filesystem::create_directories(root_ / label, ec);
    if (ec) throw Error(ErrorCode::unwritable_directory, (root_ / label).string());
    write_png(path_for(label, frame_id), img);
  }

  Image read(const std::string& label, const std::string& frame_id) const override {
    return read_png(path_for(label, frame_id));
  }

 private:
  std::filesystem::path root_;
};

}  // namespace catchrel
