#pragma once

// HTTP speech-to-text client (link target `catchrel::net`). Wire contract in
// docs/stt-wire.md.

#include <chrono>
#include <filesystem>
#include <string>

#include "catchrel/stt.hpp"

namespace catchrel {

class RemoteProvider final : public SttProvider {
 public:
  /// Reads the key file eagerly; a missing or non-JSON-object key file is
  /// `credential_invalid`.
  RemoteProvider(std::string provider_id, std::string endpoint_url, const std::filesystem::path& credential_path,
                 std::chrono::seconds timeout = std::chrono::seconds(120));

  std::string provider_id() const override { return provider_id_; }
  std::vector<RecognizedSegment> recognize(const MediaAsset& asset, const AudioChunk& chunk,
                                           const std::string& language) override;

  /// Parses a recognizer response body into segments.
  static std::vector<RecognizedSegment> parse_response(const std::string& body);

 private:
  std::string provider_id_;
  std::string base_url_;
  std::string path_;
  Json credential_;
  std::chrono::seconds timeout_;
};

std::string base64_encode(std::string_view bytes);

}  // namespace catchrel
