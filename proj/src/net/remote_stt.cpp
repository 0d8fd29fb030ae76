#include "catchrel/remote_stt.hpp"

#include <openssl/evp.h>

#include <fstream>
#include <regex>
#include <sstream>

#include <httplib.h>

namespace catchrel {

std::string base64_encode(std::string_view bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(bytes.data()), static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

RemoteProvider::RemoteProvider(std::string provider_id, std::string endpoint_url,
                               const std::filesystem::path& credential_path, std::chrono::seconds timeout)
    : provider_id_(std::move(provider_id)), timeout_(timeout) {
  static const std::regex kUrl(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(endpoint_url, m, kUrl)) {
    throw Error(ErrorCode::invalid_argument, "endpoint must be an http(s) URL: " + endpoint_url);
  }
  base_url_ = m[1].str();
  path_ = m[2].matched ? m[2].str() : "/";

  std::ifstream in(credential_path);
  if (!in) throw Error(ErrorCode::credential_invalid, "key file not readable: " + credential_path.string());
  try {
    credential_ = Json::parse(in);
  } catch (const Json::exception&) {
    throw Error(ErrorCode::credential_invalid, "key file is not JSON: " + credential_path.string());
  }
  if (!credential_.is_object() || credential_.empty()) {
    throw Error(ErrorCode::credential_invalid, "key file must hold a non-empty JSON object");
  }
}

std::vector<RecognizedSegment> RemoteProvider::parse_response(const std::string& body) {
  Json j;
  try {
    j = Json::parse(body);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::provider_error, std::string("response is not JSON: ") + e.what());
  }
  if (!j.contains("results") || !j["results"].is_array()) {
    throw Error(ErrorCode::provider_error, "response lacks a results array");
  }
  std::vector<RecognizedSegment> out;
  for (const auto& r : j["results"]) {
    RecognizedSegment s;
    try {
      s.text = r.at("text").get<std::string>();
      s.confidence = r.at("confidence").get<double>();
      const auto words = r.value("words", Json::array());
      if (!words.empty()) {
        s.start_s = words.front().at("start_s").get<double>();
        s.end_s = words.back().at("end_s").get<double>();
      } else if (r.contains("start_s") && r.contains("end_s")) {
        s.start_s = r["start_s"].get<double>();
        s.end_s = r["end_s"].get<double>();
      }
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::provider_error, std::string("malformed result: ") + e.what());
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<RecognizedSegment> RemoteProvider::recognize(const MediaAsset& asset, const AudioChunk& chunk,
                                                         const std::string& language) {
  std::ifstream in(chunk.payload_path, std::ios::binary);
  if (!in) throw Error(ErrorCode::provider_error, "chunk payload missing: " + chunk.payload_path.string());
  std::ostringstream raw;
  raw << in.rdbuf();

  const Json request{{"asset_id", asset.asset_id},
                     {"chunk_index", chunk.index},
                     {"language", language},
                     {"encoding", "LINEAR16"},
                     {"sample_rate_hz", kAudioSampleRate},
                     {"audio_wav_base64", base64_encode(raw.str())},
                     {"credential", credential_}};

  httplib::Client client(base_url_);
  client.set_connection_timeout(timeout_);
  client.set_read_timeout(timeout_);
  client.set_write_timeout(timeout_);
  auto res = client.Post(path_, request.dump(), "application/json");
  if (!res) {
    throw Error(ErrorCode::provider_unreachable, base_url_ + ": " + httplib::to_string(res.error()));
  }
  if (res->status == 401 || res->status == 403) {
    throw Error(ErrorCode::credential_invalid, "provider rejected credentials (HTTP " + std::to_string(res->status) + ")");
  }
  if (res->status < 200 || res->status >= 300) {
    throw Error(ErrorCode::provider_error, "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
  }
  return parse_response(res->body);
}

}  // namespace catchrel
