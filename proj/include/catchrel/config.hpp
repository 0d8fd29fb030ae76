#pragma once

// Workspace configuration: one JSON file (`catchrel.json` in the workspace
// root) plus CATCHREL_* environment overrides. Unknown keys are rejected so
// typos do not silently fall back to defaults.

#include <cstdlib>
#include <filesystem>
#include <optional>
#include <string>

#include "catchrel/curator.hpp"
#include "catchrel/manifest_store.hpp"
#include "catchrel/media.hpp"
#include "catchrel/transcript.hpp"

namespace catchrel {

struct Config {
  std::string provider = "offline";  // offline | remote
  std::string provider_id = "offline-script";
  std::string provider_endpoint;     // remote only
  std::string credential_path;       // remote only: JSON key file
  std::string offline_script;        // offline only: JSON script
  std::string language = "id";
  double chunk_len_s = kDefaultChunkSeconds;
  double confidence_threshold = kDefaultConfidenceThreshold;
  double fps_cap = kDefaultFpsCap;
  double blur_threshold = kDefaultBlurThreshold;
  int hamming_max = kDefaultHammingMax;
  std::size_t balance_min = kDefaultBalanceMin;
  std::size_t balance_max = kDefaultBalanceMax;
  int parallelism = 2;
  std::string api_token;  // empty => no bearer check

  bool operator==(const Config&) const = default;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(Config, provider, provider_id, provider_endpoint, credential_path,
                                                offline_script, language, chunk_len_s, confidence_threshold, fps_cap,
                                                blur_threshold, hamming_max, balance_min, balance_max, parallelism,
                                                api_token)

inline void validate_config(const Config& c) {
  std::vector<std::string> bad;
  if (c.provider != "offline" && c.provider != "remote") bad.push_back("provider must be offline or remote");
  if (c.chunk_len_s < kMinChunkSeconds || c.chunk_len_s > kMaxChunkSeconds) bad.push_back("chunk_len_s in [5,59]");
  if (!(c.confidence_threshold >= 0.0 && c.confidence_threshold <= 1.0)) bad.push_back("confidence_threshold in [0,1]");
  if (!(c.fps_cap > 0.0)) bad.push_back("fps_cap > 0");
  if (!(c.blur_threshold >= 0.0)) bad.push_back("blur_threshold >= 0");
  if (c.hamming_max < 0 || c.hamming_max > 64) bad.push_back("hamming_max in [0,64]");
  if (c.balance_min > c.balance_max) bad.push_back("balance_min <= balance_max");
  if (c.parallelism < 1) bad.push_back("parallelism >= 1");
  if (!bad.empty()) throw Error(ErrorCode::invalid_argument, "invalid configuration", bad);
}

namespace detail {

template <typename T>
void env_override(const char* name, T& field) {
  const char* v = std::getenv(name);
  if (v == nullptr || *v == '\0') return;
  try {
    if constexpr (std::is_same_v<T, std::string>) {
      field = v;
    } else if constexpr (std::is_floating_point_v<T>) {
      field = std::stod(v);
    } else {
      field = static_cast<T>(std::stoll(v));
    }
  } catch (const std::exception&) {
    throw Error(ErrorCode::invalid_argument, std::string("cannot parse environment variable ") + name);
  }
}

}  // namespace detail

/// Reads `<root>/catchrel.json` if present, then applies environment overrides.
inline Config load_config(const std::filesystem::path& root) {
  Config c;
  const auto path = root / "catchrel.json";
  if (std::filesystem::exists(path)) {
    Json j;
    try {
      j = Json::parse(detail::read_text(path));
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::parse_error, path.string() + ": " + e.what());
    }
    const auto known = Json(Config{});
    std::vector<std::string> unknown;
    for (const auto& [k, v] : j.items()) {
      if (!known.contains(k)) unknown.push_back(k);
    }
    if (!unknown.empty()) throw Error(ErrorCode::invalid_argument, "unknown configuration keys", unknown);
    try {
      c = j.get<Config>();
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::parse_error, path.string() + ": " + e.what());
    }
  }
  detail::env_override("CATCHREL_PROVIDER", c.provider);
  detail::env_override("CATCHREL_PROVIDER_ID", c.provider_id);
  detail::env_override("CATCHREL_PROVIDER_ENDPOINT", c.provider_endpoint);
  detail::env_override("CATCHREL_CREDENTIAL_PATH", c.credential_path);
  detail::env_override("CATCHREL_OFFLINE_SCRIPT", c.offline_script);
  detail::env_override("CATCHREL_LANGUAGE", c.language);
  detail::env_override("CATCHREL_CHUNK_LEN_S", c.chunk_len_s);
  detail::env_override("CATCHREL_CONFIDENCE_THRESHOLD", c.confidence_threshold);
  detail::env_override("CATCHREL_FPS_CAP", c.fps_cap);
  detail::env_override("CATCHREL_BLUR_THRESHOLD", c.blur_threshold);
  detail::env_override("CATCHREL_HAMMING_MAX", c.hamming_max);
  detail::env_override("CATCHREL_BALANCE_MIN", c.balance_min);
  detail::env_override("CATCHREL_BALANCE_MAX", c.balance_max);
  detail::env_override("CATCHREL_PARALLELISM", c.parallelism);
  detail::env_override("CATCHREL_API_TOKEN", c.api_token);
  validate_config(c);
  return c;
}

}  // namespace catchrel
