#pragma once

// Shared data model. Every type here is a plain value; once a manifest
// version is committed it is never mutated in place.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "catchrel/error.hpp"

namespace catchrel {

using Json = nlohmann::json;

enum class Container { webm, mp4 };

NLOHMANN_JSON_SERIALIZE_ENUM(Container, {{Container::webm, "webm"}, {Container::mp4, "mp4"}})

struct MediaAsset {
  std::string asset_id;
  std::string source_name;
  Container container = Container::mp4;
  double duration_s = 0.0;
  double frame_rate = 0.0;
  int width_px = 0;
  int height_px = 0;
  std::string language;
  std::string site_note;  // free text, never coordinates

  bool operator==(const MediaAsset&) const = default;
};

struct Utterance {
  double start_s = 0.0;
  double end_s = 0.0;
  std::string text;
  double confidence = 0.0;

  bool operator==(const Utterance&) const = default;
};

enum class ChunkState { ok, failed };

NLOHMANN_JSON_SERIALIZE_ENUM(ChunkState, {{ChunkState::ok, "ok"}, {ChunkState::failed, "failed"}})

struct ChunkStatus {
  int index = 0;
  double start_s = 0.0;
  double end_s = 0.0;
  ChunkState status = ChunkState::ok;
  std::string detail;

  bool operator==(const ChunkStatus&) const = default;
};

struct Transcript {
  std::string asset_id;
  std::string provider_id;
  std::string language;
  std::vector<Utterance> utterances;  // sorted by start_s
  std::vector<ChunkStatus> chunks;

  bool operator==(const Transcript&) const = default;
};

enum class LabelSource { keyword, expert, whole_video };

NLOHMANN_JSON_SERIALIZE_ENUM(LabelSource, {{LabelSource::keyword, "keyword"},
                                           {LabelSource::expert, "expert"},
                                           {LabelSource::whole_video, "whole_video"}})

struct LabelSpan {
  std::string asset_id;
  std::string label;
  double start_s = 0.0;
  double end_s = 0.0;
  LabelSource source = LabelSource::expert;
  std::string note;

  bool operator==(const LabelSpan&) const = default;
};

enum class ExclusionReason { none, blur, duplicate, manual, balance };

NLOHMANN_JSON_SERIALIZE_ENUM(ExclusionReason, {{ExclusionReason::none, "none"},
                                               {ExclusionReason::blur, "blur"},
                                               {ExclusionReason::duplicate, "duplicate"},
                                               {ExclusionReason::manual, "manual"},
                                               {ExclusionReason::balance, "balance"}})

struct FrameRecord {
  std::string frame_id;
  std::string asset_id;
  double timestamp_s = 0.0;
  std::string label;
  double blur_score = 0.0;
  std::uint64_t perceptual_hash = 0;
  std::set<std::string> context_tags;
  bool excluded = false;
  ExclusionReason exclusion_reason = ExclusionReason::none;
  std::string note;

  bool operator==(const FrameRecord&) const = default;
};

struct Category {
  std::string slug;
  std::string display_name;
  std::string scientific_name;

  bool operator==(const Category&) const = default;
};

enum class SplitAssignment { train, eval, unassigned };

NLOHMANN_JSON_SERIALIZE_ENUM(SplitAssignment, {{SplitAssignment::train, "train"},
                                               {SplitAssignment::eval, "eval"},
                                               {SplitAssignment::unassigned, "unassigned"}})

struct Normalization {
  std::array<double, 3> mean{};
  std::array<double, 3> std{};

  bool operator==(const Normalization&) const = default;
};

/// What the last balance run did. Valid only while no frame or exclusion
/// change has happened after `ran_against_version`.
struct BalanceRecord {
  std::int64_t ran_against_version = 0;
  std::size_t min_count = 0;
  std::size_t max_count = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> deficient;

  bool operator==(const BalanceRecord&) const = default;
};

inline constexpr std::size_t kDefaultBalanceMin = 1200;
inline constexpr std::size_t kDefaultBalanceMax = 2500;

struct DatasetManifest {
  std::string dataset_id;
  std::int64_t version = 0;
  std::vector<Category> categories;
  std::vector<MediaAsset> assets;
  std::vector<FrameRecord> frames;
  std::size_t balance_min = kDefaultBalanceMin;
  std::size_t balance_max = kDefaultBalanceMax;
  std::optional<BalanceRecord> balance;
  std::int64_t frames_changed_version = 0;
  std::uint64_t split_seed = 0;
  std::optional<double> split_fraction;  // present iff a split is recorded
  std::map<std::string, SplitAssignment> split;
  std::optional<Normalization> normalization;
  std::string last_operation;

  bool operator==(const DatasetManifest&) const = default;

  bool has_category(std::string_view slug) const {
    for (const auto& c : categories) {
      if (c.slug == slug) return true;
    }
    return false;
  }

  const MediaAsset* find_asset(std::string_view id) const {
    for (const auto& a : assets) {
      if (a.asset_id == id) return &a;
    }
    return nullptr;
  }

  bool balance_valid() const {
    return balance.has_value() && frames_changed_version <= balance->ran_against_version;
  }

  bool split_recorded() const { return split_fraction.has_value(); }

  SplitAssignment assignment(const std::string& frame_id) const {
    auto it = split.find(frame_id);
    return it == split.end() ? SplitAssignment::unassigned : it->second;
  }
};

/// Starts a mutation: copies the manifest and bumps its version.
inline DatasetManifest next_version(const DatasetManifest& m, std::string operation) {
  DatasetManifest out = m;
  out.version = m.version + 1;
  out.last_operation = std::move(operation);
  return out;
}

/// Records that the frame set or an exclusion flag changed in `m` (which must
/// already carry its new version). Dependent split/normalization are dropped.
inline void mark_frames_changed(DatasetManifest& m) {
  m.frames_changed_version = m.version;
  m.split.clear();
  m.split_fraction.reset();
  m.normalization.reset();
}

inline std::string hash_to_hex(std::uint64_t h) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = kHex[h & 0xf];
    h >>= 4;
  }
  return out;
}

inline std::uint64_t hash_from_hex(const std::string& s) {
  if (s.size() != 16) throw Error(ErrorCode::parse_error, "perceptual_hash must be 16 hex chars");
  std::uint64_t v = 0;
  for (char c : s) {
    v <<= 4;
    if (c >= '0' && c <= '9') v |= static_cast<std::uint64_t>(c - '0');
    else if (c >= 'a' && c <= 'f') v |= static_cast<std::uint64_t>(c - 'a' + 10);
    else throw Error(ErrorCode::parse_error, "perceptual_hash must be lowercase hex");
  }
  return v;
}

// JSON mapping. Keys are emitted through nlohmann's ordered std::map, so the
// serialized form is stable.

inline void to_json(Json& j, const MediaAsset& a) {
  j = Json{{"asset_id", a.asset_id},     {"source_name", a.source_name},
           {"container", a.container},   {"duration_s", a.duration_s},
           {"frame_rate", a.frame_rate}, {"width_px", a.width_px},
           {"height_px", a.height_px},   {"language", a.language},
           {"site_note", a.site_note}};
}
inline void from_json(const Json& j, MediaAsset& a) {
  j.at("asset_id").get_to(a.asset_id);
  a.source_name = j.value("source_name", "");
  const auto container = j.at("container").get<std::string>();
  if (container != "webm" && container != "mp4") {
    throw Error(ErrorCode::unsupported_container, "container '" + container + "'");
  }
  a.container = container == "webm" ? Container::webm : Container::mp4;
  j.at("duration_s").get_to(a.duration_s);
  j.at("frame_rate").get_to(a.frame_rate);
  j.at("width_px").get_to(a.width_px);
  j.at("height_px").get_to(a.height_px);
  a.language = j.value("language", "");
  a.site_note = j.value("site_note", "");
}

inline void to_json(Json& j, const Utterance& u) {
  j = Json{{"start_s", u.start_s}, {"end_s", u.end_s}, {"text", u.text}, {"confidence", u.confidence}};
}
inline void from_json(const Json& j, Utterance& u) {
  j.at("start_s").get_to(u.start_s);
  j.at("end_s").get_to(u.end_s);
  j.at("text").get_to(u.text);
  j.at("confidence").get_to(u.confidence);
}

inline void to_json(Json& j, const ChunkStatus& c) {
  j = Json{{"index", c.index}, {"start_s", c.start_s}, {"end_s", c.end_s}, {"status", c.status}};
  if (!c.detail.empty()) j["detail"] = c.detail;
}
inline void from_json(const Json& j, ChunkStatus& c) {
  j.at("index").get_to(c.index);
  j.at("start_s").get_to(c.start_s);
  j.at("end_s").get_to(c.end_s);
  j.at("status").get_to(c.status);
  c.detail = j.value("detail", "");
}

inline void to_json(Json& j, const Transcript& t) {
  j = Json{{"asset_id", t.asset_id},     {"provider_id", t.provider_id}, {"language", t.language},
           {"utterances", t.utterances}, {"chunks", t.chunks}};
}
inline void from_json(const Json& j, Transcript& t) {
  j.at("asset_id").get_to(t.asset_id);
  j.at("provider_id").get_to(t.provider_id);
  t.language = j.value("language", "");
  j.at("utterances").get_to(t.utterances);
  if (j.contains("chunks")) j.at("chunks").get_to(t.chunks);
}

inline void to_json(Json& j, const LabelSpan& s) {
  j = Json{{"asset_id", s.asset_id}, {"label", s.label},   {"start_s", s.start_s},
           {"end_s", s.end_s},       {"source", s.source}, {"note", s.note}};
}
inline void from_json(const Json& j, LabelSpan& s) {
  j.at("asset_id").get_to(s.asset_id);
  j.at("label").get_to(s.label);
  j.at("start_s").get_to(s.start_s);
  j.at("end_s").get_to(s.end_s);
  s.source = j.value("source", LabelSource::expert);
  s.note = j.value("note", "");
}

inline void to_json(Json& j, const FrameRecord& f) {
  j = Json{{"frame_id", f.frame_id},
           {"asset_id", f.asset_id},
           {"timestamp_s", f.timestamp_s},
           {"label", f.label},
           {"blur_score", f.blur_score},
           {"perceptual_hash", hash_to_hex(f.perceptual_hash)},
           {"context_tags", f.context_tags},
           {"excluded", f.excluded},
           {"exclusion_reason", f.exclusion_reason},
           {"note", f.note}};
}
inline void from_json(const Json& j, FrameRecord& f) {
  j.at("frame_id").get_to(f.frame_id);
  j.at("asset_id").get_to(f.asset_id);
  j.at("timestamp_s").get_to(f.timestamp_s);
  j.at("label").get_to(f.label);
  j.at("blur_score").get_to(f.blur_score);
  f.perceptual_hash = hash_from_hex(j.at("perceptual_hash").get<std::string>());
  f.context_tags = j.value("context_tags", std::set<std::string>{});
  j.at("excluded").get_to(f.excluded);
  j.at("exclusion_reason").get_to(f.exclusion_reason);
  f.note = j.value("note", "");
}

inline void to_json(Json& j, const Category& c) {
  j = Json{{"slug", c.slug}, {"display_name", c.display_name}, {"scientific_name", c.scientific_name}};
}
inline void from_json(const Json& j, Category& c) {
  j.at("slug").get_to(c.slug);
  c.display_name = j.value("display_name", "");
  c.scientific_name = j.value("scientific_name", "");
}

inline void to_json(Json& j, const Normalization& n) {
  j = Json{{"mean", n.mean}, {"std", n.std}};
}
inline void from_json(const Json& j, Normalization& n) {
  j.at("mean").get_to(n.mean);
  j.at("std").get_to(n.std);
}

inline void to_json(Json& j, const BalanceRecord& b) {
  j = Json{{"ran_against_version", b.ran_against_version},
           {"min_count", b.min_count},
           {"max_count", b.max_count},
           {"seed", b.seed},
           {"deficient", b.deficient}};
}
inline void from_json(const Json& j, BalanceRecord& b) {
  j.at("ran_against_version").get_to(b.ran_against_version);
  j.at("min_count").get_to(b.min_count);
  j.at("max_count").get_to(b.max_count);
  j.at("seed").get_to(b.seed);
  j.at("deficient").get_to(b.deficient);
}

inline constexpr const char* kManifestSchema = "catchrel.manifest/1";

inline void to_json(Json& j, const DatasetManifest& m) {
  j = Json{{"schema", kManifestSchema},
           {"dataset_id", m.dataset_id},
           {"version", m.version},
           {"categories", m.categories},
           {"assets", m.assets},
           {"frames", m.frames},
           {"balance_min", m.balance_min},
           {"balance_max", m.balance_max},
           {"balance", m.balance ? Json(*m.balance) : Json(nullptr)},
           {"frames_changed_version", m.frames_changed_version},
           {"split_seed", m.split_seed},
           {"split_fraction", m.split_fraction ? Json(*m.split_fraction) : Json(nullptr)},
           {"split", m.split},
           {"normalization", m.normalization ? Json(*m.normalization) : Json(nullptr)},
           {"last_operation", m.last_operation}};
}
inline void from_json(const Json& j, DatasetManifest& m) {
  if (j.value("schema", "") != kManifestSchema) {
    throw Error(ErrorCode::parse_error, "not a catchrel manifest (schema tag mismatch)");
  }
  j.at("dataset_id").get_to(m.dataset_id);
  j.at("version").get_to(m.version);
  j.at("categories").get_to(m.categories);
  j.at("assets").get_to(m.assets);
  j.at("frames").get_to(m.frames);
  j.at("balance_min").get_to(m.balance_min);
  j.at("balance_max").get_to(m.balance_max);
  m.balance.reset();
  if (!j.at("balance").is_null()) m.balance = j.at("balance").get<BalanceRecord>();
  j.at("frames_changed_version").get_to(m.frames_changed_version);
  j.at("split_seed").get_to(m.split_seed);
  m.split_fraction.reset();
  if (!j.at("split_fraction").is_null()) m.split_fraction = j.at("split_fraction").get<double>();
  j.at("split").get_to(m.split);
  m.normalization.reset();
  if (!j.at("normalization").is_null()) m.normalization = j.at("normalization").get<Normalization>();
  m.last_operation = j.value("last_operation", "");
}

}  // namespace catchrel
