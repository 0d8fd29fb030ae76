#pragma once

#include <cmath>
#include <map>
#include <regex>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "catchrel/hashing.hpp"
#include "catchrel/model.hpp"

namespace catchrel {

struct Violation {
  std::string field;
  std::string rule;
  std::string message;

  bool operator==(const Violation&) const = default;
};

inline void to_json(Json& j, const Violation& v) {
  j = Json{{"field", v.field}, {"rule", v.rule}, {"message", v.message}};
}

inline bool is_valid_slug(std::string_view slug) {
  if (slug.empty() || slug.front() == '-') return false;
  for (char c : slug) {
    if (!((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '-')) return false;
  }
  return true;
}

inline DatasetManifest make_manifest(std::string dataset_id) {
  DatasetManifest m;
  m.dataset_id = std::move(dataset_id);
  return m;
}

/// Adds categories. Slugs are fixed once registered; only names may change later.
inline DatasetManifest register_categories(const DatasetManifest& m,
                                           const std::vector<Category>& categories) {
  if (categories.empty()) throw Error(ErrorCode::empty_list, "no categories given");
  std::set<std::string> seen;
  for (const auto& c : m.categories) seen.insert(c.slug);
  for (const auto& c : categories) {
    if (!is_valid_slug(c.slug)) {
      throw Error(ErrorCode::invalid_argument,
                  "slug '" + c.slug + "' must be lowercase alphanumeric plus hyphen");
    }
    if (!seen.insert(c.slug).second) throw Error(ErrorCode::duplicate, "slug '" + c.slug + "'");
  }
  auto out = next_version(m, "register_categories");
  out.categories.insert(out.categories.end(), categories.begin(), categories.end());
  return out;
}

inline DatasetManifest rename_category(const DatasetManifest& m, const std::string& slug,
                                       std::string display_name, std::string scientific_name) {
  if (!m.has_category(slug)) throw Error(ErrorCode::unregistered_label, slug);
  auto out = next_version(m, "rename_category");
  for (auto& c : out.categories) {
    if (c.slug == slug) {
      c.display_name = std::move(display_name);
      c.scientific_name = std::move(scientific_name);
    }
  }
  return out;
}

namespace detail {

inline bool key_looks_like_location(std::string key) {
  for (auto& c : key) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  static const std::regex kPattern(
      "^(lat|lon|lng|long|latitude|longitude|alt|altitude|location|position|coords?|"
      "coordinates?|gps.*|geo.*|.*_(lat|lon|lng)|exif.*)$");
  return std::regex_match(key, kPattern);
}

inline void scan_location_keys(const Json& j, const std::string& path,
                               std::vector<std::string>& out) {
  if (j.is_object()) {
    for (const auto& [key, value] : j.items()) {
      const auto child = path.empty() ? key : path + "." + key;
      if (key_looks_like_location(key)) out.push_back(child);
      scan_location_keys(value, child, out);
    }
  } else if (j.is_array()) {
    for (std::size_t i = 0; i < j.size(); ++i) {
      scan_location_keys(j[i], path + "[" + std::to_string(i) + "]", out);
    }
  }
}

}  // namespace detail

/// Paths of JSON keys named or shaped like geographic coordinates.
inline std::vector<std::string> find_location_keys(const Json& j) {
  std::vector<std::string> out;
  detail::scan_location_keys(j, "", out);
  return out;
}

/// True if free text carries a decimal-degree pair or a degree/minute notation.
inline bool text_contains_coordinates(std::string_view text) {
  static const std::regex kDecimalPair(
      R"([-+]?\d{1,3}\.\d{3,}\s*[,; ]\s*[-+]?\d{1,3}\.\d{3,})");
  static const std::regex kDegrees("\\d{1,3}\\s*\xC2\xB0");  // U+00B0 degree sign
  const std::string s(text);
  return std::regex_search(s, kDecimalPair) || std::regex_search(s, kDegrees);
}

inline std::size_t kept_count(const DatasetManifest& m, std::string_view label) {
  std::size_t n = 0;
  for (const auto& f : m.frames) {
    if (f.label == label && !f.excluded) ++n;
  }
  return n;
}

/// Checks every model invariant. An empty result means the manifest is valid.
inline std::vector<Violation> validate_manifest(const DatasetManifest& m) {
  std::vector<Violation> v;
  auto add = [&v](std::string field, std::string rule, std::string msg) {
    v.push_back({std::move(field), std::move(rule), std::move(msg)});
  };

  if (m.version < 0) add("version", "non-negative", "version is negative");
  if (m.balance_min > m.balance_max) {
    add("balance_min", "min<=max", "balance_min exceeds balance_max");
  }

  std::set<std::string> slugs;
  for (const auto& c : m.categories) {
    if (!is_valid_slug(c.slug)) add("categories.slug", "slug-format", c.slug);
    if (!slugs.insert(c.slug).second) add("categories.slug", "unique", c.slug);
    if (text_contains_coordinates(c.display_name) || text_contains_coordinates(c.scientific_name)) {
      add("categories", "no-coordinates", c.slug);
    }
  }

  std::map<std::string, const MediaAsset*> assets;
  for (const auto& a : m.assets) {
    if (!is_content_id(a.asset_id)) add("assets.asset_id", "content-hash", a.asset_id);
    if (!assets.emplace(a.asset_id, &a).second) add("assets.asset_id", "unique", a.asset_id);
    if (!(a.duration_s >= 0.0) || !std::isfinite(a.duration_s)) {
      add("assets.duration_s", ">=0", a.asset_id);
    }
    if (!(a.frame_rate > 0.0)) add("assets.frame_rate", ">0", a.asset_id);
    if (a.width_px <= 0 || a.height_px <= 0) add("assets.dimensions", ">0", a.asset_id);
    if (text_contains_coordinates(a.site_note)) add("assets.site_note", "no-coordinates", a.asset_id);
  }

  std::set<std::string> frame_ids;
  std::set<std::string> kept_ids;
  for (const auto& f : m.frames) {
    if (!is_content_id(f.frame_id)) add("frames.frame_id", "content-hash", f.frame_id);
    if (!frame_ids.insert(f.frame_id).second) add("frames.frame_id", "unique", f.frame_id);
    if (!slugs.contains(f.label)) add("frames.label", "registered", f.frame_id + " -> " + f.label);
    if (f.excluded != (f.exclusion_reason != ExclusionReason::none)) {
      add("frames.excluded", "excluded iff reason != none", f.frame_id);
    }
    if (!(f.blur_score >= 0.0) || !std::isfinite(f.blur_score)) {
      add("frames.blur_score", ">=0", f.frame_id);
    }
    auto a = assets.find(f.asset_id);
    if (a == assets.end()) {
      add("frames.asset_id", "known-asset", f.frame_id);
    } else if (f.timestamp_s < 0.0 || f.timestamp_s > a->second->duration_s) {
      add("frames.timestamp_s", "within-asset-duration", f.frame_id);
    }
    if (text_contains_coordinates(f.note)) add("frames.note", "no-coordinates", f.frame_id);
    for (const auto& tag : f.context_tags) {
      if (text_contains_coordinates(tag)) add("frames.context_tags", "no-coordinates", f.frame_id);
    }
    if (!f.excluded) kept_ids.insert(f.frame_id);
  }

  if (m.balance_valid()) {
    const auto& b = *m.balance;
    const std::set<std::string> deficient(b.deficient.begin(), b.deficient.end());
    for (const auto& c : m.categories) {
      const auto n = kept_count(m, c.slug);
      if (deficient.contains(c.slug)) {
        if (n >= b.min_count) {
          add("balance.deficient", "deficient => below balance_min",
              c.slug + " flagged deficient with " + std::to_string(n));
        }
      } else if (n < b.min_count) {
        add("balance.min_count", "kept >= balance_min", c.slug + " has " + std::to_string(n));
      } else if (n > b.max_count) {
        add("balance.max_count", "kept <= balance_max", c.slug + " has " + std::to_string(n));
      }
    }
  }

  if (m.split_recorded()) {
    if (!(*m.split_fraction > 0.0 && *m.split_fraction < 1.0)) {
      add("split_fraction", "0<fraction<1", std::to_string(*m.split_fraction));
    }
    std::set<std::string> keys;
    for (const auto& [id, which] : m.split) {
      keys.insert(id);
      if (which == SplitAssignment::unassigned) add("split", "train-or-eval", id);
    }
    if (keys != kept_ids) add("split", "covers exactly non-excluded frames", "split key set mismatch");
  } else if (!m.split.empty()) {
    add("split", "empty unless recorded", "split entries without split_fraction");
  }

  if (m.normalization) {
    for (int c = 0; c < 3; ++c) {
      const double mu = m.normalization->mean[static_cast<std::size_t>(c)];
      const double sd = m.normalization->std[static_cast<std::size_t>(c)];
      if (!(mu >= 0.0 && mu <= 1.0) || !(sd >= 0.0 && sd <= 1.0)) {
        add("normalization", "values in [0,1]", "channel " + std::to_string(c));
      }
    }
  }

  for (const auto& key : find_location_keys(Json(m))) add(key, "no-location-keys", key);
  return v;
}

/// Canonical on-disk form: two-space indented JSON, keys sorted, trailing newline.
inline std::string serialize_manifest(const DatasetManifest& m) {
  return Json(m).dump(2) + "\n";
}

inline DatasetManifest parse_manifest(std::string_view text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::parse_error, e.what());
  }
  try {
    return j.get<DatasetManifest>();
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::parse_error, e.what());
  }
}

}  // namespace catchrel
