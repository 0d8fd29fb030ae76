#pragma once

#include <string>

#include "catchrel/bali26.hpp"
#include "catchrel/hashing.hpp"
#include "catchrel/manifest.hpp"
#include "catchrel/prng.hpp"

namespace catchrel::testing {

inline MediaAsset make_asset(const std::string& name, double duration_s = 3600.0) {
  MediaAsset a;
  a.asset_id = content_id(name);
  a.source_name = name + ".mp4";
  a.container = Container::mp4;
  a.duration_s = duration_s;
  a.frame_rate = 30.0;
  a.width_px = 64;
  a.height_px = 48;
  a.language = "id";
  return a;
}

inline DatasetManifest with_categories(const std::vector<std::string>& slugs, const std::string& id = "ds") {
  std::vector<Category> cats;
  for (const auto& s : slugs) cats.push_back({s, s, ""});
  return register_categories(make_manifest(id), cats);
}

/// Appends `count` sharp, mutually distinct frames of `label` from `asset` at 0.5 s spacing.
inline void add_frames(DatasetManifest& m, const MediaAsset& asset, const std::string& label, std::size_t count,
                       double start_s = 0.0) {
  if (!m.find_asset(asset.asset_id)) m.assets.push_back(asset);
  SplitMix64 rng(SplitMix64::derive_seed(asset.asset_id, label, std::to_string(start_s)));
  for (std::size_t i = 0; i < count; ++i) {
    FrameRecord f;
    f.asset_id = asset.asset_id;
    f.label = label;
    f.timestamp_s = start_s + 0.5 * static_cast<double>(i);
    f.frame_id = content_id(asset.asset_id + "|" + label + "|" + std::to_string(f.timestamp_s));
    f.blur_score = 500.0;
    f.perceptual_hash = rng.next();
    m.frames.push_back(std::move(f));
  }
}

}  // namespace catchrel::testing
