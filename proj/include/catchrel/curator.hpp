#pragma once

// Curation: blur filter, near-duplicate removal, balancing, train/eval split,
// normalization statistics and manual exclusion. Nothing is ever deleted;
// every step only flips exclusion flags or records derived data.

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "catchrel/frame_store.hpp"
#include "catchrel/image_metrics.hpp"
#include "catchrel/manifest.hpp"
#include "catchrel/prng.hpp"

namespace catchrel {

inline constexpr int kDefaultHammingMax = 4;
inline constexpr double kDefaultTrainFraction = 0.5;

namespace detail {

inline void exclude(FrameRecord& f, ExclusionReason why) {
  f.excluded = true;
  f.exclusion_reason = why;
}

inline bool in_scope(const FrameRecord& f, const std::set<std::string>* only) {
  return only == nullptr || only->contains(f.frame_id);
}

// Frame indices grouped by `key`, each group ordered by (timestamp, frame_id).
template <typename Key>
std::map<Key, std::vector<std::size_t>> group_by_time(const std::vector<FrameRecord>& frames, Key (*key)(const FrameRecord&)) {
  std::map<Key, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < frames.size(); ++i) groups[key(frames[i])].push_back(i);
  for (auto& [k, idx] : groups) {
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return std::tie(frames[a].timestamp_s, frames[a].frame_id) < std::tie(frames[b].timestamp_s, frames[b].frame_id);
    });
  }
  return groups;
}

}  // namespace detail

/// Excludes kept frames scoring below `threshold`. `only` restricts the scope
/// (used when merging new material into a curated dataset).
inline DatasetManifest filter_blurry(const DatasetManifest& m, double threshold = kDefaultBlurThreshold,
                                     const std::set<std::string>* only = nullptr) {
  if (!(threshold >= 0.0)) throw Error(ErrorCode::invalid_argument, "blur threshold must be >= 0");
  auto out = next_version(m, "filter_blurry");
  bool changed = false;
  for (auto& f : out.frames) {
    if (!f.excluded && f.blur_score < threshold && detail::in_scope(f, only)) {
      detail::exclude(f, ExclusionReason::blur);
      changed = true;
    }
  }
  if (!changed) return m;
  mark_frames_changed(out);
  return out;
}

/// Within each (asset, label) group in time order, excludes a frame whose hash
/// lies within `hamming_max` of the most recent kept frame.
inline DatasetManifest dedup_near_duplicates(const DatasetManifest& m, int hamming_max = kDefaultHammingMax,
                                             const std::set<std::string>* only = nullptr) {
  if (hamming_max < 0 || hamming_max > 64) throw Error(ErrorCode::invalid_argument, "hamming_max must be in [0,64]");
  auto out = next_version(m, "dedup_near_duplicates");
  using Key = std::pair<std::string, std::string>;
  auto groups = detail::group_by_time<Key>(out.frames, [](const FrameRecord& f) { return Key{f.asset_id, f.label}; });
  bool changed = false;
  for (const auto& [key, idx] : groups) {
    const FrameRecord* last_kept = nullptr;
    for (const auto i : idx) {
      auto& f = out.frames[i];
      if (f.excluded) continue;
      if (last_kept && detail::in_scope(f, only) &&
          hamming_distance(f.perceptual_hash, last_kept->perceptual_hash) <= hamming_max) {
        detail::exclude(f, ExclusionReason::duplicate);
        changed = true;
        continue;
      }
      last_kept = &f;
    }
  }
  if (!changed) return m;
  mark_frames_changed(out);
  return out;
}

/// Clamps each category into [min_count, max_count] kept frames. Oversized
/// categories are thinned by uniform temporal stride within each asset; per-asset
/// quotas are proportional (largest remainder, seeded tie-break). Undersized
/// categories are flagged deficient, never padded. Earlier balance exclusions are
/// restored first, so re-balancing after new material arrives starts fresh.
inline DatasetManifest balance(const DatasetManifest& m, std::size_t min_count = kDefaultBalanceMin,
                               std::size_t max_count = kDefaultBalanceMax, std::uint64_t seed = 0) {
  if (min_count > max_count) throw Error(ErrorCode::invalid_argument, "min_count exceeds max_count");
  auto out = next_version(m, "balance");
  for (auto& f : out.frames) {
    if (f.exclusion_reason == ExclusionReason::balance) {
      f.excluded = false;
      f.exclusion_reason = ExclusionReason::none;
    }
  }

  std::map<std::string, std::map<std::string, std::vector<std::size_t>>> kept;  // label -> asset -> frames
  for (std::size_t i = 0; i < out.frames.size(); ++i) {
    const auto& f = out.frames[i];
    if (!f.excluded) kept[f.label][f.asset_id].push_back(i);
  }

  BalanceRecord record{out.version, min_count, max_count, seed, {}};
  for (const auto& c : out.categories) {
    auto& per_asset = kept[c.slug];
    std::size_t n = 0;
    for (const auto& [a, idx] : per_asset) n += idx.size();
    if (n < min_count) {
      record.deficient.push_back(c.slug);
      continue;
    }
    if (n <= max_count) continue;

    struct Quota {
      std::string asset;
      std::size_t q;
      std::size_t remainder;  // (max_count * n_a) mod n, compared exactly
      std::uint64_t tie;
    };
    std::vector<Quota> quotas;
    std::size_t assigned = 0;
    for (const auto& [a, idx] : per_asset) {
      const auto scaled = static_cast<unsigned __int128>(max_count) * idx.size();
      const auto q = static_cast<std::size_t>(scaled / n);
      quotas.push_back({a, q, static_cast<std::size_t>(scaled % n),
                        SplitMix64::derive_seed(std::to_string(seed), c.slug, a)});
      assigned += q;
    }
    std::vector<std::size_t> order(quotas.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
      if (quotas[x].remainder != quotas[y].remainder) return quotas[x].remainder > quotas[y].remainder;
      return quotas[x].tie < quotas[y].tie;
    });
    for (std::size_t k = 0; assigned < max_count; ++k, ++assigned) ++quotas[order[k]].q;

    for (const auto& quota : quotas) {
      auto idx = per_asset[quota.asset];
      std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return std::tie(out.frames[a].timestamp_s, out.frames[a].frame_id) <
               std::tie(out.frames[b].timestamp_s, out.frames[b].frame_id);
      });
      std::vector<bool> keep(idx.size(), false);
      for (std::size_t i = 0; i < quota.q; ++i) keep[i * idx.size() / quota.q] = true;
      for (std::size_t i = 0; i < idx.size(); ++i) {
        if (!keep[i]) detail::exclude(out.frames[idx[i]], ExclusionReason::balance);
      }
    }
  }
  out.balance_min = min_count;
  out.balance_max = max_count;
  out.balance = std::move(record);
  mark_frames_changed(out);
  return out;
}

/// |train| = floor(fraction * n + 0.5) per category, so an odd frame goes to train at 0.5.
inline std::size_t train_count(std::size_t n, double fraction) {
  return std::min(n, static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 0.5)));
}

/// Per-category seeded shuffle of kept frames into train and eval.
inline DatasetManifest split(const DatasetManifest& m, double train_fraction = kDefaultTrainFraction,
                             std::uint64_t seed = 0) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw Error(ErrorCode::invalid_argument, "train_fraction must be in (0,1)");
  }
  auto out = next_version(m, "split");
  out.split.clear();
  out.normalization.reset();
  std::map<std::string, std::vector<std::string>> by_label;
  for (const auto& f : out.frames) {
    if (!f.excluded) by_label[f.label].push_back(f.frame_id);
  }
  for (auto& [label, ids] : by_label) {
    std::sort(ids.begin(), ids.end());  // canonical order before shuffling
    SplitMix64 rng(SplitMix64::derive_seed(out.dataset_id, std::to_string(seed), label));
    fisher_yates(ids, rng);
    const auto n_train = train_count(ids.size(), train_fraction);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      out.split[ids[i]] = i < n_train ? SplitAssignment::train : SplitAssignment::eval;
    }
  }
  out.split_seed = seed;
  out.split_fraction = train_fraction;
  return out;
}

/// Per-channel mean and population std in [0,1] over kept train frames (all kept
/// frames when no split exists). Pixels are read back, never modified.
inline Normalization compute_normalization(const DatasetManifest& m, const FrameStore& store) {
  std::array<std::uint64_t, 3> sum{};
  std::array<unsigned __int128, 3> sum_sq{};
  std::uint64_t pixels = 0;
  std::size_t frames = 0;
  for (const auto& f : m.frames) {
    if (f.excluded) continue;
    if (m.split_recorded() && m.assignment(f.frame_id) != SplitAssignment::train) continue;
    const auto img = store.read(f.label, f.frame_id);
    for (std::size_t i = 0; i < img.pixels.size(); i += 3) {
      for (std::size_t c = 0; c < 3; ++c) {
        const std::uint64_t v = img.pixels[i + c];
        sum[c] += v;
        sum_sq[c] += v * v;
      }
    }
    pixels += img.pixel_count();
    ++frames;
  }
  if (frames == 0) {
    throw Error(m.split_recorded() ? ErrorCode::empty_train_split : ErrorCode::empty_dataset,
                "no kept frames to compute normalization over");
  }
  Normalization n;
  if (pixels == 0) return n;
  for (std::size_t c = 0; c < 3; ++c) {
    const long double mean = static_cast<long double>(sum[c]) / pixels;
    const long double var = static_cast<long double>(sum_sq[c]) / pixels - mean * mean;
    n.mean[c] = static_cast<double>(mean / 255.0L);
    n.std[c] = static_cast<double>(std::sqrt(std::max(0.0L, var)) / 255.0L);
  }
  return n;
}

inline DatasetManifest record_normalization(const DatasetManifest& m, const Normalization& n) {
  auto out = next_version(m, "compute_normalization");
  out.normalization = n;
  return out;
}

namespace detail {

inline void require_frames(const DatasetManifest& m, const std::vector<std::string>& ids) {
  std::set<std::string> known;
  for (const auto& f : m.frames) known.insert(f.frame_id);
  std::vector<std::string> unknown;
  for (const auto& id : ids) {
    if (!known.contains(id)) unknown.push_back(id);
  }
  if (!unknown.empty()) throw Error(ErrorCode::unknown_frame, "unknown frame ids", unknown);
}

}  // namespace detail

/// Hand-removal of out-of-context frames. Frames already excluded for another
/// reason keep that reason, so a later include cannot resurrect them.
inline DatasetManifest exclude_manual(const DatasetManifest& m, const std::vector<std::string>& frame_ids,
                                      const std::string& note) {
  detail::require_frames(m, frame_ids);
  const std::set<std::string> ids(frame_ids.begin(), frame_ids.end());
  auto out = next_version(m, "exclude_manual");
  bool changed = false;
  for (auto& f : out.frames) {
    if (!ids.contains(f.frame_id)) continue;
    if (f.excluded && f.exclusion_reason != ExclusionReason::manual) continue;
    if (f.exclusion_reason == ExclusionReason::manual && f.note == note) continue;
    detail::exclude(f, ExclusionReason::manual);
    f.note = note;
    changed = true;
  }
  if (!changed) return m;
  mark_frames_changed(out);
  return out;
}

/// Inverse of exclude_manual: only manual exclusions are lifted.
inline DatasetManifest include_manual(const DatasetManifest& m, const std::vector<std::string>& frame_ids) {
  detail::require_frames(m, frame_ids);
  const std::set<std::string> ids(frame_ids.begin(), frame_ids.end());
  auto out = next_version(m, "include_manual");
  bool changed = false;
  for (auto& f : out.frames) {
    if (ids.contains(f.frame_id) && f.exclusion_reason == ExclusionReason::manual) {
      f.excluded = false;
      f.exclusion_reason = ExclusionReason::none;
      f.note.clear();
      changed = true;
    }
  }
  if (!changed) return m;
  mark_frames_changed(out);
  return out;
}

struct CategoryCuration {
  std::size_t kept = 0;
  std::map<std::string, std::size_t> excluded_by_reason;
  bool deficient = false;
  std::size_t train = 0;
  std::size_t eval = 0;
};

/// {category -> {kept, excluded_by_reason, deficient}} plus split counts.
inline Json curation_report(const DatasetManifest& m) {
  std::map<std::string, CategoryCuration> per;
  for (const auto& c : m.categories) {
    auto& r = per[c.slug];
    for (const char* why : {"blur", "duplicate", "manual", "balance"}) r.excluded_by_reason[why] = 0;
  }
  for (const auto& f : m.frames) {
    auto& r = per[f.label];
    if (f.excluded) {
      ++r.excluded_by_reason[Json(f.exclusion_reason).get<std::string>()];
      continue;
    }
    ++r.kept;
    const auto a = m.assignment(f.frame_id);
    if (a == SplitAssignment::train) ++r.train;
    if (a == SplitAssignment::eval) ++r.eval;
  }
  if (m.balance_valid()) {
    for (const auto& slug : m.balance->deficient) per[slug].deficient = true;
  }
  Json cats = Json::object();
  for (const auto& [slug, r] : per) {
    cats[slug] = {{"kept", r.kept},
                  {"excluded_by_reason", r.excluded_by_reason},
                  {"deficient", r.deficient},
                  {"train", r.train},
                  {"eval", r.eval}};
  }
  return {{"dataset_id", m.dataset_id},
          {"version", m.version},
          {"balance_valid", m.balance_valid()},
          {"balance_min", m.balance_min},
          {"balance_max", m.balance_max},
          {"split_recorded", m.split_recorded()},
          {"categories", cats}};
}

}  // namespace catchrel
