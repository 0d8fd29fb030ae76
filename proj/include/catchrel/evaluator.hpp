#pragma once

// Scores classifier prediction logs against a manifest: top-k error per
// category and macro-averaged, context subsets, majority voting, and a small
// nearest-centroid baseline that exercises the log format end to end.

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "catchrel/frame_store.hpp"
#include "catchrel/image_metrics.hpp"
#include "catchrel/manifest.hpp"

namespace catchrel {

struct RankedLabel {
  std::string label;
  double score = 0.0;

  bool operator==(const RankedLabel&) const = default;
};

inline void to_json(Json& j, const RankedLabel& r) { j = {{"label", r.label}, {"score", r.score}}; }
inline void from_json(const Json& j, RankedLabel& r) {
  j.at("label").get_to(r.label);
  j.at("score").get_to(r.score);
}

struct PredictionRecord {
  std::string frame_id;
  std::string classifier_id;
  std::vector<RankedLabel> ranking;

  bool operator==(const PredictionRecord&) const = default;
};

inline void to_json(Json& j, const PredictionRecord& p) {
  j = {{"frame_id", p.frame_id}, {"classifier_id", p.classifier_id}, {"ranking", p.ranking}};
}
inline void from_json(const Json& j, PredictionRecord& p) {
  j.at("frame_id").get_to(p.frame_id);
  j.at("classifier_id").get_to(p.classifier_id);
  j.at("ranking").get_to(p.ranking);
}

using PredictionLog = std::vector<PredictionRecord>;

inline void write_prediction_log(std::ostream& out, const PredictionLog& log) {
  for (const auto& p : log) out << Json(p).dump() << '\n';
}

inline PredictionLog read_prediction_log(std::istream& in) {
  PredictionLog out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(Json::parse(line).get<PredictionRecord>());
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::parse_error, "prediction log line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

/// Problems with one record's ranking, independent of any manifest state.
inline std::optional<std::string> ranking_problem(const PredictionRecord& p, const DatasetManifest& m) {
  if (p.ranking.empty()) return "empty ranking";
  std::set<std::string> seen;
  for (std::size_t i = 0; i < p.ranking.size(); ++i) {
    const auto& r = p.ranking[i];
    if (!m.has_category(r.label)) return "unregistered label '" + r.label + "'";
    if (!seen.insert(r.label).second) return "repeated label '" + r.label + "'";
    if (!std::isfinite(r.score)) return "non-finite score";
    if (i > 0 && !(r.score < p.ranking[i - 1].score)) return "scores not strictly descending";
  }
  return std::nullopt;
}

struct CategoryScore {
  std::size_t n = 0;
  std::size_t top1_misses = 0;
  std::size_t top3_misses = 0;
  std::size_t topk_misses = 0;
  double top1_error_pct = 0.0;
  double top3_error_pct = 0.0;
  double topk_error_pct = 0.0;

  bool operator==(const CategoryScore&) const = default;
};

struct EvaluationReport {
  std::string classifier_id;
  std::string split = "eval";
  std::optional<std::string> subset_tag;
  int k = 1;
  std::map<std::string, CategoryScore> per_category;  // categories with n > 0
  double macro_top1_error_pct = 0.0;
  double macro_top3_error_pct = 0.0;
  double macro_topk_error_pct = 0.0;
  std::size_t frames_scored = 0;
  std::size_t frames_unpredicted = 0;  // frames in scope that no record covered

  bool operator==(const EvaluationReport&) const = default;
};

inline void to_json(Json& j, const CategoryScore& c) {
  j = {{"n", c.n},
       {"top1_misses", c.top1_misses},
       {"top3_misses", c.top3_misses},
       {"topk_misses", c.topk_misses},
       {"top1_error_pct", c.top1_error_pct},
       {"top3_error_pct", c.top3_error_pct},
       {"topk_error_pct", c.topk_error_pct}};
}

inline void to_json(Json& j, const EvaluationReport& r) {
  j = {{"classifier_id", r.classifier_id},
       {"split", r.split},
       {"subset_tag", r.subset_tag ? Json(*r.subset_tag) : Json(nullptr)},
       {"k", r.k},
       {"per_category", r.per_category},
       {"macro_top1_error_pct", r.macro_top1_error_pct},
       {"macro_top3_error_pct", r.macro_top3_error_pct},
       {"macro_topk_error_pct", r.macro_topk_error_pct},
       {"frames_scored", r.frames_scored},
       {"frames_unpredicted", r.frames_unpredicted}};
}

inline void from_json(const Json& j, CategoryScore& c) {
  j.at("n").get_to(c.n);
  j.at("top1_misses").get_to(c.top1_misses);
  j.at("top3_misses").get_to(c.top3_misses);
  j.at("topk_misses").get_to(c.topk_misses);
  j.at("top1_error_pct").get_to(c.top1_error_pct);
  j.at("top3_error_pct").get_to(c.top3_error_pct);
  j.at("topk_error_pct").get_to(c.topk_error_pct);
}

inline void from_json(const Json& j, EvaluationReport& r) {
  j.at("classifier_id").get_to(r.classifier_id);
  j.at("split").get_to(r.split);
  if (!j.at("subset_tag").is_null()) r.subset_tag = j.at("subset_tag").get<std::string>();
  j.at("k").get_to(r.k);
  j.at("per_category").get_to(r.per_category);
  j.at("macro_top1_error_pct").get_to(r.macro_top1_error_pct);
  j.at("macro_top3_error_pct").get_to(r.macro_top3_error_pct);
  j.at("macro_topk_error_pct").get_to(r.macro_topk_error_pct);
  j.at("frames_scored").get_to(r.frames_scored);
  j.at("frames_unpredicted").get_to(r.frames_unpredicted);
}

/// 100 * misses / n rounded half-up to one decimal, computed in integers.
inline double error_pct(std::size_t misses, std::size_t n) {
  if (n == 0) return 0.0;
  const auto tenths = (2000 * static_cast<std::uint64_t>(misses) + n) / (2 * static_cast<std::uint64_t>(n));
  return static_cast<double>(tenths) / 10.0;
}

/// Unweighted mean of unrounded per-category rates, then rounded to one decimal.
inline double macro_pct(const std::vector<std::pair<std::size_t, std::size_t>>& misses_n) {
  if (misses_n.empty()) return 0.0;
  long double sum = 0.0L;
  for (const auto& [miss, n] : misses_n) sum += 1000.0L * miss / n;
  const long double tenths = sum / misses_n.size();
  return static_cast<double>(std::floor(tenths + 0.5L + 1e-9L)) / 10.0;
}

/// True label absent from the first k ranking entries. A partial ranking that
/// never names the true label misses at every k.
inline bool misses_at(const PredictionRecord& p, const std::string& truth, int k) {
  const auto limit = std::min<std::size_t>(static_cast<std::size_t>(k), p.ranking.size());
  for (std::size_t i = 0; i < limit; ++i) {
    if (p.ranking[i].label == truth) return false;
  }
  return true;
}

inline const char* split_name(SplitAssignment s) {
  return s == SplitAssignment::train ? "train" : s == SplitAssignment::eval ? "eval" : "unassigned";
}

struct EvaluationScope {
  SplitAssignment split = SplitAssignment::eval;
  std::optional<std::string> subset_tag;
};

/// Top-k error of one classifier's log. Every record must name a known, kept
/// frame in the requested split; anything else is rejected and listed.
inline EvaluationReport topk_error(const PredictionLog& log, const DatasetManifest& m, int k = 1,
                                   const EvaluationScope& scope = {}) {
  if (k < 1) throw Error(ErrorCode::invalid_argument, "k must be >= 1");
  if (log.empty()) throw Error(ErrorCode::empty_list, "prediction log is empty");
  if (!m.split_recorded()) throw Error(ErrorCode::precondition, "manifest has no recorded split");
  std::set<std::string> classifiers;
  for (const auto& p : log) classifiers.insert(p.classifier_id);
  if (classifiers.size() != 1) {
    throw Error(ErrorCode::invalid_argument, "a log must hold one classifier",
                std::vector<std::string>(classifiers.begin(), classifiers.end()));
  }

  std::map<std::string, const FrameRecord*> frames;
  for (const auto& f : m.frames) frames.emplace(f.frame_id, &f);

  std::vector<std::string> unknown;
  std::vector<std::string> rejected;
  std::set<std::string> seen;
  for (const auto& p : log) {
    auto it = frames.find(p.frame_id);
    if (it == frames.end()) {
      unknown.push_back(p.frame_id);
      continue;
    }
    if (!seen.insert(p.frame_id).second) {
      rejected.push_back(p.frame_id + ": duplicate prediction");
    } else if (it->second->excluded) {
      rejected.push_back(p.frame_id + ": frame is excluded");
    } else if (m.assignment(p.frame_id) != scope.split) {
      rejected.push_back(p.frame_id + ": frame is in " + split_name(m.assignment(p.frame_id)) + " split");
    } else if (auto why = ranking_problem(p, m)) {
      rejected.push_back(p.frame_id + ": " + *why);
    }
  }
  if (!unknown.empty()) throw Error(ErrorCode::unknown_frame, "predictions name unknown frames", unknown);
  if (!rejected.empty()) throw Error(ErrorCode::rejected_predictions, "predictions rejected", rejected);

  auto in_scope = [&](const FrameRecord& f) {
    return !f.excluded && m.assignment(f.frame_id) == scope.split &&
           (!scope.subset_tag || f.context_tags.contains(*scope.subset_tag));
  };

  EvaluationReport r;
  r.classifier_id = *classifiers.begin();
  r.split = split_name(scope.split);
  r.subset_tag = scope.subset_tag;
  r.k = k;
  for (const auto& p : log) {
    const auto& f = *frames.at(p.frame_id);
    if (!in_scope(f)) continue;
    auto& c = r.per_category[f.label];
    ++c.n;
    c.top1_misses += misses_at(p, f.label, 1);
    c.top3_misses += misses_at(p, f.label, 3);
    c.topk_misses += misses_at(p, f.label, k);
    ++r.frames_scored;
  }
  for (const auto& f : m.frames) {
    if (in_scope(f) && !seen.contains(f.frame_id)) ++r.frames_unpredicted;
  }
  std::vector<std::pair<std::size_t, std::size_t>> m1, m3, mk;
  for (auto& [slug, c] : r.per_category) {
    c.top1_error_pct = error_pct(c.top1_misses, c.n);
    c.top3_error_pct = error_pct(c.top3_misses, c.n);
    c.topk_error_pct = error_pct(c.topk_misses, c.n);
    m1.emplace_back(c.top1_misses, c.n);
    m3.emplace_back(c.top3_misses, c.n);
    mk.emplace_back(c.topk_misses, c.n);
  }
  r.macro_top1_error_pct = macro_pct(m1);
  r.macro_top3_error_pct = macro_pct(m3);
  r.macro_topk_error_pct = macro_pct(mk);
  return r;
}

/// Report restricted to eval frames carrying `tag` (a scene context such as "market").
inline EvaluationReport context_report(const PredictionLog& log, const DatasetManifest& m, const std::string& tag,
                                       int k = 1) {
  const bool present = std::any_of(m.frames.begin(), m.frames.end(), [&](const FrameRecord& f) {
    return !f.excluded && m.assignment(f.frame_id) == SplitAssignment::eval && f.context_tags.contains(tag);
  });
  if (!present) throw Error(ErrorCode::unknown_tag, "no eval frame carries tag '" + tag + "'");
  return topk_error(log, m, k, {SplitAssignment::eval, tag});
}

inline constexpr const char* kVoteClassifierId = "vote";

struct VoteResult {
  PredictionLog records;
  EvaluationReport report;
};

/// Majority consensus across classifiers. Per frame the winner is the modal
/// top-1 label; ties go to the highest summed score (sum of the scores each
/// classifier gives the label), then the smaller slug. The emitted ranking
/// orders every mentioned label by (votes, summed score, slug).
inline PredictionLog vote_records(const std::vector<PredictionLog>& logs) {
  if (logs.size() < 2) throw Error(ErrorCode::invalid_argument, "voting needs at least two classifiers");
  std::vector<std::map<std::string, const PredictionRecord*>> by_frame(logs.size());
  for (std::size_t i = 0; i < logs.size(); ++i) {
    std::set<std::string> ids;
    for (const auto& p : logs[i]) {
      ids.insert(p.classifier_id);
      if (!by_frame[i].emplace(p.frame_id, &p).second) {
        throw Error(ErrorCode::rejected_predictions, "duplicate prediction", {p.frame_id});
      }
    }
    if (ids.size() != 1) throw Error(ErrorCode::invalid_argument, "each log must hold one classifier");
  }
  std::set<std::string> all;
  for (const auto& bf : by_frame) {
    for (const auto& [id, p] : bf) all.insert(id);
  }
  std::vector<std::string> mismatched;
  for (const auto& id : all) {
    for (const auto& bf : by_frame) {
      if (!bf.contains(id)) {
        mismatched.push_back(id);
        break;
      }
    }
  }
  if (!mismatched.empty()) throw Error(ErrorCode::coverage_mismatch, "logs cover different frames", mismatched);

  PredictionLog out;
  for (const auto& id : all) {
    std::map<std::string, std::pair<std::size_t, double>> tally;  // label -> (votes, summed score)
    for (const auto& bf : by_frame) {
      const auto& p = *bf.at(id);
      if (p.ranking.empty()) throw Error(ErrorCode::rejected_predictions, "empty ranking", {id});
      ++tally[p.ranking.front().label].first;
      for (const auto& r : p.ranking) tally[r.label].second += r.score;
    }
    std::vector<std::pair<std::string, std::pair<std::size_t, double>>> order(tally.begin(), tally.end());
    std::stable_sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
      if (a.second.first != b.second.first) return a.second.first > b.second.first;
      if (a.second.second != b.second.second) return a.second.second > b.second.second;
      return a.first < b.first;
    });
    PredictionRecord rec{id, kVoteClassifierId, {}};
    const auto n = static_cast<double>(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) rec.ranking.push_back({order[i].first, (n - i) / n});
    out.push_back(std::move(rec));
  }
  return out;
}

inline VoteResult majority_vote(const std::vector<PredictionLog>& logs, const DatasetManifest& m, int k = 1,
                                const EvaluationScope& scope = {}) {
  auto records = vote_records(logs);
  auto report = topk_error(records, m, k, scope);
  return {std::move(records), std::move(report)};
}

/// Nearest-centroid classifier over 3x8-bin colour histograms. Centroids come
/// from the train split; the full ranking is by ascending centroid distance.
inline PredictionLog baseline_classify(const DatasetManifest& m, const FrameStore& store,
                                       SplitAssignment target = SplitAssignment::eval,
                                       const std::string& classifier_id = "baseline-centroid") {
  if (!m.split_recorded()) throw Error(ErrorCode::precondition, "manifest has no recorded split");
  using Hist = std::array<double, 3 * kHistogramBins>;
  std::map<std::string, std::pair<Hist, std::size_t>> sums;
  std::map<std::string, std::size_t> kept;
  for (const auto& f : m.frames) {
    if (f.excluded) continue;
    ++kept[f.label];
    if (m.assignment(f.frame_id) != SplitAssignment::train) continue;
    const auto h = color_histogram(store.read(f.label, f.frame_id));
    auto& [acc, n] = sums[f.label];
    for (std::size_t i = 0; i < h.size(); ++i) acc[i] += h[i];
    ++n;
  }
  std::set<std::string> deficient;
  if (m.balance_valid()) deficient.insert(m.balance->deficient.begin(), m.balance->deficient.end());
  std::vector<std::string> missing;
  for (const auto& [label, n] : kept) {
    if (!sums.contains(label) && !deficient.contains(label)) missing.push_back(label);
  }
  if (!missing.empty() || sums.empty()) {
    throw Error(ErrorCode::empty_train_split, "categories without train frames", missing);
  }
  std::vector<std::pair<std::string, Hist>> centroids;  // slug order
  for (auto& [label, s] : sums) {
    for (auto& v : s.first) v /= static_cast<double>(s.second);
    centroids.emplace_back(label, s.first);
  }

  PredictionLog log;
  for (const auto& f : m.frames) {
    if (f.excluded || m.assignment(f.frame_id) != target) continue;
    const auto h = color_histogram(store.read(f.label, f.frame_id));
    std::vector<std::pair<double, std::string>> dist;
    for (const auto& [label, c] : centroids) {
      double d = 0.0;
      for (std::size_t i = 0; i < h.size(); ++i) d += (h[i] - c[i]) * (h[i] - c[i]);
      dist.emplace_back(std::sqrt(d), label);
    }
    std::sort(dist.begin(), dist.end());  // exact ties fall back to slug order
    PredictionRecord rec{f.frame_id, classifier_id, {}};
    for (const auto& [d, label] : dist) {
      double score = 1.0 / (1.0 + d);
      if (!rec.ranking.empty() && score >= rec.ranking.back().score) {
        score = std::nextafter(rec.ranking.back().score, 0.0);
      }
      rec.ranking.push_back({label, score});
    }
    log.push_back(std::move(rec));
  }
  std::sort(log.begin(), log.end(), [](const auto& a, const auto& b) { return a.frame_id < b.frame_id; });
  return log;
}

/// Plain-text table of a report, one row per category.
inline std::string report_table(const EvaluationReport& r) {
  std::ostringstream out;
  out << "classifier " << r.classifier_id << "  split " << r.split;
  if (r.subset_tag) out << "  subset " << *r.subset_tag;
  out << "\n";
  char line[160];
  std::snprintf(line, sizeof line, "%-24s %6s %8s %8s\n", "category", "n", "top1%", "top3%");
  out << line;
  for (const auto& [slug, c] : r.per_category) {
    std::snprintf(line, sizeof line, "%-24s %6zu %8.1f %8.1f\n", slug.c_str(), c.n, c.top1_error_pct,
                  c.top3_error_pct);
    out << line;
  }
  std::snprintf(line, sizeof line, "%-24s %6zu %8.1f %8.1f\n", "macro", r.frames_scored, r.macro_top1_error_pct,
                r.macro_top3_error_pct);
  out << line;
  return out.str();
}

/// Bar-chart data: `slug,top1,top3` per category.
inline std::string report_csv(const EvaluationReport& r) {
  std::ostringstream out;
  out << "slug,top1,top3\n";
  char line[96];
  for (const auto& [slug, c] : r.per_category) {
    std::snprintf(line, sizeof line, "%s,%.1f,%.1f\n", slug.c_str(), c.top1_error_pct, c.top3_error_pct);
    out << line;
  }
  return out.str();
}

}  // namespace catchrel
