#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "catchrel/model.hpp"
#include "catchrel/text.hpp"

namespace catchrel {

inline constexpr double kDefaultConfidenceThreshold = 0.9;

struct SearchHit {
  int utterance_index = 0;
  double start_s = 0.0;
  double end_s = 0.0;
  std::string matched_token;

  bool operator==(const SearchHit&) const = default;
};

inline void to_json(Json& j, const SearchHit& h) {
  j = Json{{"utterance_index", h.utterance_index},
           {"start_s", h.start_s},
           {"end_s", h.end_s},
           {"matched_token", h.matched_token}};
}
inline void from_json(const Json& j, SearchHit& h) {
  j.at("utterance_index").get_to(h.utterance_index);
  j.at("start_s").get_to(h.start_s);
  j.at("end_s").get_to(h.end_s);
  j.at("matched_token").get_to(h.matched_token);
}

inline void check_threshold(double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw Error(ErrorCode::invalid_argument, "confidence threshold must be within [0, 1]");
  }
}

/// Keeps utterances with confidence >= threshold, in order.
inline Transcript filter_utterances(const Transcript& t, double threshold) {
  check_threshold(threshold);
  Transcript out = t;
  out.utterances.clear();
  std::copy_if(t.utterances.begin(), t.utterances.end(), std::back_inserter(out.utterances),
               [threshold](const Utterance& u) { return u.confidence >= threshold; });
  return out;
}

/// Whole-token, case-insensitive search. A multi-word term matches as a
/// consecutive token sequence. One hit per matching utterance, in time order.
inline std::vector<SearchHit> search(const Transcript& t, std::string_view term) {
  const auto needle = tokenize(term);
  if (needle.empty()) throw Error(ErrorCode::empty_term, "search term has no tokens");
  std::string matched;
  for (const auto& tok : needle) matched += (matched.empty() ? "" : " ") + tok;

  std::vector<SearchHit> hits;
  for (std::size_t i = 0; i < t.utterances.size(); ++i) {
    const auto tokens = tokenize(t.utterances[i].text);
    const auto it = std::search(tokens.begin(), tokens.end(), needle.begin(), needle.end());
    if (it != tokens.end()) {
      hits.push_back({static_cast<int>(i), t.utterances[i].start_s, t.utterances[i].end_s, matched});
    }
  }
  std::stable_sort(hits.begin(), hits.end(),
                   [](const SearchHit& a, const SearchHit& b) { return a.start_s < b.start_s; });
  return hits;
}

struct TranscriptIssue {
  std::size_t utterance_index;
  std::string rule;
};

/// Type invariants: sorted, inside [0, duration], start < end, confidence in [0,1].
inline std::vector<TranscriptIssue> validate_transcript(const Transcript& t, double duration_s) {
  std::vector<TranscriptIssue> out;
  for (std::size_t i = 0; i < t.utterances.size(); ++i) {
    const auto& u = t.utterances[i];
    if (!(u.start_s >= 0.0 && u.start_s < u.end_s && u.end_s <= duration_s + 1e-6)) {
      out.push_back({i, "0 <= start < end <= duration"});
    }
    if (!(u.confidence >= 0.0 && u.confidence <= 1.0)) out.push_back({i, "confidence in [0,1]"});
    if (i > 0 && t.utterances[i - 1].start_s > u.start_s) out.push_back({i, "sorted by start"});
  }
  return out;
}

}  // namespace catchrel
