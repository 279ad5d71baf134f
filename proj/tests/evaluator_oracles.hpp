#pragma once

// Independent references for the scorer and the adapter fit, shared by the
// unit tests and the acceptance binary.

#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "vidscan/evaluator.hpp"

namespace vidscan::testing {

// Maximum bipartite matching (augmenting paths) between captures and the
// ranges containing them. Returns the number of matched pairs.
inline std::int64_t brute_force_tp(const std::vector<FrameIndex>& captures, const std::vector<FrameRange>& ranges) {
  std::vector<int> owner(ranges.size(), -1);
  std::function<bool(std::size_t, std::vector<bool>&)> augment = [&](std::size_t c, std::vector<bool>& seen) {
    for (std::size_t r = 0; r < ranges.size(); ++r) {
      if (seen[r] || captures[c] < ranges[r].first || captures[c] > ranges[r].second) continue;
      seen[r] = true;
      if (owner[r] < 0 || augment(static_cast<std::size_t>(owner[r]), seen)) {
        owner[r] = static_cast<int>(c);
        return true;
      }
    }
    return false;
  };
  std::int64_t tp = 0;
  for (std::size_t c = 0; c < captures.size(); ++c) {
    std::vector<bool> seen(ranges.size(), false);
    if (augment(c, seen)) ++tp;
  }
  return tp;
}

struct MatchInstance {
  std::vector<FrameIndex> captures;
  std::vector<FrameRange> ranges;
};

// Up to 8 disjoint sorted ranges and 12 sorted captures (duplicates allowed)
// over a short timeline.
inline MatchInstance random_match_instance(std::mt19937_64& rng) {
  MatchInstance m;
  const int nr = static_cast<int>(rng() % 9);
  FrameIndex at = static_cast<FrameIndex>(rng() % 4);
  for (int i = 0; i < nr; ++i) {
    const FrameIndex len = static_cast<FrameIndex>(rng() % 5);
    m.ranges.push_back({at, at + len});
    at += len + 1 + static_cast<FrameIndex>(rng() % 4);
  }
  const int nc = static_cast<int>(rng() % 13);
  for (int i = 0; i < nc; ++i) m.captures.push_back(static_cast<FrameIndex>(rng() % static_cast<std::uint64_t>(at + 3)));
  std::sort(m.captures.begin(), m.captures.end());
  return m;
}

// Returns the number of instances where the scorer disagrees with the
// reference.
inline int matcher_disagreements(int instances, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  int bad = 0;
  for (int k = 0; k < instances; ++k) {
    const MatchInstance m = random_match_instance(rng);
    const Counts c = match_captures(m.captures, m.ranges).counts;
    const std::int64_t tp = brute_force_tp(m.captures, m.ranges);
    const Counts want{tp, static_cast<std::int64_t>(m.captures.size()) - tp, static_cast<std::int64_t>(m.ranges.size()) - tp};
    if (!(c == want)) ++bad;
  }
  return bad;
}

// Samples whose label is a known affine function of the hazard slots plus
// small noise.
struct PlantedRule {
  std::array<double, kHazardCount> weights{};
  double bias = 0.0;
};

inline std::vector<AdapterSample> planted_samples(const PlantedRule& rule, int videos, int per_video, double noise,
                                                  std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> n(0.0, noise);
  std::vector<AdapterSample> out;
  for (int v = 0; v < videos; ++v) {
    for (int i = 0; i < per_video; ++i) {
      AdapterSample s;
      s.video_id = "video_" + std::to_string(v);
      double y = rule.bias;
      for (int a = 0; a < kHazardCount; ++a) {
        s.attrs[static_cast<std::size_t>(a)] = static_cast<float>(u(rng));
        y += rule.weights[static_cast<std::size_t>(a)] * s.attrs[static_cast<std::size_t>(a)];
      }
      s.attrs[static_cast<std::size_t>(kHazardCount)] = static_cast<float>(u(rng));  // overall slot, unused
      s.label = y + (noise > 0 ? n(rng) : 0.0);
      out.push_back(s);
    }
  }
  return out;
}

// Largest |fitted - planted| over all weights and the bias, across folds.
inline double planted_rule_error(const AdapterFolds& folds, const PlantedRule& rule) {
  double worst = 0;
  for (const auto& a : folds.adapters) {
    for (int i = 0; i < kHazardCount; ++i)
      worst = std::max(worst, std::abs(a.weights[static_cast<std::size_t>(i)] - rule.weights[static_cast<std::size_t>(i)]));
    worst = std::max(worst, std::abs(a.bias - rule.bias));
  }
  return worst;
}

// True when no fold's adapter trained on a video it is applied to.
inline bool folds_are_honest(const AdapterFolds& folds) {
  for (const auto& [video, fold] : folds.fold_of) {
    const auto& train = folds.train_videos.at(static_cast<std::size_t>(fold));
    if (std::find(train.begin(), train.end(), video) != train.end()) return false;
    if (&folds.for_video(video) != &folds.adapters.at(static_cast<std::size_t>(fold))) return false;
  }
  return true;
}

}  // namespace vidscan::testing
