#pragma once

// Scoring of capture events against annotated capture ranges, corpus
// pooling, cape-filter sweeps and the per-user linear adapter fit.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "vidscan/engine.hpp"
#include "vidscan/labelstore.hpp"

namespace vidscan {

struct Counts {
  std::int64_t tp = 0, fp = 0, fn = 0;

  Counts& operator+=(const Counts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
  friend bool operator==(const Counts&, const Counts&) = default;
};

struct Prf {
  double p = 0.0, r = 0.0, f1 = 0.0;
};

// Precision and recall are 1 when every count is 0; otherwise an empty
// denominator gives 0. F1 is 0 when p + r is 0.
Prf prf(std::int64_t tp, std::int64_t fp, std::int64_t fn);
inline Prf prf(const Counts& c) { return prf(c.tp, c.fp, c.fn); }

// One-to-one matching of capture frames to inclusive ranges, in stream
// order: a capture inside an unmatched range matches it, any other capture
// is a false positive, and unmatched ranges are false negatives. Throws
// std::invalid_argument when captures are unsorted or ranges are unsorted or
// overlapping.
struct Matching {
  Counts counts;
  std::vector<int> range_of;  // per capture: range index or -1
};
Matching match_captures(const std::vector<FrameIndex>& captures, const std::vector<FrameRange>& ranges);

std::vector<FrameIndex> capture_frames(const std::vector<EngineEvent>& events);

struct VideoResult {
  std::string video_id;
  Counts counts;
  Prf prf;
  EngineStats stats;
};

VideoResult evaluate_video(const std::string& video_id, const std::vector<EngineEvent>& events,
                           const AnnotationSet& annotations, const EngineStats& stats = {});

struct CorpusReport {
  std::vector<VideoResult> per_video;
  Counts pooled_counts;  // micro pooling
  Prf pooled;
  double run_percent = 0.0;  // 100 * CapN runs / frames seen
};

// Throws std::invalid_argument on an empty list.
CorpusReport pool_results(std::vector<VideoResult> results);

std::string report_to_json(const CorpusReport& r);
CorpusReport report_from_json(std::string_view text);

// A video reduced to what the engine and the scorer need.
struct TracedVideo {
  std::string video_id;
  Trace trace;
  AnnotationSet annotations;
};

// Runs `run` for every id and scores it against that id's annotations.
// Throws std::invalid_argument when annotations are missing or `ids` is
// empty.
CorpusReport evaluate_corpus(const std::vector<std::string>& ids, const std::map<std::string, AnnotationSet>& annotations,
                             const std::function<EngineRun(const std::string&)>& run);

CorpusReport evaluate_traces(const std::vector<TracedVideo>& videos, const EngineConfig& cfg);

struct SweepRow {
  double threshold = 0.0;  // cape_filter
  Policy policy = Policy::OneCap;
  double run_percent = 0.0;
  Prf prf;
};

std::vector<SweepRow> sweep_cape_filter(const std::vector<TracedVideo>& videos, EngineConfig base,
                                        const std::vector<double>& grid, const std::vector<Policy>& policies);

// Header: threshold,policy,run_percent,p,r,f1
void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);

// ---------------------------------------------------------------------------
// Adapter

struct AdapterSample {
  std::string video_id;
  AttrValues attrs{};  // only the nine hazard slots are used
  double label = 0.0;
};

// Ridge-regularized least squares on [hazards, 1].
LinearAdapter fit_adapter_ols(const std::vector<const AdapterSample*>& samples, double ridge = 1e-6);

// K-fold fit grouped by video: videos are sorted by id and dealt round-robin
// into folds, and each fold's adapter is trained on every other fold.
struct AdapterFolds {
  std::vector<LinearAdapter> adapters;                  // one per fold
  std::vector<std::vector<std::string>> train_videos;  // per fold
  std::map<std::string, int> fold_of;                  // video -> held-out fold

  // The adapter that never saw this video. Throws for unknown ids.
  const LinearAdapter& for_video(const std::string& video_id) const;
};

// Throws std::invalid_argument with fewer videos than folds or folds < 2.
AdapterFolds fit_adapter_folds(const std::vector<AdapterSample>& samples, int folds = 5, double ridge = 1e-6);

std::string adapter_to_json(const LinearAdapter& a);
LinearAdapter adapter_from_json(std::string_view text);

}  // namespace vidscan
