#include "vidscan/evaluator.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <ostream>
#include <set>
#include <stdexcept>

#include "json.hpp"

namespace vidscan {

using nlohmann::json;

Prf prf(std::int64_t tp, std::int64_t fp, std::int64_t fn) {
  if (tp < 0 || fp < 0 || fn < 0) throw std::invalid_argument("prf: counts must be non-negative");
  if (tp == 0 && fp == 0 && fn == 0) return {1.0, 1.0, 1.0};
  Prf out;
  out.p = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
  out.r = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
  out.f1 = out.p + out.r == 0.0 ? 0.0 : 2.0 * out.p * out.r / (out.p + out.r);
  return out;
}

Matching match_captures(const std::vector<FrameIndex>& captures, const std::vector<FrameRange>& ranges) {
  if (!std::is_sorted(captures.begin(), captures.end()))
    throw std::invalid_argument("match_captures: captures must be sorted");
  for (std::size_t i = 0; i < ranges.size(); ++i) {
    if (ranges[i].first > ranges[i].second) throw std::invalid_argument("match_captures: range start after end");
    if (i > 0 && ranges[i].first <= ranges[i - 1].second)
      throw std::invalid_argument("match_captures: ranges must be sorted and disjoint");
  }
  Matching m;
  m.range_of.assign(captures.size(), -1);
  std::vector<bool> used(ranges.size(), false);
  std::size_t r = 0;
  for (std::size_t c = 0; c < captures.size(); ++c) {
    const FrameIndex f = captures[c];
    while (r < ranges.size() && ranges[r].second < f) ++r;
    if (r < ranges.size() && ranges[r].first <= f && !used[r]) {
      used[r] = true;
      m.range_of[c] = static_cast<int>(r);
      ++m.counts.tp;
    } else {
      ++m.counts.fp;
    }
  }
  m.counts.fn = static_cast<std::int64_t>(ranges.size()) - m.counts.tp;
  return m;
}

std::vector<FrameIndex> capture_frames(const std::vector<EngineEvent>& events) {
  std::vector<FrameIndex> out;
  for (const auto& e : events)
    if (e.kind == EventKind::Capture) out.push_back(e.frame);
  return out;
}

VideoResult evaluate_video(const std::string& video_id, const std::vector<EngineEvent>& events,
                           const AnnotationSet& annotations, const EngineStats& stats) {
  VideoResult v;
  v.video_id = video_id;
  v.counts = match_captures(capture_frames(events), annotations.capture_ranges).counts;
  v.prf = prf(v.counts);
  v.stats = stats;
  return v;
}

CorpusReport pool_results(std::vector<VideoResult> results) {
  if (results.empty()) throw std::invalid_argument("cannot pool an empty corpus");
  CorpusReport r;
  std::int64_t runs = 0, frames = 0;
  for (const auto& v : results) {
    r.pooled_counts += v.counts;
    runs += v.stats.capn_runs;
    frames += v.stats.frames_seen;
  }
  r.pooled = prf(r.pooled_counts);
  r.run_percent = frames == 0 ? 0.0 : 100.0 * static_cast<double>(runs) / static_cast<double>(frames);
  r.per_video = std::move(results);
  return r;
}

namespace {

json counts_json(const Counts& c, const Prf& m) {
  return {{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}, {"p", m.p}, {"r", m.r}, {"f1", m.f1}};
}

void read_counts(const json& j, Counts& c, Prf& m) {
  c = {j.at("tp").get<std::int64_t>(), j.at("fp").get<std::int64_t>(), j.at("fn").get<std::int64_t>()};
  m = {j.at("p").get<double>(), j.at("r").get<double>(), j.at("f1").get<double>()};
}

}  // namespace

std::string report_to_json(const CorpusReport& r) {
  json per = json::array();
  for (const auto& v : r.per_video) {
    json j = counts_json(v.counts, v.prf);
    j["video_id"] = v.video_id;
    j["frames_seen"] = v.stats.frames_seen;
    j["capn_runs"] = v.stats.capn_runs;
    per.push_back(std::move(j));
  }
  return json{{"per_video", per}, {"pooled", counts_json(r.pooled_counts, r.pooled)}, {"run_percent", r.run_percent}}
      .dump(2);
}

CorpusReport report_from_json(std::string_view text) {
  const json doc = json::parse(text);
  CorpusReport r;
  for (const auto& j : doc.at("per_video")) {
    VideoResult v;
    v.video_id = j.at("video_id").get<std::string>();
    read_counts(j, v.counts, v.prf);
    v.stats.frames_seen = j.value("frames_seen", std::int64_t{0});
    v.stats.capn_runs = j.value("capn_runs", std::int64_t{0});
    r.per_video.push_back(std::move(v));
  }
  read_counts(doc.at("pooled"), r.pooled_counts, r.pooled);
  r.run_percent = doc.at("run_percent").get<double>();
  return r;
}

CorpusReport evaluate_corpus(const std::vector<std::string>& ids, const std::map<std::string, AnnotationSet>& annotations,
                             const std::function<EngineRun(const std::string&)>& run) {
  if (ids.empty()) throw std::invalid_argument("evaluate_corpus: empty corpus");
  std::vector<VideoResult> results;
  for (const auto& id : ids) {
    const auto it = annotations.find(id);
    if (it == annotations.end()) throw std::invalid_argument("evaluate_corpus: no annotations for video " + id);
    const EngineRun r = run(id);
    results.push_back(evaluate_video(id, r.events, it->second, r.stats));
  }
  return pool_results(std::move(results));
}

CorpusReport evaluate_traces(const std::vector<TracedVideo>& videos, const EngineConfig& cfg) {
  if (videos.empty()) throw std::invalid_argument("evaluate_traces: empty corpus");
  std::vector<VideoResult> results;
  for (const auto& v : videos) {
    const EngineRun r = run_trace(cfg, v.trace);
    results.push_back(evaluate_video(v.video_id, r.events, v.annotations, r.stats));
  }
  return pool_results(std::move(results));
}

std::vector<SweepRow> sweep_cape_filter(const std::vector<TracedVideo>& videos, EngineConfig base,
                                        const std::vector<double>& grid, const std::vector<Policy>& policies) {
  std::vector<SweepRow> rows;
  for (Policy p : policies) {
    for (double t : grid) {
      base.policy = p;
      base.cape_filter = t;
      const CorpusReport r = evaluate_traces(videos, base);
      rows.push_back({t, p, r.run_percent, r.pooled});
    }
  }
  return rows;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "threshold,policy,run_percent,p,r,f1\n";
  for (const auto& r : rows)
    out << r.threshold << ',' << policy_name(r.policy) << ',' << r.run_percent << ',' << r.prf.p << ',' << r.prf.r
        << ',' << r.prf.f1 << '\n';
}

// ---------------------------------------------------------------------------
// Adapter

LinearAdapter fit_adapter_ols(const std::vector<const AdapterSample*>& samples, double ridge) {
  if (samples.empty()) throw std::invalid_argument("fit_adapter_ols: no samples");
  constexpr int k = kHazardCount + 1;
  Eigen::Matrix<double, k, k> xtx = Eigen::Matrix<double, k, k>::Zero();
  Eigen::Matrix<double, k, 1> xty = Eigen::Matrix<double, k, 1>::Zero();
  for (const AdapterSample* s : samples) {
    Eigen::Matrix<double, k, 1> x;
    for (int i = 0; i < kHazardCount; ++i) x[i] = s->attrs[static_cast<std::size_t>(i)];
    x[kHazardCount] = 1.0;
    xtx.noalias() += x * x.transpose();
    xty.noalias() += x * s->label;
  }
  xtx.diagonal().array() += ridge;
  const Eigen::Matrix<double, k, 1> beta = xtx.ldlt().solve(xty);
  LinearAdapter a;
  for (int i = 0; i < kHazardCount; ++i) a.weights[static_cast<std::size_t>(i)] = beta[i];
  a.bias = beta[kHazardCount];
  return a;
}

const LinearAdapter& AdapterFolds::for_video(const std::string& video_id) const {
  const auto it = fold_of.find(video_id);
  if (it == fold_of.end()) throw std::invalid_argument("adapter: unknown video " + video_id);
  return adapters.at(static_cast<std::size_t>(it->second));
}

AdapterFolds fit_adapter_folds(const std::vector<AdapterSample>& samples, int folds, double ridge) {
  if (folds < 2) throw std::invalid_argument("adapter: need at least 2 folds");
  std::set<std::string> ids;
  for (const auto& s : samples) ids.insert(s.video_id);
  if (static_cast<int>(ids.size()) < folds)
    throw std::invalid_argument("adapter: " + std::to_string(ids.size()) + " videos for " + std::to_string(folds) +
                                " folds");
  AdapterFolds out;
  int next = 0;
  for (const auto& id : ids) out.fold_of[id] = next++ % folds;
  out.train_videos.resize(static_cast<std::size_t>(folds));
  for (int f = 0; f < folds; ++f) {
    std::vector<const AdapterSample*> rows;
    std::set<std::string> used;
    for (const auto& s : samples)
      if (out.fold_of.at(s.video_id) != f) {
        rows.push_back(&s);
        used.insert(s.video_id);
      }
    out.train_videos[static_cast<std::size_t>(f)].assign(used.begin(), used.end());
    out.adapters.push_back(fit_adapter_ols(rows, ridge));
  }
  return out;
}

std::string adapter_to_json(const LinearAdapter& a) {
  return json{{"weights", std::vector<double>(a.weights.begin(), a.weights.end())}, {"bias", a.bias}}.dump();
}

LinearAdapter adapter_from_json(std::string_view text) {
  const json doc = json::parse(text);
  const auto w = doc.at("weights").get<std::vector<double>>();
  if (w.size() != static_cast<std::size_t>(kHazardCount))
    throw std::invalid_argument("adapter: expected " + std::to_string(kHazardCount) + " weights");
  LinearAdapter a;
  std::copy(w.begin(), w.end(), a.weights.begin());
  a.bias = doc.at("bias").get<double>();
  return a;
}

}  // namespace vidscan
