#include "vidscan/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <stdexcept>

namespace vidscan::pipeline {

VideoSet synthetic_set(const std::vector<synth::CorpusEntry>& entries, const std::string& split) {
  auto kept = std::make_shared<std::vector<synth::CorpusEntry>>();
  for (const auto& e : entries)
    if (split.empty() || e.split == split) kept->push_back(e);
  VideoSet set;
  for (const auto& e : *kept) set.ids.push_back(e.video_id);
  set.load = [kept](std::size_t i) {
    const auto& e = kept->at(i);
    auto v = synth::generate_video(e.config, e.video_id);
    return LabeledVideo{e.video_id, std::move(v.frames), std::move(v.annotations)};
  };
  return set;
}

VideoSet corpus_set(const std::filesystem::path& root, const std::string& split) {
  auto items = std::make_shared<std::vector<synth::CorpusIndexItem>>();
  for (auto& item : synth::load_corpus_index(root))
    if (split.empty() || item.split == split) items->push_back(std::move(item));
  VideoSet set;
  for (const auto& item : *items) set.ids.push_back(item.video_id);
  set.load = [items](std::size_t i) {
    const auto& item = items->at(i);
    const FrameManifest m = load_manifest(item.dir / "manifest.json");
    return LabeledVideo{item.video_id, load_frames(m), load_annotations(item.dir / "annotations.json")};
  };
  return set;
}

CapnData collect_capn_examples(const VideoSet& set, const models::CapnConfig& cfg, int per_video, int val_every,
                               std::uint64_t seed) {
  CapnData out;
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < set.size(); ++i) {
    const LabeledVideo v = set.load(i);
    const bool val = val_every > 0 && i % static_cast<std::size_t>(val_every) == static_cast<std::size_t>(val_every - 1);
    for (std::size_t f : models::select_capn_frames(v.annotations, v.frames.size(), per_video, rng))
      (val ? out.val : out.train)
          .push_back(models::make_capn_example(v.frames.frames[f], v.annotations.attribute_labels.at(static_cast<FrameIndex>(f)), cfg));
  }
  return out;
}

models::SoftLabelSet distill_set(const VideoSet& set, const nn::ParamStore& capn, const models::CapnConfig& cfg) {
  models::SoftLabelSet out;
  for (std::size_t i = 0; i < set.size(); ++i) {
    const LabeledVideo v = set.load(i);
    out[v.video_id] = models::distill_video(capn, cfg, v.frames);
  }
  return out;
}

std::vector<models::PcnVideo> pcn_videos(const VideoSet& set, int input_size) {
  std::vector<models::PcnVideo> out;
  for (std::size_t i = 0; i < set.size(); ++i) {
    const LabeledVideo v = set.load(i);
    out.push_back(models::make_pcn_video(v.video_id, v.frames, v.annotations, input_size));
  }
  return out;
}

std::vector<AdapterSample> adapter_samples(const VideoSet& set, const nn::ParamStore& capn,
                                           const models::CapnConfig& cfg) {
  std::vector<AdapterSample> out;
  for (std::size_t i = 0; i < set.size(); ++i) {
    const LabeledVideo v = set.load(i);
    const auto probs = models::distill_video(capn, cfg, v.frames);
    for (std::size_t f = 0; f < probs.size(); ++f) {
      const auto idx = static_cast<FrameIndex>(f);
      const bool in = std::any_of(v.annotations.capture_ranges.begin(), v.annotations.capture_ranges.end(),
                                  [&](const FrameRange& r) { return idx >= r.first && idx <= r.second; });
      out.push_back({v.video_id, probs[f], in ? 1.0 : 0.0});
    }
  }
  return out;
}

Trace full_trace(const std::shared_ptr<const nn::ParamStore>& pcn, const models::PcnConfig& pcn_cfg,
                 const std::shared_ptr<const nn::ParamStore>& capn, const models::CapnConfig& capn_cfg,
                 const FrameSequence& frames, const std::optional<LinearAdapter>& adapter) {
  ModelPredictor pred(pcn, pcn_cfg, capn, capn_cfg, adapter);
  Trace t;
  const std::size_t n = static_cast<std::size_t>(pcn_cfg.n_frames);
  for (std::size_t i = 0; i < frames.size(); i += n) {
    std::vector<const Frame*> ptrs;
    for (std::size_t k = 0; k < n; ++k) ptrs.push_back(&frames.frames[std::min(i + k, frames.size() - 1)]);
    const auto slots = pred.pcn_step(ptrs, static_cast<std::int64_t>(i));
    for (std::size_t k = 0; k < n && i + k < frames.size(); ++k) {
      t.pce.push_back(std::clamp(slots[k].pce, 0.0, 1.0));
      t.pcn_cape.push_back(std::clamp(slots[k].cape, 0.0, 1.0));
    }
  }
  const auto probs = models::distill_video(*capn, capn_cfg, frames);
  for (const auto& p : probs)
    t.capn.push_back(std::clamp(adapter ? adapter->score(p) : static_cast<double>(p[slot(Attr::OverallCape)]), 0.0, 1.0));
  return t;
}

std::vector<TracedVideo> trace_set(const VideoSet& set, const std::shared_ptr<const nn::ParamStore>& pcn,
                                   const models::PcnConfig& pcn_cfg, const std::shared_ptr<const nn::ParamStore>& capn,
                                   const models::CapnConfig& capn_cfg) {
  std::vector<TracedVideo> out;
  for (std::size_t i = 0; i < set.size(); ++i) {
    LabeledVideo v = set.load(i);
    out.push_back({v.video_id, full_trace(pcn, pcn_cfg, capn, capn_cfg, v.frames), std::move(v.annotations)});
  }
  return out;
}

EngineRun run_engine(const EngineConfig& cfg, const std::shared_ptr<const nn::ParamStore>& pcn,
                     const models::PcnConfig& pcn_cfg, const std::shared_ptr<const nn::ParamStore>& capn,
                     const models::CapnConfig& capn_cfg, const FrameSequence& frames,
                     const std::optional<LinearAdapter>& adapter) {
  if (cfg.n_frames != pcn_cfg.n_frames) throw std::invalid_argument("engine and PCN disagree on frames per pass");
  Engine engine(cfg, std::make_unique<ModelPredictor>(pcn, pcn_cfg, capn, capn_cfg, adapter));
  EngineRun run;
  for (const auto& f : frames.frames) {
    auto ev = engine.push_frame(f);
    run.events.insert(run.events.end(), ev.begin(), ev.end());
  }
  auto ev = engine.finalize();
  run.events.insert(run.events.end(), ev.begin(), ev.end());
  run.stats = engine.stats();
  return run;
}

LatencyStats summarize_latency(std::vector<double> ms, int frames_per_pass) {
  if (ms.empty()) throw std::invalid_argument("no latency samples");
  LatencyStats s;
  s.iters = static_cast<int>(ms.size());
  s.frames_per_pass = frames_per_pass;
  std::sort(ms.begin(), ms.end());
  double sum = 0;
  for (double v : ms) sum += v;
  s.mean_ms = sum / static_cast<double>(ms.size());
  const std::size_t n = ms.size();
  s.median_ms = n % 2 ? ms[n / 2] : 0.5 * (ms[n / 2 - 1] + ms[n / 2]);
  s.p95_ms = ms[std::min(n - 1, static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(n))) - 1)];
  s.effective_fps = s.mean_ms > 0 ? frames_per_pass * 1000.0 / s.mean_ms : 0.0;
  return s;
}

namespace {

template <class Fn>
std::vector<double> time_passes(int iters, int warmup, Fn&& pass) {
  if (iters < 1) throw std::invalid_argument("iters must be >= 1");
  for (int i = 0; i < warmup; ++i) pass();
  std::vector<double> ms;
  for (int i = 0; i < iters; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    pass();
    ms.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
  }
  return ms;
}

}  // namespace

LatencyStats bench_pcn(const nn::ParamStore& ps, const models::PcnConfig& cfg, int iters, int warmup,
                       std::uint64_t seed) {
  nn::Rng rng(seed);
  const auto x = nn::uniform_tensor<float>({1, cfg.input_size, cfg.input_size, cfg.n_frames}, 0.0, 1.0, rng);
  auto state = models::pcn_initial_state<float>(cfg);
  auto ms = time_passes(iters, warmup, [&] { models::pcn_forward(ps, cfg, x, state); });
  return summarize_latency(std::move(ms), cfg.n_frames);
}

LatencyStats bench_capn(const nn::ParamStore& ps, const models::CapnConfig& cfg, int iters, int warmup,
                        std::uint64_t seed) {
  nn::Rng rng(seed);
  const auto x = nn::uniform_tensor<float>({1, cfg.input_size, cfg.input_size, 1}, 0.0, 1.0, rng);
  auto ms = time_passes(iters, warmup, [&] { models::capn_forward_logits(ps, cfg, x); });
  return summarize_latency(std::move(ms), 1);
}

}  // namespace vidscan::pipeline
