#pragma once

// Glue between corpora and the training, distillation and tracing steps.
// Videos are loaded one at a time through a VideoSet so full-resolution
// frames never all sit in memory at once.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "vidscan/engine.hpp"
#include "vidscan/evaluator.hpp"
#include "vidscan/models/training.hpp"
#include "vidscan/synthgen.hpp"

namespace vidscan::pipeline {

struct LabeledVideo {
  std::string video_id;
  FrameSequence frames;
  AnnotationSet annotations;
};

struct VideoSet {
  std::vector<std::string> ids;
  std::function<LabeledVideo(std::size_t)> load;  // i-th video, by position in ids

  std::size_t size() const { return ids.size(); }
};

// Generated on demand from plan entries of the given split ("" keeps all).
VideoSet synthetic_set(const std::vector<synth::CorpusEntry>& entries, const std::string& split = "");

// Read from a corpus written by synth::write_corpus.
VideoSet corpus_set(const std::filesystem::path& root, const std::string& split = "");

struct CapnData {
  std::vector<models::CapnExample> train;
  std::vector<models::CapnExample> val;
};

// `per_video` sampled labeled frames from each video; every `val_every`-th
// video (0: none) goes to the validation split.
CapnData collect_capn_examples(const VideoSet& set, const models::CapnConfig& cfg, int per_video, int val_every,
                               std::uint64_t seed);

models::SoftLabelSet distill_set(const VideoSet& set, const nn::ParamStore& capn, const models::CapnConfig& cfg);

std::vector<models::PcnVideo> pcn_videos(const VideoSet& set, int input_size);

// Attribute probabilities of every frame, for adapter fitting.
std::vector<AdapterSample> adapter_samples(const VideoSet& set, const nn::ParamStore& capn,
                                           const models::CapnConfig& cfg);

// Per-frame engine inputs for a whole video: streamed PCN outputs in the
// engine's N-frame layout and the CapN score of every frame. Replaying the
// trace with run_trace gives the same events as a live engine.
Trace full_trace(const std::shared_ptr<const nn::ParamStore>& pcn, const models::PcnConfig& pcn_cfg,
                 const std::shared_ptr<const nn::ParamStore>& capn, const models::CapnConfig& capn_cfg,
                 const FrameSequence& frames, const std::optional<LinearAdapter>& adapter = std::nullopt);

std::vector<TracedVideo> trace_set(const VideoSet& set, const std::shared_ptr<const nn::ParamStore>& pcn,
                                   const models::PcnConfig& pcn_cfg, const std::shared_ptr<const nn::ParamStore>& capn,
                                   const models::CapnConfig& capn_cfg);

// Live engine over frames.
EngineRun run_engine(const EngineConfig& cfg, const std::shared_ptr<const nn::ParamStore>& pcn,
                     const models::PcnConfig& pcn_cfg, const std::shared_ptr<const nn::ParamStore>& capn,
                     const models::CapnConfig& capn_cfg, const FrameSequence& frames,
                     const std::optional<LinearAdapter>& adapter = std::nullopt);

struct LatencyStats {
  int iters = 0;
  double mean_ms = 0, median_ms = 0, p95_ms = 0;
  double frames_per_pass = 1;
  double effective_fps = 0;  // frames_per_pass * 1000 / mean_ms
};

// Summary of per-pass wall times in milliseconds. Throws on an empty list.
LatencyStats summarize_latency(std::vector<double> ms, int frames_per_pass);

// Times single forward passes on random inputs at the configured shapes:
// one streaming PCN step (N frames) or one CapN image. Throws
// std::invalid_argument when iters < 1.
LatencyStats bench_pcn(const nn::ParamStore& ps, const models::PcnConfig& cfg, int iters, int warmup = 3,
                       std::uint64_t seed = 0);
LatencyStats bench_capn(const nn::ParamStore& ps, const models::CapnConfig& cfg, int iters, int warmup = 1,
                        std::uint64_t seed = 0);

}  // namespace vidscan::pipeline
