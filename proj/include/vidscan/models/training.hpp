#pragma once

// Training loops for both networks and the distillation step that links
// them: CapN learns the sparse human attribute labels, its outputs on every
// frame become soft labels, and the PCN learns PCE targets plus those soft
// labels.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "vidscan/labelstore.hpp"
#include "vidscan/models/capn.hpp"
#include "vidscan/models/pcn.hpp"

namespace vidscan::models {

using nn::ParamStore;

// ---------------------------------------------------------------------------
// Shared

struct TrainLog {
  std::vector<double> train_loss;  // mean per epoch
  std::vector<double> val_loss;    // empty when there is no validation set
  int best_epoch = -1;             // -1: initial weights were kept
};

// Scales every gradient so the global L2 norm is at most `max_norm`.
// Returns the norm before clipping.
double clip_grad_norm(ParamStore& ps, double max_norm);

// ---------------------------------------------------------------------------
// CapN

struct CapnExample {
  Frame image;  // letterboxed to input_size x input_size
  AttrValues target{};
  std::array<std::uint8_t, kAttrCount> mask{};
};

CapnExample make_capn_example(const Frame& frame, const AttributeVector& labels, const CapnConfig& cfg);

// Frame indices to train CapN on: up to `per_video` labeled frames, half
// drawn from capture ranges and half from the rest, without replacement.
std::vector<std::size_t> select_capn_frames(const AnnotationSet& set, std::size_t frame_count, int per_video,
                                            std::mt19937_64& rng);

struct CapnTrainOptions {
  int epochs = 10;
  int batch_size = 8;  // split internally into micro-batches of at most 4
  double lr = 1e-3;
  double clip_norm = 5.0;
  std::uint64_t seed = 0;
  std::function<void(int epoch, double train_loss, double val_loss)> on_epoch;
};

struct CapnTrainResult {
  ParamStore params;
  TrainLog log;
};

// Masked BCE (pos_weight 1) on the sparse labels. Returns the weights with
// the lowest validation loss, or the last epoch's when `val` is empty.
CapnTrainResult train_capn(const std::vector<CapnExample>& train, const std::vector<CapnExample>& val,
                           const CapnConfig& cfg, const CapnTrainOptions& opt);

// Mean masked BCE of the model over a set of examples.
double capn_loss(const ParamStore& ps, const CapnConfig& cfg, const std::vector<CapnExample>& examples);

// Sigmoid outputs for each frame (letterboxed internally).
std::vector<AttrValues> capn_probabilities(const ParamStore& ps, const CapnConfig& cfg,
                                           const std::vector<const Frame*>& frames);

// ---------------------------------------------------------------------------
// Distillation

// video_id -> one 10-vector per frame.
using SoftLabelSet = std::map<std::string, std::vector<AttrValues>>;

std::vector<AttrValues> distill_video(const ParamStore& capn, const CapnConfig& cfg, const FrameSequence& frames);

std::string soft_labels_to_json(const SoftLabelSet& set);
SoftLabelSet soft_labels_from_json(std::string_view text);
void save_soft_labels(const SoftLabelSet& set, const std::filesystem::path& path);
SoftLabelSet load_soft_labels(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// PCN

struct PcnVideo {
  std::string video_id;
  double fps = 30.0;
  std::vector<Frame> frames;  // letterboxed to the PCN input size
  AnnotationSet annotations;
};

PcnVideo make_pcn_video(const std::string& video_id, const FrameSequence& frames, const AnnotationSet& annotations,
                        int input_size);

struct PcnTrainOptions {
  int epochs = 10;
  int windows_per_epoch = 64;
  int windows_per_step = 1;  // gradient accumulation
  int window = 128;
  int pce_pad = 4;
  // A live stream is cold only at its first frame. This share of windows
  // starts there; the rest start anywhere and drop the loss on their first
  // `burn_in` frames, where the zero state does not match a stream start.
  double start_prob = 0.25;
  int burn_in = 8;
  double lr = 1e-3;
  double clip_norm = 5.0;
  bool augment = true;  // fps jitter plus rotations and flips
  std::uint64_t seed = 0;
  std::function<void(int epoch, double loss)> on_epoch;
};

struct PcnTrainResult {
  ParamStore params;
  TrainLog log;
};

// One training window after resampling, augmentation and target building,
// grouped into N-frame steps. Exposed for tests.
struct PcnBatch {
  nn::Tensor x;  // [S, size, size, N]
  nn::Tensor pce_target, pce_mask;    // [S, N]
  nn::Tensor attr_target, attr_mask;  // [S, N * attr_dim]
};

PcnBatch make_pcn_batch(const PcnVideo& video, const std::vector<AttrValues>& soft, const PcnConfig& cfg,
                        const PcnTrainOptions& opt, std::mt19937_64& rng);

// Loss and gradient for one batch; gradients accumulate into `ps`.
double pcn_batch_loss(ParamStore& ps, const PcnConfig& cfg, const PcnBatch& batch, bool backward);

// Throws std::invalid_argument when a video has no soft labels or their
// count differs from its frame count.
PcnTrainResult train_pcn(const std::vector<PcnVideo>& videos, const SoftLabelSet& soft, const PcnConfig& cfg,
                         const PcnTrainOptions& opt);

}  // namespace vidscan::models
