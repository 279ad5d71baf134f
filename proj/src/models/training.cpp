#include "vidscan/models/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "vidscan/nn/loss.hpp"

namespace vidscan::models {

using nlohmann::json;
using nn::Tensor;

namespace {

constexpr int kMicroBatch = 4;

void scale_grads(ParamStore& ps, double k) {
  for (auto& p : ps.params())
    for (auto& g : p.grad.values()) g = static_cast<float>(g * k);
}

void copy_values(const ParamStore& from, ParamStore& to) {
  for (std::size_t i = 0; i < from.params().size(); ++i) to.params()[i].value = from.params()[i].value;
}

struct CapnBatchTensors {
  Tensor x, target, mask;
};

CapnBatchTensors capn_batch(const std::vector<const CapnExample*>& items, const CapnConfig& cfg) {
  std::vector<const Frame*> frames;
  for (const auto* e : items) frames.push_back(&e->image);
  CapnBatchTensors b{capn_input<float>(frames, cfg), Tensor({static_cast<int>(items.size()), cfg.attr_dim}),
                     Tensor({static_cast<int>(items.size()), cfg.attr_dim})};
  for (std::size_t i = 0; i < items.size(); ++i)
    for (int a = 0; a < cfg.attr_dim; ++a) {
      b.target[i * cfg.attr_dim + a] = items[i]->target[static_cast<std::size_t>(a)];
      b.mask[i * cfg.attr_dim + a] = items[i]->mask[static_cast<std::size_t>(a)];
    }
  return b;
}

std::size_t masked_count(const Tensor& mask) {
  return static_cast<std::size_t>(std::count_if(mask.values().begin(), mask.values().end(), [](float m) { return m != 0.0f; }));
}

}  // namespace

double clip_grad_norm(ParamStore& ps, double max_norm) {
  double sq = 0.0;
  for (const auto& p : ps.params())
    for (float g : p.grad.values()) sq += static_cast<double>(g) * g;
  const double norm = std::sqrt(sq);
  if (max_norm > 0 && norm > max_norm) scale_grads(ps, max_norm / norm);
  return norm;
}

// ---------------------------------------------------------------------------
// CapN

CapnExample make_capn_example(const Frame& frame, const AttributeVector& labels, const CapnConfig& cfg) {
  CapnExample e;
  e.image = (frame.width == cfg.input_size && frame.height == cfg.input_size)
                ? frame
                : letterbox_resize(frame, cfg.input_size, cfg.input_size);
  for (std::size_t a = 0; a < kAttrCount; ++a) {
    if (!labels.values[a]) continue;
    e.target[a] = *labels.values[a];
    e.mask[a] = 1;
  }
  return e;
}

std::vector<std::size_t> select_capn_frames(const AnnotationSet& set, std::size_t frame_count, int per_video,
                                            std::mt19937_64& rng) {
  std::vector<std::size_t> inside, outside;
  for (const auto& [idx, labels] : set.attribute_labels) {
    if (idx < 0 || static_cast<std::size_t>(idx) >= frame_count || !labels.any_present()) continue;
    const bool in = std::any_of(set.capture_ranges.begin(), set.capture_ranges.end(),
                                [&](const FrameRange& r) { return idx >= r.first && idx <= r.second; });
    (in ? inside : outside).push_back(static_cast<std::size_t>(idx));
  }
  std::shuffle(inside.begin(), inside.end(), rng);
  std::shuffle(outside.begin(), outside.end(), rng);
  const std::size_t want = static_cast<std::size_t>(std::max(per_video, 0));
  std::size_t take_in = std::min(inside.size(), want / 2);
  const std::size_t take_out = std::min(outside.size(), want - take_in);
  take_in = std::min(inside.size(), want - take_out);
  std::vector<std::size_t> out(inside.begin(), inside.begin() + static_cast<std::ptrdiff_t>(take_in));
  out.insert(out.end(), outside.begin(), outside.begin() + static_cast<std::ptrdiff_t>(take_out));
  std::sort(out.begin(), out.end());
  return out;
}

double capn_loss(const ParamStore& ps, const CapnConfig& cfg, const std::vector<CapnExample>& examples) {
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < examples.size(); i += kMicroBatch) {
    std::vector<const CapnExample*> items;
    for (std::size_t j = i; j < std::min(examples.size(), i + kMicroBatch); ++j) items.push_back(&examples[j]);
    const auto b = capn_batch(items, cfg);
    const std::size_t n = masked_count(b.mask);
    if (n == 0) continue;
    sum += nn::masked_weighted_bce_logits(capn_forward_logits(ps, cfg, b.x), b.target, b.mask, 1.0) * n;
    count += n;
  }
  return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

CapnTrainResult train_capn(const std::vector<CapnExample>& train, const std::vector<CapnExample>& val,
                           const CapnConfig& cfg, const CapnTrainOptions& opt) {
  if (train.empty()) throw std::invalid_argument("train_capn: empty dataset");
  if (opt.epochs < 0 || opt.batch_size < 1) throw std::invalid_argument("train_capn: invalid options");
  std::mt19937_64 rng(opt.seed);
  CapnTrainResult result{build_capn<float>(cfg, rng), {}};
  ParamStore& ps = result.params;
  ParamStore best = ps;
  double best_val = val.empty() ? 0.0 : capn_loss(ps, cfg, val);
  const nn::AdamOptions adam{opt.lr};

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_sum = 0.0;
    std::size_t epoch_count = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(opt.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(opt.batch_size));
      // Count labeled entries first so micro-batch gradients combine into
      // the mean over the whole batch.
      std::size_t labeled = 0;
      for (std::size_t k = start; k < end; ++k)
        for (auto m : train[order[k]].mask) labeled += m;
      if (labeled == 0) continue;
      ps.zero_grad();
      for (std::size_t m0 = start; m0 < end; m0 += kMicroBatch) {
        std::vector<const CapnExample*> items;
        for (std::size_t k = m0; k < std::min(end, m0 + kMicroBatch); ++k) items.push_back(&train[order[k]]);
        const auto b = capn_batch(items, cfg);
        const std::size_t n = masked_count(b.mask);
        if (n == 0) continue;
        CapnCache<float> cache;
        const Tensor logits = capn_forward_logits(ps, cfg, b.x, &cache);
        Tensor d;
        const double loss = nn::masked_weighted_bce_logits(logits, b.target, b.mask, 1.0, &d);
        // the loss is a mean over this micro-batch; reweight to the batch mean
        const double w = static_cast<double>(n) / static_cast<double>(labeled);
        for (auto& g : d.values()) g = static_cast<float>(g * w);
        capn_backward(ps, cfg, cache, d);
        epoch_sum += loss * static_cast<double>(n);
        epoch_count += n;
      }
      clip_grad_norm(ps, opt.clip_norm);
      nn::adam_step(ps, adam);
    }
    const double train_loss = epoch_count == 0 ? 0.0 : epoch_sum / static_cast<double>(epoch_count);
    result.log.train_loss.push_back(train_loss);
    double val_loss = train_loss;
    if (!val.empty()) {
      val_loss = capn_loss(ps, cfg, val);
      result.log.val_loss.push_back(val_loss);
      if (val_loss < best_val) {
        best_val = val_loss;
        result.log.best_epoch = epoch;
        copy_values(ps, best);
      }
    } else {
      result.log.best_epoch = epoch;
    }
    if (opt.on_epoch) opt.on_epoch(epoch, train_loss, val_loss);
  }
  if (!val.empty()) copy_values(best, ps);
  return result;
}

std::vector<AttrValues> capn_probabilities(const ParamStore& ps, const CapnConfig& cfg,
                                           const std::vector<const Frame*>& frames) {
  std::vector<AttrValues> out;
  out.reserve(frames.size());
  for (std::size_t i = 0; i < frames.size(); i += kMicroBatch) {
    std::vector<Frame> boxed;
    for (std::size_t j = i; j < std::min(frames.size(), i + kMicroBatch); ++j) {
      const Frame& f = *frames[j];
      boxed.push_back(f.width == cfg.input_size && f.height == cfg.input_size
                          ? f
                          : letterbox_resize(f, cfg.input_size, cfg.input_size));
    }
    std::vector<const Frame*> ptrs;
    for (const auto& f : boxed) ptrs.push_back(&f);
    const Tensor probs = nn::sigmoid(capn_forward_logits(ps, cfg, capn_input<float>(ptrs, cfg)));
    for (std::size_t b = 0; b < boxed.size(); ++b) {
      AttrValues v{};
      for (int a = 0; a < std::min(cfg.attr_dim, kAttrCount); ++a)
        v[static_cast<std::size_t>(a)] = probs[b * cfg.attr_dim + a];
      out.push_back(v);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Distillation

std::vector<AttrValues> distill_video(const ParamStore& capn, const CapnConfig& cfg, const FrameSequence& frames) {
  std::vector<const Frame*> ptrs;
  for (const auto& f : frames.frames) ptrs.push_back(&f);
  return capn_probabilities(capn, cfg, ptrs);
}

std::string soft_labels_to_json(const SoftLabelSet& set) {
  json doc = json::object();
  for (const auto& [id, frames] : set) {
    json arr = json::array();
    for (const auto& v : frames) arr.push_back(std::vector<float>(v.begin(), v.end()));
    doc[id] = std::move(arr);
  }
  return doc.dump();
}

SoftLabelSet soft_labels_from_json(std::string_view text) {
  const json doc = json::parse(text);
  if (!doc.is_object()) throw std::invalid_argument("soft labels: expected an object of video ids");
  SoftLabelSet set;
  for (const auto& [id, arr] : doc.items()) {
    if (!arr.is_array()) throw std::invalid_argument("soft labels: " + id + " is not an array");
    auto& frames = set[id];
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const auto& row = arr[i];
      if (!row.is_array() || row.size() != kAttrCount)
        throw std::invalid_argument("soft labels: " + id + "[" + std::to_string(i) + "] must hold 10 values");
      AttrValues v{};
      for (std::size_t a = 0; a < kAttrCount; ++a) {
        const double x = row[a].get<double>();
        if (!(x >= 0.0 && x <= 1.0))
          throw std::invalid_argument("soft labels: " + id + "[" + std::to_string(i) + "] outside [0,1]");
        v[a] = static_cast<float>(x);
      }
      frames.push_back(v);
    }
  }
  return set;
}

void save_soft_labels(const SoftLabelSet& set, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write soft labels: " + path.string());
  out << soft_labels_to_json(set) << '\n';
}

SoftLabelSet load_soft_labels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("soft labels not found: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return soft_labels_from_json(ss.str());
}

// ---------------------------------------------------------------------------
// PCN

PcnVideo make_pcn_video(const std::string& video_id, const FrameSequence& frames, const AnnotationSet& annotations,
                        int input_size) {
  PcnVideo v{video_id, frames.fps, {}, annotations};
  v.frames.reserve(frames.size());
  for (const auto& f : frames.frames) v.frames.push_back(letterbox_resize(f, input_size, input_size));
  return v;
}

PcnBatch make_pcn_batch(const PcnVideo& video, const std::vector<AttrValues>& soft, const PcnConfig& cfg,
                        const PcnTrainOptions& opt, std::mt19937_64& rng) {
  if (soft.size() != video.frames.size())
    throw std::invalid_argument("soft labels for " + video.video_id + " cover " + std::to_string(soft.size()) +
                                " frames, video has " + std::to_string(video.frames.size()));
  const AugmentOptions aug = opt.augment ? AugmentOptions::random(rng) : AugmentOptions::identity(video.fps);
  const auto index_map = resample_indices(video.frames.size(), video.fps, aug.target_fps);
  const AnnotationSet remapped = remap_labels(video.annotations, index_map);
  std::vector<AttrValues> soft_remapped(index_map.size());
  for (std::size_t j = 0; j < index_map.size(); ++j) soft_remapped[j] = soft[index_map[j]];
  const TargetTensor targets = build_targets(remapped, index_map.size(), opt.pce_pad, cfg.laf, &soft_remapped);
  const auto window = static_cast<std::size_t>(opt.window);
  const bool from_start = std::bernoulli_distribution(opt.start_prob)(rng);
  const Window w = sample_window(from_start ? std::min(index_map.size(), window) : index_map.size(), window, rng);
  const int burn_in = w.start > 0 ? opt.burn_in : 0;

  const int n = cfg.n_frames, a_dim = cfg.attr_dim;
  const int len = static_cast<int>(w.indices.size());
  const int steps = (len + n - 1) / n;
  std::vector<Frame> frames;
  frames.reserve(static_cast<std::size_t>(steps * n));
  for (int t = 0; t < steps * n; ++t) {
    const std::size_t j = w.indices[static_cast<std::size_t>(std::min(t, len - 1))];
    frames.push_back(augment_frame(video.frames[index_map[j]], aug));
  }
  std::vector<const Frame*> ptrs;
  for (const auto& f : frames) ptrs.push_back(&f);

  PcnBatch b{pcn_input<float>(ptrs, cfg), Tensor({steps, n}), Tensor({steps, n}), Tensor({steps, n * a_dim}),
             Tensor({steps, n * a_dim})};
  for (int t = 0; t < len; ++t) {
    if (!w.valid[static_cast<std::size_t>(t)] || t < burn_in) continue;
    const std::size_t j = w.indices[static_cast<std::size_t>(t)];
    b.pce_target[static_cast<std::size_t>(t)] = targets.pce[j];
    b.pce_mask[static_cast<std::size_t>(t)] = targets.pce_mask[j];
    for (int a = 0; a < std::min(a_dim, kAttrCount); ++a) {
      const std::size_t k = static_cast<std::size_t>(t) * a_dim + a;
      b.attr_target[k] = targets.attrs[j][static_cast<std::size_t>(a)];
      b.attr_mask[k] = targets.attr_mask[j][static_cast<std::size_t>(a)];
    }
  }
  return b;
}

double pcn_batch_loss(ParamStore& ps, const PcnConfig& cfg, const PcnBatch& batch, bool backward) {
  auto state = pcn_initial_state<float>(cfg);
  PcnCache<float> cache;
  const auto out = pcn_forward(ps, cfg, batch.x, state, backward ? &cache : nullptr);
  Tensor d_pce, d_attr;
  const double loss =
      nn::masked_weighted_bce_logits(out.pce_logits, batch.pce_target, batch.pce_mask, cfg.pce_pos_weight, &d_pce) +
      nn::masked_weighted_bce_logits(out.attr_logits, batch.attr_target, batch.attr_mask, 1.0, &d_attr);
  if (backward) pcn_backward(ps, cfg, cache, d_pce, d_attr);
  return loss;
}

PcnTrainResult train_pcn(const std::vector<PcnVideo>& videos, const SoftLabelSet& soft, const PcnConfig& cfg,
                         const PcnTrainOptions& opt) {
  cfg.validate();
  if (videos.empty()) throw std::invalid_argument("train_pcn: empty corpus");
  if (opt.epochs < 0 || opt.windows_per_epoch < 1 || opt.windows_per_step < 1 || opt.window < 1 ||
      !(opt.start_prob >= 0.0 && opt.start_prob <= 1.0) || opt.burn_in < 0)
    throw std::invalid_argument("train_pcn: invalid options");
  std::vector<const std::vector<AttrValues>*> video_soft;
  for (const auto& v : videos) {
    const auto it = soft.find(v.video_id);
    if (it == soft.end()) throw std::invalid_argument("soft labels missing for video " + v.video_id);
    if (it->second.size() != v.frames.size())
      throw std::invalid_argument("soft labels for " + v.video_id + " cover " + std::to_string(it->second.size()) +
                                  " frames, video has " + std::to_string(v.frames.size()));
    video_soft.push_back(&it->second);
  }
  std::mt19937_64 rng(opt.seed);
  PcnTrainResult result{build_pcn<float>(cfg, rng), {}};
  ParamStore& ps = result.params;
  const nn::AdamOptions adam{opt.lr};
  std::uniform_int_distribution<std::size_t> pick(0, videos.size() - 1);
  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    double sum = 0.0;
    for (int w = 0; w < opt.windows_per_epoch; w += opt.windows_per_step) {
      const int group = std::min(opt.windows_per_step, opt.windows_per_epoch - w);
      ps.zero_grad();
      for (int g = 0; g < group; ++g) {
        const std::size_t vi = pick(rng);
        const PcnBatch batch = make_pcn_batch(videos[vi], *video_soft[vi], cfg, opt, rng);
        sum += pcn_batch_loss(ps, cfg, batch, true);
      }
      if (group > 1) scale_grads(ps, 1.0 / group);
      clip_grad_norm(ps, opt.clip_norm);
      nn::adam_step(ps, adam);
    }
    const double loss = sum / opt.windows_per_epoch;
    result.log.train_loss.push_back(loss);
    result.log.best_epoch = epoch;
    if (opt.on_epoch) opt.on_epoch(epoch, loss);
  }
  return result;
}

}  // namespace vidscan::models
