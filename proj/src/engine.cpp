#include "vidscan/engine.hpp"

#include <algorithm>
#include <istream>
#include <ostream>

#include "json.hpp"

namespace vidscan {

using nlohmann::json;

std::string_view policy_name(Policy p) { return p == Policy::OneCap ? "onecap" : "multicap"; }

Policy policy_from_name(std::string_view name) {
  if (name == "onecap") return Policy::OneCap;
  if (name == "multicap") return Policy::MultiCap;
  throw std::invalid_argument("unknown policy: " + std::string(name) + " (expected onecap or multicap)");
}

void EngineConfig::validate() const {
  const auto unit = [](double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument(std::string(name) + " must be in [0,1]");
  };
  unit(pce_high, "pce_high");
  unit(pce_low, "pce_low");
  unit(cape_filter, "cape_filter");
  unit(cape_threshold, "cape_threshold");
  if (pce_low > pce_high) throw std::invalid_argument("pce_low must not exceed pce_high");
  if (n_frames < 1) throw std::invalid_argument("n_frames must be >= 1");
  if (laf < 0) throw std::invalid_argument("laf must be >= 0");
}

std::string_view event_kind_name(EventKind k) {
  switch (k) {
    case EventKind::PceStart: return "pce_start";
    case EventKind::PceEnd: return "pce_end";
    case EventKind::Capture: return "capture";
  }
  return "capture";
}

double LinearAdapter::score(const AttrValues& attrs) const {
  double s = bias;
  for (std::size_t i = 0; i < weights.size(); ++i) s += weights[i] * attrs[i];
  return s;
}

// ---------------------------------------------------------------------------
// Predictors

ModelPredictor::ModelPredictor(std::shared_ptr<const nn::ParamStore> pcn, models::PcnConfig pcn_cfg,
                               std::shared_ptr<const nn::ParamStore> capn, models::CapnConfig capn_cfg,
                               std::optional<LinearAdapter> adapter)
    : pcn_(std::move(pcn)),
      pcn_cfg_(pcn_cfg),
      capn_(std::move(capn)),
      capn_cfg_(capn_cfg),
      adapter_(adapter),
      state_(models::pcn_initial_state<float>(pcn_cfg)) {
  if (!pcn_ || !capn_) throw std::invalid_argument("ModelPredictor: both networks are required");
  pcn_cfg_.validate();
  capn_cfg_.validate();
}

std::vector<PcnSlot> ModelPredictor::pcn_step(const std::vector<const Frame*>& frames, std::int64_t) {
  const int n = pcn_cfg_.n_frames, s = pcn_cfg_.input_size;
  if (static_cast<int>(frames.size()) != n)
    throw std::invalid_argument("pcn_step: expected " + std::to_string(n) + " frames");
  std::vector<Frame> boxed;
  boxed.reserve(frames.size());
  for (const Frame* f : frames) boxed.push_back(f->width == s && f->height == s ? *f : letterbox_resize(*f, s, s));
  std::vector<const Frame*> ptrs;
  for (const auto& f : boxed) ptrs.push_back(&f);
  const auto out = models::pcn_forward(*pcn_, pcn_cfg_, models::pcn_input<float>(ptrs, pcn_cfg_), state_);
  const int a = pcn_cfg_.attr_dim;
  std::vector<PcnSlot> slots(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    slots[static_cast<std::size_t>(k)].pce = nn::sigmoid(out.pce_logits[k]);
    slots[static_cast<std::size_t>(k)].cape = nn::sigmoid(out.attr_logits[k * a + slot(Attr::OverallCape)]);
  }
  return slots;
}

AttrValues ModelPredictor::capn_attributes(const Frame& frame) const {
  const int s = capn_cfg_.input_size;
  const Frame boxed = frame.width == s && frame.height == s ? frame : letterbox_resize(frame, s, s);
  const auto logits = models::capn_forward_logits(*capn_, capn_cfg_, models::capn_input<float>({&boxed}, capn_cfg_));
  AttrValues v{};
  for (int i = 0; i < std::min(kAttrCount, capn_cfg_.attr_dim); ++i) v[static_cast<std::size_t>(i)] = nn::sigmoid(logits[i]);
  return v;
}

double ModelPredictor::capn_score(const Frame& frame, std::int64_t) {
  const AttrValues v = capn_attributes(frame);
  return adapter_ ? adapter_->score(v) : v[slot(Attr::OverallCape)];
}

void Trace::validate() const {
  if (pcn_cape.size() != pce.size() || capn.size() != pce.size())
    throw std::invalid_argument("trace: pce, pcn_cape and capn must have equal lengths");
  for (const auto* v : {&pce, &pcn_cape, &capn})
    for (double x : *v)
      if (!(x >= 0.0 && x <= 1.0)) throw std::invalid_argument("trace: probabilities must be in [0,1]");
}

std::string trace_to_json(const Trace& t) {
  return json{{"pce", t.pce}, {"pcn_cape", t.pcn_cape}, {"capn", t.capn}}.dump();
}

Trace trace_from_json(std::string_view text) {
  const json doc = json::parse(text);
  Trace t{doc.at("pce").get<std::vector<double>>(), doc.at("pcn_cape").get<std::vector<double>>(),
          doc.at("capn").get<std::vector<double>>()};
  t.validate();
  return t;
}

TracePredictor::TracePredictor(Trace trace, int n_frames) : trace_(std::move(trace)), n_(n_frames) {
  trace_.validate();
  if (n_ < 1) throw std::invalid_argument("TracePredictor: n_frames must be >= 1");
}

namespace {
double at_or_last(const std::vector<double>& v, std::int64_t i) {
  if (v.empty()) return 0.0;
  return v[static_cast<std::size_t>(std::clamp<std::int64_t>(i, 0, static_cast<std::int64_t>(v.size()) - 1))];
}
}  // namespace

std::vector<PcnSlot> TracePredictor::pcn_step(const std::vector<const Frame*>& frames, std::int64_t first_index) {
  if (static_cast<int>(frames.size()) != n_) throw std::invalid_argument("pcn_step: wrong frame count");
  std::vector<PcnSlot> slots;
  for (int k = 0; k < n_; ++k) slots.push_back({at_or_last(trace_.pce, first_index + k), at_or_last(trace_.pcn_cape, first_index + k)});
  return slots;
}

double TracePredictor::capn_score(const Frame&, std::int64_t index) {
  ++capn_calls_;
  return at_or_last(trace_.capn, index);
}

std::vector<PcnSlot> RecordingPredictor::pcn_step(const std::vector<const Frame*>& frames, std::int64_t first_index) {
  auto slots = inner_.pcn_step(frames, first_index);
  if (static_cast<std::size_t>(first_index) != slots_.size())
    throw std::logic_error("RecordingPredictor: steps must arrive in stream order");
  slots_.insert(slots_.end(), slots.begin(), slots.end());
  return slots;
}

double RecordingPredictor::capn_score(const Frame& frame, std::int64_t index) {
  const double s = inner_.capn_score(frame, index);
  if (capn_.size() <= static_cast<std::size_t>(index)) capn_.resize(static_cast<std::size_t>(index) + 1);
  capn_[static_cast<std::size_t>(index)] = s;
  return s;
}

Trace RecordingPredictor::trace(std::int64_t frames_seen, double fill_capn) const {
  Trace t;
  for (std::int64_t i = 0; i < frames_seen && static_cast<std::size_t>(i) < slots_.size(); ++i) {
    t.pce.push_back(slots_[static_cast<std::size_t>(i)].pce);
    t.pcn_cape.push_back(slots_[static_cast<std::size_t>(i)].cape);
    const auto& c = static_cast<std::size_t>(i) < capn_.size() ? capn_[static_cast<std::size_t>(i)] : std::nullopt;
    t.capn.push_back(c ? std::clamp(*c, 0.0, 1.0) : fill_capn);
  }
  return t;
}

// ---------------------------------------------------------------------------
// Engine

Engine::Engine(EngineConfig cfg, std::unique_ptr<Predictor> predictor) : cfg_(cfg), predictor_(std::move(predictor)) {
  cfg_.validate();
  if (!predictor_) throw std::invalid_argument("Engine: predictor required");
}

std::vector<EngineEvent> Engine::push_frame(const Frame& frame) {
  if (finalized_) throw std::logic_error("engine already finalized");
  if (width_ < 0) {
    width_ = frame.width;
    height_ = frame.height;
  } else if (frame.width != width_ || frame.height != height_) {
    throw std::invalid_argument("frame " + std::to_string(next_index_ + static_cast<std::int64_t>(buffer_.size())) +
                                " is " + std::to_string(frame.width) + "x" + std::to_string(frame.height) +
                                ", stream is " + std::to_string(width_) + "x" + std::to_string(height_));
  }
  std::vector<EngineEvent> out;
  buffer_.push_back(frame);
  if (static_cast<int>(buffer_.size()) == cfg_.n_frames) run_step(out, cfg_.n_frames);
  return out;
}

std::vector<EngineEvent> Engine::finalize() {
  if (finalized_) throw std::logic_error("engine already finalized");
  finalized_ = true;
  std::vector<EngineEvent> out;
  if (!buffer_.empty()) run_step(out, static_cast<int>(buffer_.size()));
  if (!in_pce_) close_segment(out);
  return out;
}

void Engine::run_step(std::vector<EngineEvent>& out, int real_slots) {
  std::vector<const Frame*> ptrs;
  for (int k = 0; k < cfg_.n_frames; ++k)
    ptrs.push_back(&buffer_[static_cast<std::size_t>(std::min(k, static_cast<int>(buffer_.size()) - 1))]);
  const auto slots = predictor_->pcn_step(ptrs, next_index_);
  if (static_cast<int>(slots.size()) != cfg_.n_frames) throw std::logic_error("predictor returned wrong slot count");
  ++stats_.pcn_passes;
  for (int k = 0; k < real_slots; ++k) {
    ++stats_.frames_seen;
    process_slot(out, next_index_ + k, slots[static_cast<std::size_t>(k)], buffer_[static_cast<std::size_t>(k)]);
  }
  next_index_ += real_slots;
  buffer_.clear();
}

void Engine::process_slot(std::vector<EngineEvent>& out, std::int64_t index, const PcnSlot& s, const Frame& frame) {
  const std::int64_t pce_frame = std::max<std::int64_t>(0, index - cfg_.laf);
  if (!in_pce_ && s.pce >= cfg_.pce_high) {
    close_segment(out);
    out.push_back({EventKind::PceStart, pce_frame, 0.0});
    in_pce_ = true;
    return;
  }
  if (in_pce_) {
    if (s.pce > cfg_.pce_low) return;
    out.push_back({EventKind::PceEnd, pce_frame, 0.0});
    in_pce_ = false;
  }
  if (cfg_.policy == Policy::OneCap && captured_) return;
  if (s.cape < cfg_.cape_filter) return;
  const double score = predictor_->capn_score(frame, index);
  ++stats_.capn_runs;
  if (cfg_.policy == Policy::OneCap) {
    if (score >= cfg_.cape_threshold) {
      out.push_back({EventKind::Capture, index, score});
      captured_ = true;
    }
  } else if (score > best_score_) {
    best_score_ = score;
    best_frame_ = index;
  }
}

void Engine::close_segment(std::vector<EngineEvent>& out) {
  if (cfg_.policy == Policy::MultiCap && best_frame_ >= 0 && best_score_ >= cfg_.cape_threshold)
    out.push_back({EventKind::Capture, best_frame_, best_score_});
  captured_ = false;
  best_frame_ = -1;
  best_score_ = -1.0;
}

EngineRun run_trace(const EngineConfig& cfg, const Trace& trace) {
  Engine engine(cfg, std::make_unique<TracePredictor>(trace, cfg.n_frames));
  EngineRun run;
  const Frame blank;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    auto ev = engine.push_frame(blank);
    run.events.insert(run.events.end(), ev.begin(), ev.end());
  }
  auto ev = engine.finalize();
  run.events.insert(run.events.end(), ev.begin(), ev.end());
  run.stats = engine.stats();
  return run;
}

// ---------------------------------------------------------------------------
// Event log

void write_event_log(std::ostream& out, const std::vector<EngineEvent>& events, const EngineStats& stats) {
  for (const auto& e : events) {
    json rec{{"kind", std::string(event_kind_name(e.kind))}, {"frame", e.frame}};
    if (e.kind == EventKind::Capture) rec["score"] = e.score;
    out << rec.dump() << '\n';
  }
  out << json{{"kind", "stats"},
              {"frames_seen", stats.frames_seen},
              {"pcn_passes", stats.pcn_passes},
              {"capn_runs", stats.capn_runs}}
             .dump()
      << '\n';
}

EventLog read_event_log(std::istream& in) {
  EventLog log;
  std::string line;
  for (int n = 1; std::getline(in, line); ++n) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json rec = json::parse(line);
      const std::string kind = rec.at("kind").get<std::string>();
      if (kind == "stats") {
        log.stats = EngineStats{rec.at("frames_seen").get<std::int64_t>(), rec.at("pcn_passes").get<std::int64_t>(),
                                rec.at("capn_runs").get<std::int64_t>()};
        continue;
      }
      EngineEvent e;
      if (kind == "pce_start")
        e.kind = EventKind::PceStart;
      else if (kind == "pce_end")
        e.kind = EventKind::PceEnd;
      else if (kind == "capture")
        e.kind = EventKind::Capture;
      else
        throw std::invalid_argument("unknown kind " + kind);
      e.frame = rec.at("frame").get<std::int64_t>();
      if (e.frame < 0) throw std::invalid_argument("negative frame");
      if (e.kind == EventKind::Capture) e.score = rec.at("score").get<double>();
      log.events.push_back(e);
    } catch (const std::exception& ex) {
      throw std::runtime_error("event log line " + std::to_string(n) + ": " + ex.what());
    }
  }
  return log;
}

}  // namespace vidscan
