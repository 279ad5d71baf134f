#pragma once

// Real-time decision core. The PCN runs on every frame (N frames per pass);
// hysteresis on its PCE output splits the stream into page segments, and the
// CapN runs only on frames outside a PCE whose PCN capture score passes the
// filter. OneCap captures the first frame that clears the capture threshold
// in each segment; MultiCap keeps the best one and emits it when the segment
// closes.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "vidscan/framestream.hpp"
#include "vidscan/labelstore.hpp"
#include "vidscan/models/capn.hpp"
#include "vidscan/models/pcn.hpp"

namespace vidscan {

enum class Policy { OneCap, MultiCap };

std::string_view policy_name(Policy p);
Policy policy_from_name(std::string_view name);  // "onecap" | "multicap"

struct EngineConfig {
  double pce_high = 0.7;
  double pce_low = 0.3;
  double cape_filter = 0.6;
  double cape_threshold = 0.9;
  Policy policy = Policy::OneCap;
  int n_frames = 1;
  int laf = 5;

  void validate() const;  // throws std::invalid_argument
};

enum class EventKind { PceStart, PceEnd, Capture };

std::string_view event_kind_name(EventKind k);  // "pce_start" | "pce_end" | "capture"

struct EngineEvent {
  EventKind kind = EventKind::Capture;
  std::int64_t frame = 0;
  double score = 0.0;  // Capture only

  friend bool operator==(const EngineEvent&, const EngineEvent&) = default;
};

struct EngineStats {
  std::int64_t frames_seen = 0;
  std::int64_t pcn_passes = 0;
  std::int64_t capn_runs = 0;

  double run_fraction() const { return frames_seen == 0 ? 0.0 : static_cast<double>(capn_runs) / frames_seen; }
  friend bool operator==(const EngineStats&, const EngineStats&) = default;
};

struct PcnSlot {
  double pce = 0.0;   // PCE probability
  double cape = 0.0;  // PCN overall capture probability
};

// What the engine needs from the two networks. Implementations hold any
// streaming state (the PCN's LSTM state).
class Predictor {
 public:
  virtual ~Predictor() = default;
  // One PCN pass over exactly N frames; `first_index` is the stream index of
  // frames[0]. Returns N slots.
  virtual std::vector<PcnSlot> pcn_step(const std::vector<const Frame*>& frames, std::int64_t first_index) = 0;
  // CapN capture score for one frame.
  virtual double capn_score(const Frame& frame, std::int64_t index) = 0;
};

// Affine score over the nine attribute probabilities (overall slot
// excluded).
struct LinearAdapter {
  std::array<double, kHazardCount> weights{};
  double bias = 0.0;

  double score(const AttrValues& attrs) const;
};

// Runs the real networks. Parameters are shared read-only between engines.
class ModelPredictor : public Predictor {
 public:
  ModelPredictor(std::shared_ptr<const nn::ParamStore> pcn, models::PcnConfig pcn_cfg,
                 std::shared_ptr<const nn::ParamStore> capn, models::CapnConfig capn_cfg,
                 std::optional<LinearAdapter> adapter = std::nullopt);

  std::vector<PcnSlot> pcn_step(const std::vector<const Frame*>& frames, std::int64_t first_index) override;
  double capn_score(const Frame& frame, std::int64_t index) override;

  // Full CapN attribute probabilities, as used by capn_score.
  AttrValues capn_attributes(const Frame& frame) const;

 private:
  std::shared_ptr<const nn::ParamStore> pcn_;
  models::PcnConfig pcn_cfg_;
  std::shared_ptr<const nn::ParamStore> capn_;
  models::CapnConfig capn_cfg_;
  std::optional<LinearAdapter> adapter_;
  std::vector<nn::LstmState<float>> state_;
};

// Per-frame probability trace. Frames are ignored; indices past the end
// reuse the last value.
struct Trace {
  std::vector<double> pce;
  std::vector<double> pcn_cape;
  std::vector<double> capn;

  std::size_t size() const { return pce.size(); }
  void validate() const;  // equal lengths, values in [0,1]
};

std::string trace_to_json(const Trace& t);
Trace trace_from_json(std::string_view text);

class TracePredictor : public Predictor {
 public:
  explicit TracePredictor(Trace trace, int n_frames = 1);
  std::vector<PcnSlot> pcn_step(const std::vector<const Frame*>& frames, std::int64_t first_index) override;
  double capn_score(const Frame& frame, std::int64_t index) override;
  std::int64_t capn_calls() const { return capn_calls_; }

 private:
  Trace trace_;
  int n_;
  std::int64_t capn_calls_ = 0;
};

// Records every PCN output and every CapN score it computes while
// delegating to another predictor. The result replays the same run through a
// TracePredictor; frames whose CapN score was never needed are filled with
// `fill_capn` (use fill_capn_scores to compute them all).
class RecordingPredictor : public Predictor {
 public:
  explicit RecordingPredictor(Predictor& inner) : inner_(inner) {}
  std::vector<PcnSlot> pcn_step(const std::vector<const Frame*>& frames, std::int64_t first_index) override;
  double capn_score(const Frame& frame, std::int64_t index) override;
  Trace trace(std::int64_t frames_seen, double fill_capn = 0.0) const;

 private:
  Predictor& inner_;
  std::vector<PcnSlot> slots_;
  std::vector<std::optional<double>> capn_;
};

class Engine {
 public:
  Engine(EngineConfig cfg, std::unique_ptr<Predictor> predictor);

  std::vector<EngineEvent> push_frame(const Frame& frame);
  std::vector<EngineEvent> finalize();

  const EngineStats& stats() const { return stats_; }
  const EngineConfig& config() const { return cfg_; }
  bool in_pce() const { return in_pce_; }
  bool finalized() const { return finalized_; }
  Predictor& predictor() { return *predictor_; }

 private:
  void run_step(std::vector<EngineEvent>& out, int real_slots);
  void process_slot(std::vector<EngineEvent>& out, std::int64_t index, const PcnSlot& slot, const Frame& frame);
  void close_segment(std::vector<EngineEvent>& out);

  EngineConfig cfg_;
  std::unique_ptr<Predictor> predictor_;
  EngineStats stats_;
  std::vector<Frame> buffer_;
  std::int64_t next_index_ = 0;
  int width_ = -1, height_ = -1;
  bool in_pce_ = false;
  bool finalized_ = false;
  // current segment (open while !in_pce_)
  bool captured_ = false;
  std::int64_t best_frame_ = -1;
  double best_score_ = -1.0;
};

// Runs a whole trace through an engine with a TracePredictor.
struct EngineRun {
  std::vector<EngineEvent> events;
  EngineStats stats;
};
EngineRun run_trace(const EngineConfig& cfg, const Trace& trace);

// Newline-delimited JSON event log with a trailing stats record.
void write_event_log(std::ostream& out, const std::vector<EngineEvent>& events, const EngineStats& stats);

struct EventLog {
  std::vector<EngineEvent> events;
  std::optional<EngineStats> stats;
};
// Throws std::runtime_error naming the 1-based line of a malformed record.
EventLog read_event_log(std::istream& in);

}  // namespace vidscan
