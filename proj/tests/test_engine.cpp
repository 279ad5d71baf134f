#include <cstdint>
#include <sstream>

#include "doctest.h"
#include "engine_fuzz.hpp"
#include "vidscan/engine.hpp"
#include "vidscan/evaluator.hpp"
#include "vidscan/synthgen.hpp"

using namespace vidscan;

namespace {

Trace flat_trace(std::vector<double> pce, std::vector<double> cape, std::vector<double> capn) {
  return Trace{std::move(pce), std::move(cape), std::move(capn)};
}


models::PcnConfig tiny_pcn(int n) {
  models::PcnConfig c;
  c.n_frames = n;
  c.input_size = 16;
  c.bottlenecks = 4;
  c.lstm_hidden = 6;
  return c;
}

}  // namespace

TEST_CASE("hysteresis emits start and end at the crossing frames") {
  EngineConfig c;
  c.pce_high = 0.8;
  c.pce_low = 0.3;
  c.laf = 0;
  c.cape_filter = 1.0;
  const auto run = run_trace(c, flat_trace({0.1, 0.9, 0.9, 0.2}, {0, 0, 0, 0}, {0, 0, 0, 0}));
  REQUIRE(run.events.size() == 2);
  CHECK(run.events[0] == EngineEvent{EventKind::PceStart, 1, 0.0});
  CHECK(run.events[1] == EngineEvent{EventKind::PceEnd, 3, 0.0});
}

TEST_CASE("look-ahead shifts event frames back and clamps at zero") {
  EngineConfig c;
  c.laf = 5;
  c.cape_filter = 1.0;
  std::vector<double> pce(20, 0.1);
  pce[2] = 0.9;
  pce[12] = 0.1;
  for (int i = 3; i < 12; ++i) pce[i] = 0.5;
  const auto run = run_trace(c, flat_trace(pce, std::vector<double>(20, 0), std::vector<double>(20, 0)));
  REQUIRE(run.events.size() == 2);
  CHECK(run.events[0].frame == 0);
  CHECK(run.events[1].frame == 7);
}

TEST_CASE("onecap captures the first frame over threshold") {
  EngineConfig c;
  c.cape_filter = 0.0;
  c.policy = Policy::OneCap;
  const auto run = run_trace(c, flat_trace({0, 0, 0}, {1, 1, 1}, {0.4, 0.95, 0.99}));
  REQUIRE(run.events.size() == 1);
  CHECK(run.events[0] == EngineEvent{EventKind::Capture, 1, 0.95});
  CHECK(run.stats.capn_runs == 2);  // stops after the capture
}

TEST_CASE("multicap emits the best frame when the segment closes") {
  EngineConfig c;
  c.cape_filter = 0.0;
  c.policy = Policy::MultiCap;
  c.laf = 0;
  const auto run = run_trace(c, flat_trace({0, 0, 0, 0.95}, {1, 1, 1, 1}, {0.4, 0.95, 0.99, 0.1}));
  REQUIRE(run.events.size() == 2);
  CHECK(run.events[0] == EngineEvent{EventKind::Capture, 2, 0.99});
  CHECK(run.events[1].kind == EventKind::PceStart);
  CHECK(run.stats.capn_runs == 3);
}

TEST_CASE("multicap finalize flushes a pending best") {
  EngineConfig c;
  c.cape_filter = 0.0;
  c.policy = Policy::MultiCap;
  auto pred = std::make_unique<TracePredictor>(flat_trace({0, 0}, {1, 1}, {0.5, 0.95}));
  Engine e(c, std::move(pred));
  CHECK(e.push_frame(Frame()).empty());
  CHECK(e.push_frame(Frame()).empty());
  const auto ev = e.finalize();
  REQUIRE(ev.size() == 1);
  CHECK(ev[0] == EngineEvent{EventKind::Capture, 1, 0.95});
  CHECK_THROWS_AS(e.finalize(), std::logic_error);
  CHECK_THROWS_AS(e.push_frame(Frame()), std::logic_error);
}

TEST_CASE("multicap drops a best frame under threshold") {
  EngineConfig c;
  c.cape_filter = 0.0;
  c.policy = Policy::MultiCap;
  const auto run = run_trace(c, flat_trace({0, 0}, {1, 1}, {0.5, 0.85}));
  CHECK(run.events.empty());
}

TEST_CASE("cape filter gates the capture network") {
  const Trace t = flat_trace({0.1, 0.1, 0.9, 0.9, 0.1, 0.1}, {0.5, 0.5, 0.5, 0.5, 0.5, 0.99}, std::vector<double>(6, 0.2));
  EngineConfig c;
  c.laf = 0;
  c.policy = Policy::MultiCap;
  c.cape_filter = 1.0;
  CHECK(run_trace(c, t).stats.capn_runs == 0);
  c.cape_filter = 0.0;
  CHECK(run_trace(c, t).stats.capn_runs == 4);  // every frame outside the PCE
  c.cape_filter = 0.6;
  CHECK(run_trace(c, t).stats.capn_runs == 1);
}

TEST_CASE("pcn passes are ceil(frames / N) and padded slots are discarded") {
  EngineConfig c;
  c.n_frames = 2;
  c.cape_filter = 0.0;
  c.policy = Policy::MultiCap;
  const auto run = run_trace(c, flat_trace(std::vector<double>(10, 0), std::vector<double>(10, 1), std::vector<double>(10, 0.5)));
  CHECK(run.stats.pcn_passes == 5);
  CHECK(run.stats.frames_seen == 10);
  c.n_frames = 3;
  const auto odd = run_trace(c, flat_trace(std::vector<double>(10, 0), std::vector<double>(10, 1), std::vector<double>(10, 0.5)));
  CHECK(odd.stats.pcn_passes == 4);
  CHECK(odd.stats.frames_seen == 10);
  CHECK(odd.stats.capn_runs == 10);
}

TEST_CASE("empty stream") {
  const auto run = run_trace(EngineConfig{}, Trace{});
  CHECK(run.events.empty());
  CHECK(run.stats == EngineStats{});
  CHECK(run.stats.run_fraction() == 0.0);
}

TEST_CASE("config validation") {
  EngineConfig c;
  c.pce_low = 0.8;
  c.pce_high = 0.7;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = EngineConfig{};
  c.n_frames = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = EngineConfig{};
  c.laf = -1;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = EngineConfig{};
  c.cape_threshold = 1.5;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  CHECK_THROWS_AS(Engine(EngineConfig{}, nullptr), std::invalid_argument);
  CHECK(policy_from_name("multicap") == Policy::MultiCap);
  CHECK(policy_name(Policy::OneCap) == "onecap");
  CHECK_THROWS_AS(policy_from_name("twocap"), std::invalid_argument);
}

TEST_CASE("frames must keep the first frame's shape") {
  Engine e(EngineConfig{}, std::make_unique<TracePredictor>(flat_trace({0}, {0}, {0})));
  e.push_frame(Frame(8, 8));
  CHECK_THROWS_AS(e.push_frame(Frame(8, 9)), std::invalid_argument);
}

TEST_CASE("event log round trip") {
  const std::vector<EngineEvent> ev = {
      {EventKind::PceStart, 3, 0.0}, {EventKind::PceEnd, 9, 0.0}, {EventKind::Capture, 14, 0.9375}};
  const EngineStats st{20, 10, 4};
  std::stringstream ss;
  write_event_log(ss, ev, st);
  const auto log = read_event_log(ss);
  CHECK(log.events == ev);
  REQUIRE(log.stats.has_value());
  CHECK(*log.stats == st);
}

TEST_CASE("malformed event log names the line") {
  std::stringstream ss("{\"kind\":\"pce_start\",\"frame\":1}\n\n{\"kind\":\"capture\",\"frame\":4}\n");
  try {
    read_event_log(ss);
    FAIL("expected an error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  std::stringstream bad("not json\n");
  CHECK_THROWS_AS(read_event_log(bad), std::runtime_error);
  std::stringstream kind("{\"kind\":\"flip\",\"frame\":1}\n");
  CHECK_THROWS_AS(read_event_log(kind), std::runtime_error);
}

TEST_CASE("trace json round trip and validation") {
  const Trace t = flat_trace({0.1, 0.2}, {0.3, 0.4}, {0.5, 0.6});
  const Trace back = trace_from_json(trace_to_json(t));
  CHECK(back.pce == t.pce);
  CHECK(back.pcn_cape == t.pcn_cape);
  CHECK(back.capn == t.capn);
  CHECK_THROWS(trace_from_json(R"({"pce":[0.1],"pcn_cape":[],"capn":[0.2]})"));
  CHECK_THROWS(trace_from_json(R"({"pce":[1.5],"pcn_cape":[0],"capn":[0.2]})"));
}

TEST_CASE("random traces keep the engine invariants") {
  const auto r = testing::fuzz_engine(1500, 42);
  INFO(r.first_failure);
  CHECK(r.failures == 0);
  CHECK(r.traces == 1500);
}

TEST_CASE("multicap run count never rises with the filter") {
  std::mt19937_64 rng(5);
  for (int k = 0; k < 300; ++k) {
    EngineConfig c = testing::random_config(rng);
    c.policy = Policy::MultiCap;
    const Trace t = testing::random_trace(rng);
    std::int64_t prev = -1;
    for (double f : {0.0, 0.2, 0.4, 0.6, 0.8, 1.0}) {
      c.cape_filter = f;
      const auto runs = run_trace(c, t).stats.capn_runs;
      if (prev >= 0) CHECK(runs <= prev);
      prev = runs;
    }
  }
}

TEST_CASE("onecap capture count never rises with the filter") {
  // Run counts can rise for OneCap: an early capture stops CapN for the
  // rest of the segment. Capture counts cannot.
  std::mt19937_64 rng(6);
  for (int k = 0; k < 300; ++k) {
    EngineConfig c = testing::random_config(rng);
    c.policy = Policy::OneCap;
    const Trace t = testing::random_trace(rng);
    std::size_t prev = SIZE_MAX;
    for (double f : {0.0, 0.2, 0.4, 0.6, 0.8, 1.0}) {
      c.cape_filter = f;
      const auto caps = capture_frames(run_trace(c, t).events).size();
      CHECK(caps <= prev);
      prev = caps;
    }
  }
  EngineConfig c;
  c.policy = Policy::OneCap;
  const Trace t{{0, 0, 0, 0}, {0.1, 0.9, 0.9, 0.9}, {0.95, 0.5, 0.5, 0.5}};
  c.cape_filter = 0.0;
  CHECK(run_trace(c, t).stats.capn_runs == 1);
  c.cape_filter = 0.6;
  CHECK(run_trace(c, t).stats.capn_runs == 3);
}

TEST_CASE("model predictor streams and replays through a recorded trace") {
  nn::Rng rng(11);
  const auto pcn_cfg = tiny_pcn(2);
  models::CapnConfig capn_cfg;
  capn_cfg.input_size = 32;
  auto pcn = std::make_shared<const nn::ParamStore>(models::build_pcn<float>(pcn_cfg, rng));
  auto capn = std::make_shared<const nn::ParamStore>(models::build_capn<float>(capn_cfg, rng));

  synth::SynthConfig sc;
  sc.width = 64;
  sc.height = 48;
  sc.n_pages = 2;
  sc.dwell_frames = 10;
  sc.seed = 3;
  const auto video = synth::generate_video(sc, "v");

  EngineConfig c;
  c.n_frames = 2;
  c.policy = Policy::MultiCap;
  c.cape_filter = 0.0;
  c.cape_threshold = 0.0;
  ModelPredictor inner(pcn, pcn_cfg, capn, capn_cfg);
  auto rec = std::make_unique<RecordingPredictor>(inner);
  RecordingPredictor* recp = rec.get();
  Engine live(c, std::move(rec));
  std::vector<EngineEvent> events;
  for (const auto& f : video.frames.frames) {
    auto ev = live.push_frame(f);
    events.insert(events.end(), ev.begin(), ev.end());
  }
  auto ev = live.finalize();
  events.insert(events.end(), ev.begin(), ev.end());
  CHECK(live.stats().pcn_passes == static_cast<std::int64_t>((video.frames.size() + 1) / 2));

  const Trace t = recp->trace(live.stats().frames_seen);
  const auto replay = run_trace(c, t);
  CHECK(replay.events == events);
  CHECK(replay.stats == live.stats());

  // Streaming slot outputs equal one batch pass over the whole video.
  std::vector<Frame> boxed;
  for (const auto& f : video.frames.frames) boxed.push_back(letterbox_resize(f, 16, 16));
  std::vector<const Frame*> ptrs;
  for (const auto& f : boxed) ptrs.push_back(&f);
  auto state = models::pcn_initial_state<float>(pcn_cfg);
  const auto out = models::pcn_forward(*pcn, pcn_cfg, models::pcn_input<float>(ptrs, pcn_cfg), state);
  double worst = 0;
  for (std::size_t i = 0; i < t.size(); ++i)
    worst = std::max(worst, std::abs(t.pce[i] - nn::sigmoid(double(out.pce_logits[i]))));
  CHECK(worst < 1e-5);
}

TEST_CASE("adapter score is an affine map of the hazard slots") {
  LinearAdapter a;
  a.bias = 0.25;
  a.weights[3] = 0.5;
  AttrValues v{};
  v[3] = 0.5f;
  v[9] = 1.0f;  // ignored
  CHECK(a.score(v) == doctest::Approx(0.5));
}
