// scancli: generate corpora, train and distill the two networks, stream
// videos through the engine, and score or sweep the results.
//
// Exit codes: 0 ok, 1 usage, 2 data, 3 numeric failure.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "vidscan/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace vidscan;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Runs a validation step, reporting std::invalid_argument as a usage error.
template <class F>
auto usage_checked(F&& f) {
  try {
    return f();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

void check_finite(double v, const std::string& what) {
  if (!std::isfinite(v)) throw NumericError(what + " is not finite");
}

// Every option of the subcommand as given or defaulted.
void write_config_echo(const CLI::App& sub, const fs::path& output) {
  json doc{{"subcommand", sub.get_name()}};
  for (const CLI::Option* opt : sub.get_options()) {
    if (opt->get_name() == "--help") continue;
    const auto& res = opt->results();
    std::string name = opt->get_name();
    while (!name.empty() && name.front() == '-') name.erase(name.begin());
    if (res.empty())
      doc["options"][name] = opt->get_default_str();
    else if (res.size() == 1)
      doc["options"][name] = res.front();
    else
      doc["options"][name] = res;
  }
  fs::path echo = output;
  echo += ".config.json";
  if (!output.parent_path().empty()) fs::create_directories(output.parent_path());
  std::ofstream(echo) << doc.dump(2) << '\n';
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& p, const std::string& text) {
  if (!p.parent_path().empty()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
}

// Parameter names and shapes must match a freshly built network.
template <class Build>
nn::ParamStore load_checked(const fs::path& path, Build build, const std::string& what) {
  nn::ParamStore ps = nn::load_weights(path);
  nn::Rng rng(0);
  const nn::ParamStore ref = build(rng);
  bool ok = ps.tensor_count() == ref.tensor_count();
  for (const auto& p : ref.params()) ok = ok && ps.contains(p.name) && ps.value(p.name).shape() == p.value.shape();
  if (!ok) throw std::runtime_error(path.string() + " is not a " + what + " weights file for this configuration");
  return ps;
}

// N is the channel count of the stem convolution.
int pcn_frames_in(const fs::path& path) {
  const nn::ParamStore ps = nn::load_weights(path);
  if (!ps.contains("pcn.stem.conv")) throw std::runtime_error(path.string() + " has no PCN stem");
  return ps.value("pcn.stem.conv").dim(2);
}

json loss_log_json(const models::TrainLog& log) {
  return {{"train_loss", log.train_loss}, {"val_loss", log.val_loss}, {"best_epoch", log.best_epoch}};
}

fs::path with_suffix(fs::path p, const std::string& suffix) {
  p += suffix;
  return p;
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  fs::path out;
  int videos = 10, heldout = 0, pages = 8, width = 240, height = 320, dwell = 45, turn = 12;
  std::uint64_t seed = 0;
  std::string mode = "cycle";
  double hazard_rate = 0.3, fps = 30.0;
};

int cmd_synth(const SynthArgs& a, const CLI::App& sub) {
  synth::SynthConfig base;
  base.n_pages = a.pages;
  base.width = a.width;
  base.height = a.height;
  base.dwell_frames = a.dwell;
  base.turn_frames = a.turn;
  base.fps = a.fps;
  base.hazard_rates = synth::SynthConfig::default_hazard_rates(a.hazard_rate);
  usage_checked([&] { base.validate(); });
  auto plan = synth::make_corpus_plan(a.videos, a.heldout, a.seed, base);
  if (a.mode != "cycle") {
    const auto m = usage_checked([&] { return synth::mode_from_name(a.mode); });
    for (auto& e : plan) e.config.mode = m;
  }
  synth::write_corpus(a.out, plan);
  write_config_echo(sub, a.out / "synth");
  std::printf("wrote %zu videos to %s\n", plan.size(), a.out.string().c_str());
  return kOk;
}

struct TrainArgs {
  fs::path corpus, weights, capn, soft_labels;
  int epochs = 10, n_frames = 1, laf = 5, per_video = 10, windows = 64, batch = 8;
  double pos_weight = 10.0, lr = 1e-3;
  std::uint64_t seed = 0;
  std::string split = "train";
};

pipeline::VideoSet training_set(const TrainArgs& a) {
  if (a.epochs < 0) throw UsageError("--epochs must be >= 0");
  auto set = pipeline::corpus_set(a.corpus, a.split);
  if (set.size() == 0) throw std::runtime_error("no '" + a.split + "' videos in " + a.corpus.string());
  return set;
}

int cmd_train_capn(const TrainArgs& a, const CLI::App& sub) {
  const models::CapnConfig cfg;
  const auto set = training_set(a);
  const auto data = pipeline::collect_capn_examples(set, cfg, a.per_video, set.size() >= 10 ? 10 : 0, a.seed);
  if (data.train.empty()) throw std::runtime_error("no labeled frames to train on");
  models::CapnTrainOptions opt;
  opt.epochs = a.epochs;
  opt.batch_size = a.batch;
  opt.lr = a.lr;
  opt.seed = a.seed;
  opt.on_epoch = [](int e, double tl, double vl) {
    check_finite(tl, "training loss");
    std::printf("epoch %d train %.5f val %.5f\n", e, tl, vl);
    std::fflush(stdout);
  };
  const auto res = models::train_capn(data.train, data.val, cfg, opt);
  nn::save_weights(res.params, a.weights);
  write_text(with_suffix(a.weights, ".log.json"), loss_log_json(res.log).dump(2) + "\n");
  write_config_echo(sub, a.weights);
  std::printf("capn: %zu train / %zu val examples, weights %s\n", data.train.size(), data.val.size(),
              a.weights.string().c_str());
  return kOk;
}

int cmd_distill(const TrainArgs& a, const CLI::App& sub) {
  const models::CapnConfig cfg;
  const auto capn = load_checked(a.weights, [&](nn::Rng& r) { return models::build_capn<float>(cfg, r); }, "CapN");
  const auto soft = pipeline::distill_set(training_set(a), capn, cfg);
  for (const auto& [id, frames] : soft)
    for (const auto& v : frames)
      for (float x : v) check_finite(x, "soft label of " + id);
  models::save_soft_labels(soft, a.soft_labels);
  write_config_echo(sub, a.soft_labels);
  std::printf("distilled %zu videos to %s\n", soft.size(), a.soft_labels.string().c_str());
  return kOk;
}

int cmd_train_pcn(const TrainArgs& a, const CLI::App& sub) {
  if (a.soft_labels.empty() || !fs::exists(a.soft_labels))
    throw UsageError("soft labels required: run distill first and pass --soft-labels");
  models::PcnConfig cfg;
  cfg.n_frames = a.n_frames;
  cfg.laf = a.laf;
  cfg.pce_pos_weight = a.pos_weight;
  usage_checked([&] { cfg.validate(); });
  const auto soft = models::load_soft_labels(a.soft_labels);
  const auto videos = pipeline::pcn_videos(training_set(a), cfg.input_size);
  models::PcnTrainOptions opt;
  opt.epochs = a.epochs;
  opt.windows_per_epoch = a.windows;
  opt.lr = a.lr;
  opt.seed = a.seed;
  opt.on_epoch = [](int e, double loss) {
    check_finite(loss, "training loss");
    std::printf("epoch %d loss %.5f\n", e, loss);
    std::fflush(stdout);
  };
  const auto res = models::train_pcn(videos, soft, cfg, opt);
  nn::save_weights(res.params, a.weights);
  write_text(with_suffix(a.weights, ".log.json"), loss_log_json(res.log).dump(2) + "\n");
  write_config_echo(sub, a.weights);
  std::printf("pcn (N=%d, laf=%d): weights %s\n", cfg.n_frames, cfg.laf, a.weights.string().c_str());
  return kOk;
}

struct EngineArgs {
  fs::path pcn, capn, manifest, trace, out, adapter, record_trace;
  std::string policy = "onecap";
  EngineConfig cfg;
};

EngineConfig engine_config(const EngineArgs& a) {
  return usage_checked([&] {
    EngineConfig c = a.cfg;
    c.policy = policy_from_name(a.policy);
    c.validate();
    return c;
  });
}

std::optional<LinearAdapter> load_adapter(const fs::path& p) {
  if (p.empty()) return std::nullopt;
  return adapter_from_json(read_text(p));
}

struct LoadedModels {
  std::shared_ptr<const nn::ParamStore> pcn, capn;
  models::PcnConfig pcn_cfg;
  models::CapnConfig capn_cfg;
};

LoadedModels load_models(const fs::path& pcn, const fs::path& capn, int laf) {
  if (pcn.empty() || capn.empty()) throw UsageError("--pcn and --capn are required");
  LoadedModels m;
  m.pcn_cfg.n_frames = pcn_frames_in(pcn);
  m.pcn_cfg.laf = laf;
  m.pcn = std::make_shared<const nn::ParamStore>(
      load_checked(pcn, [&](nn::Rng& r) { return models::build_pcn<float>(m.pcn_cfg, r); }, "PCN"));
  m.capn = std::make_shared<const nn::ParamStore>(
      load_checked(capn, [&](nn::Rng& r) { return models::build_capn<float>(m.capn_cfg, r); }, "CapN"));
  return m;
}

int cmd_stream(EngineArgs a, const CLI::App& sub) {
  if (a.out.empty()) throw UsageError("--out is required");
  EngineRun run;
  if (!a.trace.empty()) {
    run = run_trace(engine_config(a), trace_from_json(read_text(a.trace)));
  } else {
    if (a.manifest.empty()) throw UsageError("--manifest or --trace is required");
    const auto m = load_models(a.pcn, a.capn, a.cfg.laf);
    a.cfg.n_frames = m.pcn_cfg.n_frames;
    const EngineConfig cfg = engine_config(a);
    const FrameSequence frames = load_frames(load_manifest(a.manifest));
    const auto adapter = load_adapter(a.adapter);
    run = pipeline::run_engine(cfg, m.pcn, m.pcn_cfg, m.capn, m.capn_cfg, frames, adapter);
    if (!a.record_trace.empty())
      write_text(a.record_trace,
                 trace_to_json(pipeline::full_trace(m.pcn, m.pcn_cfg, m.capn, m.capn_cfg, frames, adapter)) + "\n");
  }
  std::ostringstream log;
  write_event_log(log, run.events, run.stats);
  write_text(a.out, log.str());
  write_config_echo(sub, a.out);
  std::printf("%lld frames, %lld PCN passes, %lld CapN runs (%.1f%%), %zu captures\n",
              static_cast<long long>(run.stats.frames_seen), static_cast<long long>(run.stats.pcn_passes),
              static_cast<long long>(run.stats.capn_runs), 100.0 * run.stats.run_fraction(),
              capture_frames(run.events).size());
  return kOk;
}

struct EvalArgs {
  std::vector<fs::path> events, annotations;
  fs::path report;
};

int cmd_eval(const EvalArgs& a, const CLI::App& sub) {
  if (a.events.size() != a.annotations.size())
    throw UsageError("--events and --annotations must be given the same number of times");
  std::vector<VideoResult> results;
  for (std::size_t i = 0; i < a.events.size(); ++i) {
    std::ifstream in(a.events[i]);
    if (!in) throw std::runtime_error("cannot read " + a.events[i].string());
    EventLog log;
    try {
      log = read_event_log(in);
    } catch (const std::exception& e) {
      throw std::runtime_error(a.events[i].string() + ": " + e.what());
    }
    const AnnotationSet ann = load_annotations(a.annotations[i]);
    results.push_back(evaluate_video(ann.video_id, log.events, ann, log.stats.value_or(EngineStats{})));
  }
  std::sort(results.begin(), results.end(), [](const auto& x, const auto& y) { return x.video_id < y.video_id; });
  const CorpusReport r = pool_results(std::move(results));
  write_text(a.report, report_to_json(r) + "\n");
  write_config_echo(sub, a.report);
  std::printf("pooled p %.3f r %.3f f1 %.3f (tp %lld fp %lld fn %lld), CapN run %.2f%%\n", r.pooled.p, r.pooled.r,
              r.pooled.f1, static_cast<long long>(r.pooled_counts.tp), static_cast<long long>(r.pooled_counts.fp),
              static_cast<long long>(r.pooled_counts.fn), r.run_percent);
  return kOk;
}

struct SweepArgs {
  EngineArgs engine;
  fs::path corpus;
  std::string split = "heldout";
  std::vector<fs::path> traces, annotations;
  std::vector<double> grid = {0.0, 0.2, 0.4, 0.6, 0.8};
  std::string policies = "both";
  fs::path out;
};

int cmd_sweep(SweepArgs a, const CLI::App& sub) {
  std::vector<Policy> policies;
  if (a.policies == "both")
    policies = {Policy::OneCap, Policy::MultiCap};
  else
    policies = {usage_checked([&] { return policy_from_name(a.policies); })};
  for (double t : a.grid)
    if (!(t >= 0.0 && t <= 1.0)) throw UsageError("grid values must be in [0,1]");
  std::vector<TracedVideo> videos;
  if (!a.corpus.empty()) {
    const auto m = load_models(a.engine.pcn, a.engine.capn, a.engine.cfg.laf);
    a.engine.cfg.n_frames = m.pcn_cfg.n_frames;
    videos = pipeline::trace_set(pipeline::corpus_set(a.corpus, a.split), m.pcn, m.pcn_cfg, m.capn, m.capn_cfg);
  } else {
    if (a.traces.empty() || a.traces.size() != a.annotations.size())
      throw UsageError("give --corpus with models, or matching --trace and --annotations lists");
    for (std::size_t i = 0; i < a.traces.size(); ++i) {
      AnnotationSet ann = load_annotations(a.annotations[i]);
      videos.push_back({ann.video_id, trace_from_json(read_text(a.traces[i])), std::move(ann)});
    }
  }
  if (videos.empty()) throw std::runtime_error("no videos to sweep");
  std::sort(videos.begin(), videos.end(), [](const auto& x, const auto& y) { return x.video_id < y.video_id; });
  const auto rows = sweep_cape_filter(videos, engine_config(a.engine), a.grid, policies);
  std::ostringstream csv;
  write_sweep_csv(csv, rows);
  if (a.out.empty()) {
    std::cout << csv.str();
  } else {
    write_text(a.out, csv.str());
    write_config_echo(sub, a.out);
    for (const auto& r : rows)
      std::printf("%-8s filter %.2f  run %6.2f%%  f1 %.3f\n", std::string(policy_name(r.policy)).c_str(), r.threshold,
                  r.run_percent, r.prf.f1);
  }
  return kOk;
}

struct BenchArgs {
  std::string model = "pcn";
  fs::path weights;
  int n_frames = 1, iters = 100, warmup = 3;
  std::uint64_t seed = 0;
};

int cmd_bench(const BenchArgs& a) {
  if (a.iters < 1) throw UsageError("--iters must be >= 1");
  nn::Rng rng(a.seed);
  pipeline::LatencyStats s;
  if (a.model == "pcn") {
    models::PcnConfig cfg;
    cfg.n_frames = a.weights.empty() ? a.n_frames : pcn_frames_in(a.weights);
    const auto ps = a.weights.empty()
                        ? models::build_pcn<float>(cfg, rng)
                        : load_checked(a.weights, [&](nn::Rng& r) { return models::build_pcn<float>(cfg, r); }, "PCN");
    s = pipeline::bench_pcn(ps, cfg, a.iters, a.warmup, a.seed);
  } else if (a.model == "capn") {
    const models::CapnConfig cfg;
    const auto ps = a.weights.empty()
                        ? models::build_capn<float>(cfg, rng)
                        : load_checked(a.weights, [&](nn::Rng& r) { return models::build_capn<float>(cfg, r); }, "CapN");
    s = pipeline::bench_capn(ps, cfg, a.iters, a.warmup, a.seed);
  } else {
    throw UsageError("--model must be pcn or capn");
  }
  std::printf("model %s  frames/pass %.0f  iters %d\n", a.model.c_str(), s.frames_per_pass, s.iters);
  std::printf("mean %.3f ms  median %.3f ms  p95 %.3f ms  effective %.1f FPS\n", s.mean_ms, s.median_ms, s.p95_ms,
              s.effective_fps);
  return kOk;
}

void add_engine_flags(CLI::App* sub, EngineArgs& a, bool with_policy = true) {
  sub->add_option("--pcn", a.pcn, "PCN weights");
  sub->add_option("--capn", a.capn, "CapN weights");
  if (with_policy) sub->add_option("--policy", a.policy, "onecap | multicap")->capture_default_str();
  sub->add_option("--pce-high", a.cfg.pce_high, "enter PCE at or above")->capture_default_str();
  sub->add_option("--pce-low", a.cfg.pce_low, "leave PCE at or below")->capture_default_str();
  sub->add_option("--cape-filter", a.cfg.cape_filter, "PCN capture score needed to run CapN")->capture_default_str();
  sub->add_option("--cape-thresh", a.cfg.cape_threshold, "CapN score needed to capture")->capture_default_str();
  sub->add_option("--laf", a.cfg.laf, "look-ahead frames")->capture_default_str();
  sub->add_option("--n-frames", a.cfg.n_frames, "frames per PCN pass (trace mode; read from weights otherwise)")
      ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Streaming document-scan capture: data, training, inference and evaluation"};
  app.require_subcommand(1);

  SynthArgs sa;
  auto* synth_cmd = app.add_subcommand("synth", "generate a labeled synthetic corpus");
  synth_cmd->add_option("--out", sa.out, "corpus directory")->required();
  synth_cmd->add_option("--videos", sa.videos, "training videos")->capture_default_str();
  synth_cmd->add_option("--heldout", sa.heldout, "held-out videos")->capture_default_str();
  synth_cmd->add_option("--pages", sa.pages, "pages per video")->capture_default_str();
  synth_cmd->add_option("--seed", sa.seed, "corpus seed")->capture_default_str();
  synth_cmd->add_option("--mode", sa.mode, "right-only | left-only | both | panning | cycle")->capture_default_str();
  synth_cmd->add_option("--width", sa.width)->capture_default_str();
  synth_cmd->add_option("--height", sa.height)->capture_default_str();
  synth_cmd->add_option("--dwell", sa.dwell, "mean steady frames per page")->capture_default_str();
  synth_cmd->add_option("--turn", sa.turn, "frames per transition")->capture_default_str();
  synth_cmd->add_option("--fps", sa.fps)->capture_default_str();
  synth_cmd->add_option("--hazard-rate", sa.hazard_rate, "rate for every hazard")->capture_default_str();

  TrainArgs ca, da, pa;
  auto* capn_cmd = app.add_subcommand("train-capn", "train the capture network on sparse labels");
  auto* distill_cmd = app.add_subcommand("distill", "write CapN soft labels for every frame");
  auto* pcn_cmd = app.add_subcommand("train-pcn", "train the page-change network on marks and soft labels");
  for (auto [cmd, a] : {std::pair{capn_cmd, &ca}, std::pair{distill_cmd, &da}, std::pair{pcn_cmd, &pa}}) {
    cmd->add_option("--corpus", a->corpus, "corpus directory")->required();
    cmd->add_option("--split", a->split, "corpus split")->capture_default_str();
    cmd->add_option("--seed", a->seed)->capture_default_str();
  }
  capn_cmd->add_option("--weights", ca.weights, "output weights")->required();
  capn_cmd->add_option("--epochs", ca.epochs)->capture_default_str();
  capn_cmd->add_option("--per-video", ca.per_video, "labeled frames sampled per video")->capture_default_str();
  capn_cmd->add_option("--batch", ca.batch)->capture_default_str();
  capn_cmd->add_option("--lr", ca.lr)->capture_default_str();
  distill_cmd->add_option("--weights", da.weights, "CapN weights")->required();
  distill_cmd->add_option("--soft-labels", da.soft_labels, "output soft labels")->required();
  pcn_cmd->add_option("--weights", pa.weights, "output weights")->required();
  pcn_cmd->add_option("--soft-labels", pa.soft_labels, "soft labels from distill");
  pcn_cmd->add_option("--epochs", pa.epochs)->capture_default_str();
  pcn_cmd->add_option("--windows", pa.windows, "training windows per epoch")->capture_default_str();
  pcn_cmd->add_option("--n-frames", pa.n_frames)->capture_default_str();
  pcn_cmd->add_option("--laf", pa.laf)->capture_default_str();
  pcn_cmd->add_option("--pos-weight", pa.pos_weight)->capture_default_str();
  pcn_cmd->add_option("--lr", pa.lr)->capture_default_str();

  EngineArgs ea;
  auto* stream_cmd = app.add_subcommand("stream", "run the engine over a video and write events");
  add_engine_flags(stream_cmd, ea);
  stream_cmd->add_option("--manifest", ea.manifest, "frame manifest");
  stream_cmd->add_option("--trace", ea.trace, "replay a probability trace instead of running models");
  stream_cmd->add_option("--adapter", ea.adapter, "linear adapter JSON replacing the CapN score");
  stream_cmd->add_option("--record-trace", ea.record_trace, "also write the full per-frame trace");
  stream_cmd->add_option("--out", ea.out, "event log (NDJSON)");

  EvalArgs va;
  auto* eval_cmd = app.add_subcommand("eval", "score event logs against annotations");
  eval_cmd->add_option("--events", va.events, "event logs")->required();
  eval_cmd->add_option("--annotations", va.annotations, "annotation files, same order")->required();
  eval_cmd->add_option("--report", va.report, "report JSON")->required();

  SweepArgs wa;
  auto* sweep_cmd = app.add_subcommand("sweep", "sweep the CapN filter threshold");
  add_engine_flags(sweep_cmd, wa.engine, false);
  sweep_cmd->add_option("--corpus", wa.corpus, "corpus to trace with --pcn/--capn");
  sweep_cmd->add_option("--split", wa.split)->capture_default_str();
  sweep_cmd->add_option("--trace", wa.traces, "recorded traces");
  sweep_cmd->add_option("--annotations", wa.annotations, "annotations for each trace");
  sweep_cmd->add_option("--grid", wa.grid, "filter thresholds")->delimiter(',')->capture_default_str();
  sweep_cmd->add_option("--policy", wa.policies, "onecap | multicap | both")->capture_default_str();
  sweep_cmd->add_option("--out", wa.out, "CSV output (stdout when omitted)");

  BenchArgs ba;
  auto* bench_cmd = app.add_subcommand("bench", "per-pass latency of one network");
  bench_cmd->add_option("--model", ba.model, "pcn | capn")->capture_default_str();
  bench_cmd->add_option("--weights", ba.weights, "weights (random init when omitted)");
  bench_cmd->add_option("--n-frames", ba.n_frames)->capture_default_str();
  bench_cmd->add_option("--iters", ba.iters)->capture_default_str();
  bench_cmd->add_option("--warmup", ba.warmup)->capture_default_str();
  bench_cmd->add_option("--seed", ba.seed)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*synth_cmd) return cmd_synth(sa, *synth_cmd);
    if (*capn_cmd) return cmd_train_capn(ca, *capn_cmd);
    if (*distill_cmd) return cmd_distill(da, *distill_cmd);
    if (*pcn_cmd) return cmd_train_pcn(pa, *pcn_cmd);
    if (*stream_cmd) return cmd_stream(ea, *stream_cmd);
    if (*eval_cmd) return cmd_eval(va, *eval_cmd);
    if (*sweep_cmd) return cmd_sweep(wa, *sweep_cmd);
    if (*bench_cmd) return cmd_bench(ba);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return kNumeric;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kData;
  }
  return kUsage;
}
