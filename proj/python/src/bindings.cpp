#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "vidscan/engine.hpp"
#include "vidscan/evaluator.hpp"
#include "vidscan/framestream.hpp"
#include "vidscan/labelstore.hpp"
#include "vidscan/models/capn.hpp"
#include "vidscan/models/pcn.hpp"
#include "vidscan/synthgen.hpp"

namespace py = pybind11;
using namespace vidscan;

namespace {

py::array_t<std::uint8_t> frame_array(const Frame& f) {
  py::array_t<std::uint8_t> a({f.height, f.width});
  std::copy(f.pixels.begin(), f.pixels.end(), a.mutable_data());
  return a;
}

Frame array_frame(const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2) throw std::invalid_argument("frame must be a 2-D uint8 array");
  Frame f(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)));
  std::copy_n(a.data(), f.pixels.size(), f.pixels.begin());
  return f;
}

py::array_t<std::uint8_t> frames_array(const FrameSequence& seq) {
  if (seq.frames.empty()) return py::array_t<std::uint8_t>(std::vector<py::ssize_t>{0, 0, 0});
  const auto& f0 = seq.frames.front();
  py::array_t<std::uint8_t> a({static_cast<py::ssize_t>(seq.size()), static_cast<py::ssize_t>(f0.height),
                               static_cast<py::ssize_t>(f0.width)});
  auto* out = a.mutable_data();
  for (const auto& f : seq.frames) out = std::copy(f.pixels.begin(), f.pixels.end(), out);
  return a;
}

template <class T>
std::int64_t param_count(const T& cfg) {
  nn::Rng rng(0);
  if constexpr (std::is_same_v<T, models::PcnConfig>)
    return static_cast<std::int64_t>(models::build_pcn<float>(cfg, rng).parameter_count());
  else
    return static_cast<std::int64_t>(models::build_capn<float>(cfg, rng).parameter_count());
}

}  // namespace

PYBIND11_MODULE(_vidscan, m) {
  m.doc() = "Streaming document-scan capture engine";
  m.attr("__version__") = "0.1.0";

  py::enum_<Policy>(m, "Policy").value("OneCap", Policy::OneCap).value("MultiCap", Policy::MultiCap);
  py::enum_<EventKind>(m, "EventKind")
      .value("PceStart", EventKind::PceStart)
      .value("PceEnd", EventKind::PceEnd)
      .value("Capture", EventKind::Capture);

  py::class_<EngineConfig>(m, "EngineConfig")
      .def(py::init<>())
      .def_readwrite("pce_high", &EngineConfig::pce_high)
      .def_readwrite("pce_low", &EngineConfig::pce_low)
      .def_readwrite("cape_filter", &EngineConfig::cape_filter)
      .def_readwrite("cape_threshold", &EngineConfig::cape_threshold)
      .def_readwrite("policy", &EngineConfig::policy)
      .def_readwrite("n_frames", &EngineConfig::n_frames)
      .def_readwrite("laf", &EngineConfig::laf)
      .def("validate", &EngineConfig::validate);

  py::class_<EngineEvent>(m, "EngineEvent")
      .def_readonly("kind", &EngineEvent::kind)
      .def_readonly("frame", &EngineEvent::frame)
      .def_readonly("score", &EngineEvent::score)
      .def("__eq__", [](const EngineEvent& a, const EngineEvent& b) { return a == b; })
      .def("__repr__", [](const EngineEvent& e) {
        std::ostringstream s;
        s << "EngineEvent(" << event_kind_name(e.kind) << ", " << e.frame << ", " << e.score << ")";
        return s.str();
      });

  py::class_<EngineStats>(m, "EngineStats")
      .def_readonly("frames_seen", &EngineStats::frames_seen)
      .def_readonly("pcn_passes", &EngineStats::pcn_passes)
      .def_readonly("capn_runs", &EngineStats::capn_runs)
      .def_property_readonly("run_fraction", &EngineStats::run_fraction);

  py::class_<Trace>(m, "Trace")
      .def(py::init([](std::vector<double> pce, std::vector<double> cape, std::vector<double> capn) {
             Trace t{std::move(pce), std::move(cape), std::move(capn)};
             t.validate();
             return t;
           }),
           py::arg("pce"), py::arg("pcn_cape"), py::arg("capn"))
      .def_readonly("pce", &Trace::pce)
      .def_readonly("pcn_cape", &Trace::pcn_cape)
      .def_readonly("capn", &Trace::capn)
      .def("__len__", &Trace::size)
      .def("to_json", [](const Trace& t) { return trace_to_json(t); })
      .def_static("from_json", [](const std::string& s) { return trace_from_json(s); });

  m.def(
      "run_trace",
      [](const EngineConfig& cfg, const Trace& t) {
        auto r = run_trace(cfg, t);
        return py::make_tuple(r.events, r.stats);
      },
      "Run the engine over a probability trace; returns (events, stats).", py::arg("config"), py::arg("trace"));

  py::class_<Prf>(m, "Prf")
      .def_readonly("p", &Prf::p)
      .def_readonly("r", &Prf::r)
      .def_readonly("f1", &Prf::f1);
  m.def("prf", py::overload_cast<std::int64_t, std::int64_t, std::int64_t>(&prf), py::arg("tp"), py::arg("fp"),
        py::arg("fn"));
  m.def(
      "match_captures",
      [](const std::vector<FrameIndex>& captures, const std::vector<FrameRange>& ranges) {
        const auto mt = match_captures(captures, ranges);
        return py::make_tuple(mt.counts.tp, mt.counts.fp, mt.counts.fn);
      },
      "Greedy matching of capture frames to inclusive ranges; returns (tp, fp, fn).", py::arg("captures"),
      py::arg("ranges"));

  py::class_<LinearAdapter>(m, "LinearAdapter")
      .def_readonly("weights", &LinearAdapter::weights)
      .def_readonly("bias", &LinearAdapter::bias)
      .def("score", &LinearAdapter::score);
  m.def(
      "fit_adapter_folds",
      [](const std::vector<std::string>& video_ids, const std::vector<AttrValues>& attrs,
         const std::vector<double>& labels, int folds) {
        if (video_ids.size() != attrs.size() || attrs.size() != labels.size())
          throw std::invalid_argument("video_ids, attrs and labels differ in length");
        std::vector<AdapterSample> s;
        for (std::size_t i = 0; i < attrs.size(); ++i) s.push_back({video_ids[i], attrs[i], labels[i]});
        const auto f = fit_adapter_folds(s, folds);
        return py::make_tuple(f.adapters, f.fold_of);
      },
      "Per-fold adapters grouped by video; returns (adapters, fold_of).", py::arg("video_ids"), py::arg("attrs"),
      py::arg("labels"), py::arg("folds") = 5);

  m.def("read_pgm", [](const std::string& path) { return frame_array(read_pgm(path)); });
  m.def("write_pgm", [](const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& a,
                        const std::string& path) { write_pgm(array_frame(a), path); });
  m.def("letterbox", [](const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& a, int w,
                        int h) { return frame_array(letterbox_resize(array_frame(a), w, h)); });

  m.def(
      "synth_video",
      [](std::uint64_t seed, int pages, int width, int height, int dwell, int turn, const std::string& mode) {
        synth::SynthConfig c;
        c.seed = seed;
        c.n_pages = pages;
        c.width = width;
        c.height = height;
        c.dwell_frames = dwell;
        c.turn_frames = turn;
        c.mode = synth::mode_from_name(mode);
        c.validate();
        const auto v = synth::generate_video(c, "video");
        return py::make_tuple(frames_array(v.frames), annotations_to_json(v.annotations));
      },
      "Synthetic video; returns (frames[T,H,W] uint8, annotation JSON).", py::arg("seed"), py::arg("pages") = 3,
      py::arg("width") = 96, py::arg("height") = 128, py::arg("dwell") = 20, py::arg("turn") = 8,
      py::arg("mode") = "right-only");
  m.def("normalize_annotations",
        [](const std::string& json) { return annotations_to_json(annotations_from_json(json)); });

  m.def(
      "pcn_param_count",
      [](int n_frames) {
        models::PcnConfig c;
        c.n_frames = n_frames;
        return param_count(c);
      },
      py::arg("n_frames") = 1);
  m.def("capn_param_count", [] { return param_count(models::CapnConfig{}); });
}
