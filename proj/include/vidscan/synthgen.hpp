#pragma once

// Procedural scan videos with exact labels: rendered pages, page turns and
// pans, handheld shake, and the capture hazards.

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "vidscan/framestream.hpp"
#include "vidscan/labelstore.hpp"

namespace vidscan::synth {

enum class CaptureMode { RightOnly, LeftOnly, Both, Panning };

std::string_view mode_name(CaptureMode m);
CaptureMode mode_from_name(std::string_view name);

struct SynthConfig {
  std::uint64_t seed = 0;
  int n_pages = 8;
  double fps = 30.0;
  int width = 240;
  int height = 320;
  int dwell_frames = 45;  // mean steady frames per page, jittered by +-20%
  int turn_frames = 12;
  // Probability per steady segment (per page for graphical/two_pages).
  // Missing names default to 0.
  std::map<std::string, double> hazard_rates = default_hazard_rates();
  CaptureMode mode = CaptureMode::RightOnly;

  static std::map<std::string, double> default_hazard_rates(double rate = 0.3);
  void validate() const;
  double rate(Attr a) const;
};

struct SynthVideo {
  FrameSequence frames;
  AnnotationSet annotations;
};

// Page rectangle and content bounding box, in frame coordinates, inclusive.
struct Box {
  int x0 = 0, y0 = 0, x1 = -1, y1 = -1;
  bool empty() const { return x1 < x0 || y1 < y0; }
  bool contains(int x, int y) const { return x >= x0 && x <= x1 && y >= y0 && y <= y1; }
};

inline constexpr std::uint8_t kDeskLevel = 104;
inline constexpr std::uint8_t kPaperLevel = 232;
inline constexpr std::uint8_t kInkThreshold = 80;  // pixels below this are content

// White page on a desk background with dark text-line bars, or large dark
// shapes when `graphical` is set. Pure function of its arguments.
Frame render_page(std::uint64_t content_seed, int width, int height, bool graphical = false);

// Diagonal wipe from a to b with a darkened fold band at the boundary.
// `from_right` picks the corner the wipe starts from.
Frame animate_turn(const Frame& a, const Frame& b, double t, bool from_right = true);

// Horizontal slide: a leaves to the left while b enters from the right.
Frame animate_pan(const Frame& a, const Frame& b, double t);

// Bounding boxes recovered from pixel levels (paper-white and ink).
Box page_box(const Frame& f);
Box content_box(const Frame& f);

struct HazardResult {
  Frame frame;
  AttributeVector deltas;  // the hazard's own slot set to 1
};

// Applies one hazard with parameters drawn from `rng`. Reusing an rng with
// the same state reproduces the same placement, which the generator uses to
// hold a hazard steady over a block of frames.
HazardResult apply_hazard(const Frame& frame, Attr hazard, std::mt19937_64& rng);

// 5x5 box filter with edge replication, rounded to nearest.
Frame box_blur5(const Frame& f);
Frame translate(const Frame& f, int dx, int dy, std::uint8_t fill = kDeskLevel);

SynthVideo generate_video(const SynthConfig& cfg, const std::string& video_id);

// <dir>/manifest.json, <dir>/annotations.json, <dir>/frames/NNNNNN.pgm
void write_video(const SynthVideo& video, const std::filesystem::path& dir);

struct CorpusEntry {
  std::string video_id;
  std::string split;  // "train" or "heldout"
  SynthConfig config;
};

// Writes every video plus <root>/index.json listing ids, splits, seeds and
// configs. Videos are sorted by id in the index.
void write_corpus(const std::filesystem::path& root, const std::vector<CorpusEntry>& entries);

struct CorpusIndexItem {
  std::string video_id;
  std::string split;
  std::filesystem::path dir;
  SynthConfig config;
};
std::vector<CorpusIndexItem> load_corpus_index(const std::filesystem::path& root);

// Desk-scale corpus: `train` + `heldout` videos with seeds derived from
// `seed`; `base` supplies the shared settings.
std::vector<CorpusEntry> make_corpus_plan(int train, int heldout, std::uint64_t seed, const SynthConfig& base);

std::string config_to_json(const SynthConfig& cfg);
SynthConfig config_from_json(const std::string& text);

}  // namespace vidscan::synth
