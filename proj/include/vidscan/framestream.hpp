#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace vidscan {

// 8-bit grayscale image, row-major, top-left origin.
struct Frame {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  Frame() = default;
  Frame(int w, int h, std::uint8_t fill = 0)
      : width(w), height(h), pixels(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {}

  std::uint8_t& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
  bool valid() const { return width > 0 && height > 0 && pixels.size() == static_cast<std::size_t>(width) * height; }

  friend bool operator==(const Frame&, const Frame&) = default;
};

struct FrameSequence {
  double fps = 30.0;
  std::vector<Frame> frames;

  std::size_t size() const { return frames.size(); }
  bool empty() const { return frames.empty(); }
};

struct FrameManifest {
  std::string video_id;
  double fps = 0.0;
  int width = 0;
  int height = 0;
  std::vector<std::filesystem::path> frame_paths;  // as written in the document
  std::filesystem::path base_dir;                  // directory the manifest was read from

  std::filesystem::path resolve(std::size_t i) const { return base_dir / frame_paths.at(i); }
};

enum class FrameErrorKind { MissingFile, Malformed, InvalidFps, EmptyFrameList, InvalidDimensions, BadImage };

class FrameError : public std::runtime_error {
 public:
  FrameError(FrameErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  FrameErrorKind kind() const { return kind_; }

 private:
  FrameErrorKind kind_;
};

FrameManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const FrameManifest& manifest, const std::filesystem::path& path);

// Binary PGM ("P5", maxval 255).
Frame read_pgm(const std::filesystem::path& path);
void write_pgm(const Frame& frame, const std::filesystem::path& path);

// Reads every frame listed in the manifest; a missing or mismatched frame
// raises FrameError naming the path.
FrameSequence load_frames(const FrameManifest& manifest);

// BT.601 luma: round(0.299 r + 0.587 g + 0.114 b).
std::uint8_t to_grayscale(std::uint8_t r, std::uint8_t g, std::uint8_t b);

// Output index j takes source index round(j * src_fps / dst_fps) while that
// index is inside the source.
std::vector<std::size_t> resample_indices(std::size_t count, double src_fps, double dst_fps);

struct Resampled {
  FrameSequence sequence;
  std::vector<std::size_t> index_map;
};

Resampled resample_fps(const FrameSequence& seq, double dst_fps);

// Aspect-preserving bilinear resize, centred, zero border.
Frame letterbox_resize(const Frame& frame, int target_w, int target_h);

// Counter-clockwise rotation by 90 degrees, `steps` times.
Frame rotate90(const Frame& frame, int steps);
Frame flip_horizontal(const Frame& frame);
Frame flip_vertical(const Frame& frame);

struct AugmentOptions {
  int rot90_steps = 0;  // counter-clockwise quarter turns, 0..3
  bool flip_h = false;
  bool flip_v = false;
  double target_fps = 30.0;

  static constexpr double kMinFps = 20.0;
  static constexpr double kMaxFps = 40.0;

  // Identity geometry and no retiming for a sequence at `fps`.
  static AugmentOptions identity(double fps) { return {0, false, false, fps}; }
  static AugmentOptions random(std::mt19937_64& rng, double min_fps = kMinFps, double max_fps = kMaxFps);
};

// Geometric transform of a single frame (rotation, then flips).
Frame augment_frame(const Frame& frame, const AugmentOptions& opts);

// Same rotation/flip composition on every frame, then retimed to
// opts.target_fps.
FrameSequence augment(const FrameSequence& window, const AugmentOptions& opts);

struct Window {
  std::size_t start = 0;
  std::vector<std::size_t> indices;  // exactly `len` source indices
  std::vector<std::uint8_t> valid;   // 0 where the final frame was repeated as padding
};

// Contiguous window of `len` frames with a uniformly drawn start. Shorter
// sequences are returned whole and padded by repeating the last frame.
Window sample_window(std::size_t count, std::size_t len, std::mt19937_64& rng);

struct WindowedSequence {
  FrameSequence sequence;
  Window window;
};

WindowedSequence window_sample(const FrameSequence& seq, std::size_t len, std::mt19937_64& rng);

}  // namespace vidscan
