#include "vidscan/framestream.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>

#include "json.hpp"

namespace vidscan {

using nlohmann::json;

FrameManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FrameError(FrameErrorKind::MissingFile, "manifest not found: " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw FrameError(FrameErrorKind::Malformed, "malformed manifest " + path.string() + ": " + e.what());
  }
  FrameManifest m;
  m.base_dir = path.parent_path();
  try {
    m.video_id = doc.at("video_id").get<std::string>();
    m.fps = doc.at("fps").get<double>();
    m.width = doc.at("width").get<int>();
    m.height = doc.at("height").get<int>();
    for (const auto& f : doc.at("frames")) m.frame_paths.emplace_back(f.get<std::string>());
  } catch (const json::exception& e) {
    throw FrameError(FrameErrorKind::Malformed, "malformed manifest " + path.string() + ": " + e.what());
  }
  if (!(m.fps > 0.0) || !std::isfinite(m.fps)) throw FrameError(FrameErrorKind::InvalidFps, "invalid fps in " + path.string());
  if (m.frame_paths.empty()) throw FrameError(FrameErrorKind::EmptyFrameList, "empty frame list in " + path.string());
  if (m.width <= 0 || m.height <= 0)
    throw FrameError(FrameErrorKind::InvalidDimensions, "invalid width/height in " + path.string());
  return m;
}

void save_manifest(const FrameManifest& m, const std::filesystem::path& path) {
  json frames = json::array();
  for (const auto& p : m.frame_paths) frames.push_back(p.generic_string());
  const json doc = {{"video_id", m.video_id}, {"fps", m.fps}, {"width", m.width}, {"height", m.height}, {"frames", frames}};
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FrameError(FrameErrorKind::MissingFile, "cannot write manifest " + path.string());
  out << doc.dump(1) << '\n';
}

namespace {

// Next header token of a PGM, skipping whitespace and '#' comments.
std::string pgm_token(const std::vector<char>& buf, std::size_t& pos) {
  while (pos < buf.size()) {
    if (buf[pos] == '#') {
      while (pos < buf.size() && buf[pos] != '\n') ++pos;
    } else if (std::isspace(static_cast<unsigned char>(buf[pos]))) {
      ++pos;
    } else {
      break;
    }
  }
  std::string tok;
  while (pos < buf.size() && !std::isspace(static_cast<unsigned char>(buf[pos])) && buf[pos] != '#') tok += buf[pos++];
  return tok;
}

}  // namespace

Frame read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FrameError(FrameErrorKind::MissingFile, "frame file not found: " + path.string());
  const std::vector<char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::size_t pos = 0;
  const auto bad = [&](const std::string& why) { return FrameError(FrameErrorKind::BadImage, path.string() + ": " + why); };
  if (pgm_token(buf, pos) != "P5") throw bad("not a binary PGM (P5)");
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(pgm_token(buf, pos));
    h = std::stoi(pgm_token(buf, pos));
    maxval = std::stoi(pgm_token(buf, pos));
  } catch (const std::exception&) {
    throw bad("bad PGM header");
  }
  if (w <= 0 || h <= 0 || maxval != 255) throw bad("unsupported PGM dimensions or maxval");
  ++pos;  // single whitespace after maxval
  const std::size_t n = static_cast<std::size_t>(w) * h;
  if (buf.size() < pos + n) throw bad("truncated pixel data");
  Frame f(w, h);
  std::copy_n(reinterpret_cast<const std::uint8_t*>(buf.data() + pos), n, f.pixels.begin());
  return f;
}

void write_pgm(const Frame& frame, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FrameError(FrameErrorKind::MissingFile, "cannot write frame " + path.string());
  out << "P5\n" << frame.width << ' ' << frame.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(frame.pixels.data()), static_cast<std::streamsize>(frame.pixels.size()));
}

FrameSequence load_frames(const FrameManifest& manifest) {
  FrameSequence seq;
  seq.fps = manifest.fps;
  seq.frames.reserve(manifest.frame_paths.size());
  for (std::size_t i = 0; i < manifest.frame_paths.size(); ++i) {
    const auto path = manifest.resolve(i);
    Frame f = read_pgm(path);
    if (f.width != manifest.width || f.height != manifest.height)
      throw FrameError(FrameErrorKind::InvalidDimensions, "frame " + path.string() + " does not match manifest size");
    seq.frames.push_back(std::move(f));
  }
  return seq;
}

std::uint8_t to_grayscale(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  const double y = 0.299 * r + 0.587 * g + 0.114 * b;
  return static_cast<std::uint8_t>(std::clamp(std::lround(y), 0L, 255L));
}

std::vector<std::size_t> resample_indices(std::size_t count, double src_fps, double dst_fps) {
  if (!(src_fps > 0.0) || !(dst_fps > 0.0)) throw std::invalid_argument("resample: fps must be positive");
  std::vector<std::size_t> map;
  for (std::size_t j = 0;; ++j) {
    // (j * src) / dst keeps exact half-way cases exact for integral rates
    const auto src = static_cast<std::size_t>(std::llround(static_cast<double>(j) * src_fps / dst_fps));
    if (src >= count) break;
    map.push_back(src);
  }
  return map;
}

Resampled resample_fps(const FrameSequence& seq, double dst_fps) {
  Resampled out;
  out.index_map = resample_indices(seq.size(), seq.fps, dst_fps);
  out.sequence.fps = dst_fps;
  out.sequence.frames.reserve(out.index_map.size());
  for (std::size_t src : out.index_map) out.sequence.frames.push_back(seq.frames[src]);
  return out;
}

Frame letterbox_resize(const Frame& frame, int target_w, int target_h) {
  if (target_w <= 0 || target_h <= 0) throw std::invalid_argument("letterbox: target dimensions must be positive");
  if (!frame.valid()) throw std::invalid_argument("letterbox: invalid frame");
  const double s = std::min(static_cast<double>(target_w) / frame.width, static_cast<double>(target_h) / frame.height);
  const int cw = std::clamp(static_cast<int>(std::lround(frame.width * s)), 1, target_w);
  const int ch = std::clamp(static_cast<int>(std::lround(frame.height * s)), 1, target_h);
  const int x0 = (target_w - cw) / 2;
  const int y0 = (target_h - ch) / 2;
  Frame out(target_w, target_h, 0);
  const double sx = static_cast<double>(frame.width) / cw;
  const double sy = static_cast<double>(frame.height) / ch;

  // Precompute horizontal taps.
  std::vector<int> xa(cw), xb(cw);
  std::vector<double> xf(cw);
  for (int x = 0; x < cw; ++x) {
    const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(frame.width - 1));
    xa[x] = static_cast<int>(fx);
    xb[x] = std::min(xa[x] + 1, frame.width - 1);
    xf[x] = fx - xa[x];
  }
  for (int y = 0; y < ch; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(frame.height - 1));
    const int ya = static_cast<int>(fy);
    const int yb = std::min(ya + 1, frame.height - 1);
    const double wy = fy - ya;
    std::uint8_t* row = out.pixels.data() + static_cast<std::size_t>(y + y0) * target_w + x0;
    for (int x = 0; x < cw; ++x) {
      const double top = frame.at(xa[x], ya) * (1.0 - xf[x]) + frame.at(xb[x], ya) * xf[x];
      const double bot = frame.at(xa[x], yb) * (1.0 - xf[x]) + frame.at(xb[x], yb) * xf[x];
      row[x] = static_cast<std::uint8_t>(std::lround(top * (1.0 - wy) + bot * wy));
    }
  }
  return out;
}

Frame rotate90(const Frame& frame, int steps) {
  steps = ((steps % 4) + 4) % 4;
  if (steps == 0) return frame;
  Frame out(frame.height, frame.width);
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x) out.at(x, y) = frame.at(frame.width - 1 - y, x);
  return rotate90(out, steps - 1);
}

Frame flip_horizontal(const Frame& frame) {
  Frame out = frame;
  for (int y = 0; y < frame.height; ++y) {
    auto row = out.pixels.begin() + static_cast<std::ptrdiff_t>(y) * frame.width;
    std::reverse(row, row + frame.width);
  }
  return out;
}

Frame flip_vertical(const Frame& frame) {
  Frame out(frame.width, frame.height);
  for (int y = 0; y < frame.height; ++y)
    std::copy_n(frame.pixels.begin() + static_cast<std::ptrdiff_t>(frame.height - 1 - y) * frame.width, frame.width,
                out.pixels.begin() + static_cast<std::ptrdiff_t>(y) * frame.width);
  return out;
}

AugmentOptions AugmentOptions::random(std::mt19937_64& rng, double min_fps, double max_fps) {
  AugmentOptions o;
  o.rot90_steps = std::uniform_int_distribution<int>(0, 3)(rng);
  o.flip_h = std::bernoulli_distribution(0.5)(rng);
  o.flip_v = std::bernoulli_distribution(0.5)(rng);
  o.target_fps = std::uniform_real_distribution<double>(min_fps, max_fps)(rng);
  return o;
}

Frame augment_frame(const Frame& frame, const AugmentOptions& opts) {
  Frame out = rotate90(frame, opts.rot90_steps);
  if (opts.flip_h) out = flip_horizontal(out);
  if (opts.flip_v) out = flip_vertical(out);
  return out;
}

FrameSequence augment(const FrameSequence& window, const AugmentOptions& opts) {
  if (window.empty()) throw std::invalid_argument("augment: empty window");
  FrameSequence geo;
  geo.fps = window.fps;
  geo.frames.reserve(window.size());
  for (const auto& f : window.frames) geo.frames.push_back(augment_frame(f, opts));
  if (opts.target_fps == window.fps) return geo;
  return resample_fps(geo, opts.target_fps).sequence;
}

Window sample_window(std::size_t count, std::size_t len, std::mt19937_64& rng) {
  Window w;
  if (count == 0 || len == 0) return w;
  if (count > len) w.start = std::uniform_int_distribution<std::size_t>(0, count - len)(rng);
  w.indices.reserve(len);
  w.valid.reserve(len);
  for (std::size_t i = 0; i < len; ++i) {
    const std::size_t src = w.start + i;
    w.indices.push_back(std::min(src, count - 1));
    w.valid.push_back(src < count ? 1 : 0);
  }
  return w;
}

WindowedSequence window_sample(const FrameSequence& seq, std::size_t len, std::mt19937_64& rng) {
  WindowedSequence out;
  out.window = sample_window(seq.size(), len, rng);
  out.sequence.fps = seq.fps;
  for (std::size_t i : out.window.indices) out.sequence.frames.push_back(seq.frames[i]);
  return out;
}

}  // namespace vidscan
