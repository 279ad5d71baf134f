#include "vidscan/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "json.hpp"

namespace vidscan::synth {

using nlohmann::json;
using Rng = std::mt19937_64;

namespace {

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
bool coin(Rng& rng, double p) { return p > 0.0 && std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p; }

std::uint8_t clamp_u8(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

// Deterministic sub-seed so each random decision stream is independent of
// how many draws other streams made.
std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void fill_rect(Frame& f, int x0, int y0, int x1, int y1, std::uint8_t v) {
  for (int y = std::max(0, y0); y <= std::min(f.height - 1, y1); ++y)
    for (int x = std::max(0, x0); x <= std::min(f.width - 1, x1); ++x) f.at(x, y) = v;
}

void fill_ellipse(Frame& f, double cx, double cy, double ax, double ay, std::uint8_t v) {
  const int x0 = static_cast<int>(std::floor(cx - ax)), x1 = static_cast<int>(std::ceil(cx + ax));
  const int y0 = static_cast<int>(std::floor(cy - ay)), y1 = static_cast<int>(std::ceil(cy + ay));
  for (int y = std::max(0, y0); y <= std::min(f.height - 1, y1); ++y)
    for (int x = std::max(0, x0); x <= std::min(f.width - 1, x1); ++x) {
      const double u = (x - cx) / ax, w = (y - cy) / ay;
      if (u * u + w * w <= 1.0) f.at(x, y) = v;
    }
}

// Page rectangle for a frame of the given size.
Box layout_page(int width, int height) {
  const int mx = static_cast<int>(std::lround(0.07 * width));
  const int my = static_cast<int>(std::lround(0.06 * height));
  return {mx, my, width - 1 - mx, height - 1 - my};
}

const Attr kBlockHazards[] = {Attr::HandCoveringContent, Attr::HandNotCoveringContent, Attr::ContentOutOfFrame,
                              Attr::PageOutOfFrameNoLoss, Attr::Blur, Attr::Glare, Attr::PageLifted};

// Application order within a frame: geometry first, then occluders and
// lighting, blur last (it models the camera).
int hazard_order(Attr a) {
  switch (a) {
    case Attr::ContentOutOfFrame:
    case Attr::PageOutOfFrameNoLoss: return 0;
    case Attr::PageLifted: return 1;
    case Attr::HandCoveringContent:
    case Attr::HandNotCoveringContent: return 2;
    case Attr::Glare: return 3;
    case Attr::Blur: return 4;
    default: return 5;
  }
}

int hazard_group(Attr a) {
  switch (a) {
    case Attr::ContentOutOfFrame:
    case Attr::PageOutOfFrameNoLoss: return 0;
    case Attr::HandCoveringContent:
    case Attr::HandNotCoveringContent: return 1;
    default: return 2 + slot(a);
  }
}

Frame draw_hand(const Frame& in, const Box& avoid, bool covering, Rng& rng) {
  Frame f = in;
  const double ax = uniform(rng, 0.12, 0.18) * f.width;
  const double ay = uniform(rng, 0.07, 0.10) * f.height;
  double cx = 0, cy = 0;
  int side = 0;  // 0 left, 1 right, 2 bottom: the border the arm reaches
  if (covering) {
    cx = uniform(rng, avoid.x0 + 0.2 * (avoid.x1 - avoid.x0), avoid.x0 + 0.8 * (avoid.x1 - avoid.x0));
    cy = uniform(rng, avoid.y0 + 0.2 * (avoid.y1 - avoid.y0), avoid.y0 + 0.8 * (avoid.y1 - avoid.y0));
    side = uniform_int(rng, 0, 2);
  } else {
    side = uniform_int(rng, 0, 2);
    if (side == 0) {
      cx = avoid.x0 - ax - 2;
      cy = uniform(rng, avoid.y0 + ay, std::max(avoid.y0 + ay, avoid.y1 - ay));
    } else if (side == 1) {
      cx = avoid.x1 + ax + 2;
      cy = uniform(rng, avoid.y0 + ay, std::max(avoid.y0 + ay, avoid.y1 - ay));
    } else {
      cx = uniform(rng, avoid.x0 + ax, std::max(avoid.x0 + ax, avoid.x1 - ax));
      cy = avoid.y1 + ay + 2;
    }
  }
  const auto tone = static_cast<std::uint8_t>(uniform_int(rng, 84, 96));
  const double arm = 0.55;  // arm half-width relative to the palm axis
  Frame mask(f.width, f.height, 0);
  fill_ellipse(mask, cx, cy, ax, ay, 1);
  if (side == 0) fill_rect(mask, 0, static_cast<int>(cy - arm * ay), static_cast<int>(cx), static_cast<int>(cy + arm * ay), 1);
  if (side == 1)
    fill_rect(mask, static_cast<int>(cx), static_cast<int>(cy - arm * ay), f.width - 1, static_cast<int>(cy + arm * ay), 1);
  if (side == 2)
    fill_rect(mask, static_cast<int>(cx - arm * ax), static_cast<int>(cy), static_cast<int>(cx + arm * ax), f.height - 1, 1);
  for (int y = 0; y < f.height; ++y)
    for (int x = 0; x < f.width; ++x) {
      if (mask.at(x, y) == 0) continue;
      if (!covering && avoid.contains(x, y)) continue;  // keep content pixels untouched
      // faint knuckle texture so the blob is not a flat fill
      f.at(x, y) = static_cast<std::uint8_t>(tone + ((x / 5 + y / 7) % 3) * 3);
    }
  return f;
}

Frame lift_corner(const Frame& in, const Box& page, Rng& rng) {
  Frame f = in;
  const int corner = uniform_int(rng, 0, 3);
  const double leg = uniform(rng, 0.30, 0.45) * (page.x1 - page.x0);
  const double cx = (corner % 2 == 0) ? page.x0 : page.x1;
  const double cy = (corner < 2) ? page.y0 : page.y1;
  for (int y = 0; y < f.height; ++y)
    for (int x = 0; x < f.width; ++x) {
      const double d = std::abs(x - cx) + std::abs(y - cy);
      if (d > leg) continue;
      // folded-back paper: a shaded gradient with a dark crease at the edge
      const double s = d / leg;
      f.at(x, y) = s > 0.93 ? std::uint8_t{70} : clamp_u8(150 + 60 * s);
    }
  return f;
}

Frame add_glare(const Frame& in, const Box& page, Rng& rng) {
  Frame f = in;
  const double cx = uniform(rng, page.x0 + 0.2 * (page.x1 - page.x0), page.x0 + 0.8 * (page.x1 - page.x0));
  const double cy = uniform(rng, page.y0 + 0.2 * (page.y1 - page.y0), page.y0 + 0.8 * (page.y1 - page.y0));
  const double r = uniform(rng, 0.22, 0.35) * f.width;
  const double amp = uniform(rng, 170, 230);
  for (int y = 0; y < f.height; ++y)
    for (int x = 0; x < f.width; ++x) {
      const double q = ((x - cx) * (x - cx) + (y - cy) * (y - cy)) / (r * r);
      if (q >= 1.0) continue;
      const double add = amp * (1.0 - q);
      f.at(x, y) = static_cast<std::uint8_t>(std::min(255.0, f.at(x, y) + std::floor(add)));
    }
  return f;
}

// Shift that pushes the page edge (not the content) across the border.
std::pair<int, int> no_loss_shift(const Box& page, const Box& content, int w, int h, Rng& rng) {
  const int dir = uniform_int(rng, 0, 3);
  const auto amount = [&](int page_gap, int content_gap) {
    // push the page edge 3..(content clearance / 2) pixels past the border
    const int room = std::max(4, (content_gap - page_gap) / 2);
    return page_gap + uniform_int(rng, 3, room);
  };
  switch (dir) {
    case 0: return {-amount(page.x0, content.x0), 0};
    case 1: return {amount(w - 1 - page.x1, w - 1 - content.x1), 0};
    case 2: return {0, -amount(page.y0, content.y0)};
    default: return {0, amount(h - 1 - page.y1, h - 1 - content.y1)};
  }
}

std::pair<int, int> content_loss_shift(const Box& content, int w, int h, Rng& rng) {
  const int dir = uniform_int(rng, 0, 3);
  const double frac = uniform(rng, 0.2, 0.4);
  const int cw = content.x1 - content.x0 + 1, ch = content.y1 - content.y0 + 1;
  switch (dir) {
    case 0: return {-(content.x0 + static_cast<int>(frac * cw)), 0};
    case 1: return {(w - 1 - content.x1) + static_cast<int>(frac * cw), 0};
    case 2: return {0, -(content.y0 + static_cast<int>(frac * ch))};
    default: return {0, (h - 1 - content.y1) + static_cast<int>(frac * ch)};
  }
}

Frame render_spread(std::uint64_t seed, int width, int height) {
  // Two half-width pages side by side with a dark gutter.
  Frame f(width, height, kDeskLevel);
  const int half = width / 2;
  const Frame left = render_page(mix(seed, 1), half, height, false);
  const Frame right = render_page(mix(seed, 2), width - half, height, false);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < half; ++x) f.at(x, y) = left.at(x, y);
    for (int x = half; x < width; ++x) f.at(x, y) = right.at(x - half, y);
  }
  return f;
}

}  // namespace

std::string_view mode_name(CaptureMode m) {
  switch (m) {
    case CaptureMode::RightOnly: return "right-only";
    case CaptureMode::LeftOnly: return "left-only";
    case CaptureMode::Both: return "both";
    case CaptureMode::Panning: return "panning";
  }
  return "right-only";
}

CaptureMode mode_from_name(std::string_view name) {
  for (auto m : {CaptureMode::RightOnly, CaptureMode::LeftOnly, CaptureMode::Both, CaptureMode::Panning})
    if (mode_name(m) == name) return m;
  throw std::invalid_argument("unknown capture mode: " + std::string(name));
}

std::map<std::string, double> SynthConfig::default_hazard_rates(double rate) {
  std::map<std::string, double> m;
  for (int i = 0; i < kHazardCount; ++i) m[std::string(kAttrNames[static_cast<std::size_t>(i)])] = rate;
  return m;
}

void SynthConfig::validate() const {
  if (n_pages < 1) throw std::invalid_argument("synth: n_pages must be >= 1");
  if (!(fps > 0)) throw std::invalid_argument("synth: fps must be positive");
  if (width < 32 || height < 32) throw std::invalid_argument("synth: frames must be at least 32x32");
  if (dwell_frames < 5) throw std::invalid_argument("synth: dwell_frames must be >= 5");
  if (turn_frames < 3) throw std::invalid_argument("synth: turn_frames must be >= 3");
  for (const auto& [name, p] : hazard_rates) {
    const auto a = attr_from_name(name);
    if (!a || *a == Attr::OverallCape) throw std::invalid_argument("synth: unknown hazard " + name);
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("synth: hazard rate outside [0,1] for " + name);
  }
}

double SynthConfig::rate(Attr a) const {
  const auto it = hazard_rates.find(std::string(kAttrNames[static_cast<std::size_t>(slot(a))]));
  return it == hazard_rates.end() ? 0.0 : it->second;
}

Frame render_page(std::uint64_t content_seed, int width, int height, bool graphical) {
  Rng rng(mix(content_seed, 0x5eed));
  Frame f(width, height, kDeskLevel);
  // low-contrast desk grain
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) f.at(x, y) = static_cast<std::uint8_t>(kDeskLevel - 3 + ((x * 7 + y * 13) % 7));
  const Box page = layout_page(width, height);
  const auto paper = static_cast<std::uint8_t>(kPaperLevel + uniform_int(rng, -4, 4));
  fill_rect(f, page.x0, page.y0, page.x1, page.y1, paper);
  const int pm = static_cast<int>(std::lround(0.1 * (page.x1 - page.x0)));
  const Box content{page.x0 + pm, page.y0 + pm, page.x1 - pm, page.y1 - pm};
  if (graphical) {
    const int shapes = uniform_int(rng, 2, 4);
    const int cw = content.x1 - content.x0, ch = content.y1 - content.y0;
    for (int i = 0; i < shapes; ++i) {
      const auto v = static_cast<std::uint8_t>(uniform_int(rng, 25, 70));
      const int sw = static_cast<int>(uniform(rng, 0.3, 0.7) * cw);
      const int sh = static_cast<int>(uniform(rng, 0.15, 0.35) * ch);
      const int x0 = content.x0 + uniform_int(rng, 0, cw - sw);
      const int y0 = content.y0 + uniform_int(rng, 0, ch - sh);
      if (coin(rng, 0.5))
        fill_rect(f, x0, y0, x0 + sw, y0 + sh, v);
      else
        fill_ellipse(f, x0 + sw / 2.0, y0 + sh / 2.0, sw / 2.0, sh / 2.0, v);
    }
    return f;
  }
  const int pitch = uniform_int(rng, 11, 15);
  const int bar = uniform_int(rng, 4, 6);
  for (int y = content.y0; y + bar - 1 <= content.y1; y += pitch) {
    if (coin(rng, 0.08)) continue;  // paragraph break
    const int line_end = content.x0 + static_cast<int>(uniform(rng, 0.55, 1.0) * (content.x1 - content.x0));
    int x = content.x0 + (coin(rng, 0.15) ? uniform_int(rng, 6, 14) : 0);
    while (x < line_end) {
      const int word = std::min(uniform_int(rng, 6, 28), line_end - x);
      const auto ink = static_cast<std::uint8_t>(uniform_int(rng, 18, 45));
      fill_rect(f, x, y, x + word - 1, y + bar - 1, ink);
      x += word + uniform_int(rng, 3, 6);
    }
  }
  return f;
}

Frame animate_turn(const Frame& a, const Frame& b, double t, bool from_right) {
  if (a.width != b.width || a.height != b.height) throw std::invalid_argument("animate_turn: size mismatch");
  t = std::clamp(t, 0.0, 1.0);
  constexpr double band = 0.08;
  const double u = t * (1.0 + 2.0 * band) - band;
  const double shade = 1.0 - 0.65 * std::sin(std::numbers::pi * t);
  Frame out(a.width, a.height);
  for (int y = 0; y < a.height; ++y)
    for (int x = 0; x < a.width; ++x) {
      const double xn = static_cast<double>(from_right ? a.width - 1 - x : x) / a.width;
      const double d = 0.5 * (xn + static_cast<double>(y) / a.height);
      const std::uint8_t v = d < u ? b.at(x, y) : a.at(x, y);
      out.at(x, y) = std::abs(d - u) <= band ? clamp_u8(v * shade) : v;
    }
  return out;
}

Frame animate_pan(const Frame& a, const Frame& b, double t) {
  if (a.width != b.width || a.height != b.height) throw std::invalid_argument("animate_pan: size mismatch");
  t = std::clamp(t, 0.0, 1.0);
  const int shift = static_cast<int>(std::lround(t * a.width));
  Frame out(a.width, a.height);
  for (int y = 0; y < a.height; ++y)
    for (int x = 0; x < a.width; ++x) {
      const int sx = x + shift;
      out.at(x, y) = sx < a.width ? a.at(sx, y) : b.at(sx - a.width, y);
    }
  return out;
}

namespace {

Box level_box(const Frame& f, auto pred) {
  Box b{f.width, f.height, -1, -1};
  for (int y = 0; y < f.height; ++y)
    for (int x = 0; x < f.width; ++x)
      if (pred(f.at(x, y))) {
        b.x0 = std::min(b.x0, x);
        b.y0 = std::min(b.y0, y);
        b.x1 = std::max(b.x1, x);
        b.y1 = std::max(b.y1, y);
      }
  return b;
}

}  // namespace

Box page_box(const Frame& f) {
  return level_box(f, [](std::uint8_t v) { return v >= 200; });
}

Box content_box(const Frame& f) {
  return level_box(f, [](std::uint8_t v) { return v < kInkThreshold; });
}

Frame translate(const Frame& f, int dx, int dy, std::uint8_t fill) {
  Frame out(f.width, f.height, fill);
  for (int y = 0; y < f.height; ++y) {
    const int sy = y - dy;
    if (sy < 0 || sy >= f.height) continue;
    for (int x = 0; x < f.width; ++x) {
      const int sx = x - dx;
      if (sx >= 0 && sx < f.width) out.at(x, y) = f.at(sx, sy);
    }
  }
  return out;
}

Frame box_blur5(const Frame& f) {
  Frame out(f.width, f.height);
  for (int y = 0; y < f.height; ++y)
    for (int x = 0; x < f.width; ++x) {
      int sum = 0;
      for (int ky = -2; ky <= 2; ++ky)
        for (int kx = -2; kx <= 2; ++kx)
          sum += f.at(std::clamp(x + kx, 0, f.width - 1), std::clamp(y + ky, 0, f.height - 1));
      out.at(x, y) = static_cast<std::uint8_t>((sum + 12) / 25);
    }
  return out;
}

HazardResult apply_hazard(const Frame& frame, Attr hazard, Rng& rng) {
  HazardResult r;
  r.deltas[hazard] = 1.0f;
  const Box page = page_box(frame);
  Box content = content_box(frame);
  if (content.empty()) content = page;
  switch (hazard) {
    case Attr::HandCoveringContent: r.frame = draw_hand(frame, content, true, rng); break;
    case Attr::HandNotCoveringContent: r.frame = draw_hand(frame, content, false, rng); break;
    case Attr::ContentOutOfFrame: {
      const auto [dx, dy] = content_loss_shift(content, frame.width, frame.height, rng);
      r.frame = translate(frame, dx, dy);
      break;
    }
    case Attr::PageOutOfFrameNoLoss: {
      const auto [dx, dy] = no_loss_shift(page.empty() ? content : page, content, frame.width, frame.height, rng);
      r.frame = translate(frame, dx, dy);
      break;
    }
    case Attr::Blur: r.frame = box_blur5(frame); break;
    case Attr::Glare: r.frame = add_glare(frame, page.empty() ? content : page, rng); break;
    case Attr::PageLifted: r.frame = lift_corner(frame, page.empty() ? content : page, rng); break;
    default: throw std::invalid_argument("apply_hazard: not a frame-level hazard: " +
                                         std::string(kAttrNames[static_cast<std::size_t>(slot(hazard))]));
  }
  return r;
}

namespace {

struct Segment {
  int length = 0;
  int prefix = 0;  // hazard frames at the start
  int suffix = 0;  // hazard frames at the end
  std::vector<Attr> prefix_hazards, suffix_hazards;
};

Segment plan_segment(const SynthConfig& cfg, Rng& rng) {
  Segment s;
  s.length = std::max(5, static_cast<int>(std::lround(cfg.dwell_frames * uniform(rng, 0.8, 1.2))));
  for (Attr h : kBlockHazards) {
    if (!coin(rng, cfg.rate(h))) continue;
    const bool at_start = coin(rng, 0.5);
    auto& first = at_start ? s.prefix_hazards : s.suffix_hazards;
    auto& second = at_start ? s.suffix_hazards : s.prefix_hazards;
    const auto clash = [&](const std::vector<Attr>& v) {
      return std::any_of(v.begin(), v.end(), [&](Attr o) { return hazard_group(o) == hazard_group(h); });
    };
    if (!clash(first))
      first.push_back(h);
    else if (!clash(second))
      second.push_back(h);
  }
  const auto block = [&](bool any) { return any ? std::max(2, static_cast<int>(std::lround(uniform(rng, 0.2, 0.35) * s.length))) : 0; };
  s.prefix = block(!s.prefix_hazards.empty());
  s.suffix = block(!s.suffix_hazards.empty());
  const auto by_order = [](Attr a, Attr b) { return hazard_order(a) < hazard_order(b); };
  std::sort(s.prefix_hazards.begin(), s.prefix_hazards.end(), by_order);
  std::sort(s.suffix_hazards.begin(), s.suffix_hazards.end(), by_order);
  return s;
}

// Handheld shake: smooth AR(1) integer offsets within +-2% of each axis.
struct Shake {
  double x = 0, y = 0;
  int max_x, max_y;
  Shake(int w, int h) : max_x(std::max(1, static_cast<int>(0.02 * w))), max_y(std::max(1, static_cast<int>(0.02 * h))) {}
  std::pair<int, int> next(Rng& rng) {
    std::normal_distribution<double> n(0.0, 0.8);
    x = std::clamp(0.85 * x + n(rng), -static_cast<double>(max_x), static_cast<double>(max_x));
    y = std::clamp(0.85 * y + n(rng), -static_cast<double>(max_y), static_cast<double>(max_y));
    return {static_cast<int>(std::lround(x)), static_cast<int>(std::lround(y))};
  }
};

AttrValues clean_steady() {
  AttrValues v{};
  v[slot(Attr::OverallCape)] = 1.0f;
  return v;
}

}  // namespace

SynthVideo generate_video(const SynthConfig& cfg, const std::string& video_id) {
  cfg.validate();
  Rng rng(mix(cfg.seed, 1));
  Rng shake_rng(mix(cfg.seed, 2));
  Shake shake(cfg.width, cfg.height);
  SynthVideo v;
  v.frames.fps = cfg.fps;
  v.annotations.video_id = video_id;
  v.annotations.fps = cfg.fps;

  struct PageInfo {
    Frame canvas;
    bool graphical = false;
    bool two_pages = false;
  };
  std::vector<PageInfo> pages;
  for (int p = 0; p < cfg.n_pages; ++p) {
    PageInfo info;
    info.two_pages = coin(rng, cfg.rate(Attr::TwoPages));
    info.graphical = !info.two_pages && coin(rng, cfg.rate(Attr::Graphical));
    const std::uint64_t content_seed = mix(cfg.seed, 100 + static_cast<std::uint64_t>(p));
    info.canvas = info.two_pages ? render_spread(content_seed, cfg.width, cfg.height)
                                 : render_page(content_seed, cfg.width, cfg.height, info.graphical);
    pages.push_back(std::move(info));
  }

  const auto push = [&](Frame f, const AttrValues& attrs) {
    const auto idx = static_cast<FrameIndex>(v.frames.frames.size());
    v.frames.frames.push_back(std::move(f));
    v.annotations.attribute_labels[idx] = AttributeVector::full(attrs);
  };

  for (int p = 0; p < cfg.n_pages; ++p) {
    const PageInfo& page = pages[static_cast<std::size_t>(p)];
    const Segment seg = plan_segment(cfg, rng);
    const std::uint64_t seg_seed = mix(cfg.seed, 1000 + static_cast<std::uint64_t>(p));
    const bool page_level_hazard = page.graphical || page.two_pages;
    FrameIndex clean_start = -1, clean_end = -1;
    for (int i = 0; i < seg.length; ++i) {
      const bool in_prefix = i < seg.prefix;
      const bool in_suffix = i >= seg.length - seg.suffix;
      const auto& hazards = in_prefix ? seg.prefix_hazards : in_suffix ? seg.suffix_hazards : std::vector<Attr>{};
      const auto [sx, sy] = shake.next(shake_rng);
      AttrValues attrs{};
      attrs[slot(Attr::Graphical)] = page.graphical ? 1.0f : 0.0f;
      attrs[slot(Attr::TwoPages)] = page.two_pages ? 1.0f : 0.0f;
      Frame f = page.canvas;
      for (Attr h : hazards) {
        // same seed for every frame of the block keeps the placement fixed
        Rng hrng(mix(seg_seed, static_cast<std::uint64_t>(slot(h)) * 2 + (in_prefix ? 0 : 1)));
        f = apply_hazard(f, h, hrng).frame;
        attrs[slot(h)] = 1.0f;
      }
      // Blur is applied last; re-apply shake before it so the camera shake
      // does not reveal unblurred borders.
      const bool blurred = std::find(hazards.begin(), hazards.end(), Attr::Blur) != hazards.end();
      f = translate(f, sx, sy);
      if (blurred) f = box_blur5(f);
      const bool clean = hazards.empty() && !page_level_hazard;
      if (clean) {
        attrs = clean_steady();
        const auto idx = static_cast<FrameIndex>(v.frames.size());
        if (clean_start < 0) clean_start = idx;
        clean_end = idx;
      }
      push(std::move(f), attrs);
    }
    if (clean_start >= 0) v.annotations.capture_ranges.emplace_back(clean_start, clean_end);

    if (p + 1 == cfg.n_pages) break;
    bool pan = false;
    switch (cfg.mode) {
      case CaptureMode::Panning: pan = true; break;
      case CaptureMode::Both: pan = p % 2 == 0; break;
      default: pan = false;
    }
    const Frame& a = page.canvas;
    const Frame& b = pages[static_cast<std::size_t>(p + 1)].canvas;
    const auto start = static_cast<FrameIndex>(v.frames.size());
    for (int i = 0; i < cfg.turn_frames; ++i) {
      const double t = static_cast<double>(i + 1) / (cfg.turn_frames + 1);
      Frame f = pan ? animate_pan(a, b, t) : animate_turn(a, b, t, cfg.mode != CaptureMode::LeftOnly);
      const auto [sx, sy] = shake.next(shake_rng);
      AttrValues attrs{};
      attrs[slot(pan ? Attr::ContentOutOfFrame : Attr::PageLifted)] = 1.0f;
      push(translate(f, sx, sy), attrs);
    }
    v.annotations.pce_marks.push_back(start + cfg.turn_frames / 2);
  }
  validate(v.annotations);
  return v;
}

void write_video(const SynthVideo& video, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "frames");
  FrameManifest m;
  m.video_id = video.annotations.video_id;
  m.fps = video.frames.fps;
  m.width = video.frames.frames.empty() ? 0 : video.frames.frames.front().width;
  m.height = video.frames.frames.empty() ? 0 : video.frames.frames.front().height;
  for (std::size_t i = 0; i < video.frames.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "frames/%06zu.pgm", i);
    write_pgm(video.frames.frames[i], dir / name);
    m.frame_paths.emplace_back(name);
  }
  save_manifest(m, dir / "manifest.json");
  save_annotations(video.annotations, dir / "annotations.json");
}

std::string config_to_json(const SynthConfig& cfg) {
  const json doc = {{"seed", cfg.seed},
                    {"n_pages", cfg.n_pages},
                    {"fps", cfg.fps},
                    {"width", cfg.width},
                    {"height", cfg.height},
                    {"dwell_frames", cfg.dwell_frames},
                    {"turn_frames", cfg.turn_frames},
                    {"hazard_rates", cfg.hazard_rates},
                    {"capture_mode", std::string(mode_name(cfg.mode))}};
  return doc.dump();
}

SynthConfig config_from_json(const std::string& text) {
  const json doc = json::parse(text);
  SynthConfig cfg;
  cfg.seed = doc.at("seed").get<std::uint64_t>();
  cfg.n_pages = doc.at("n_pages").get<int>();
  cfg.fps = doc.at("fps").get<double>();
  cfg.width = doc.at("width").get<int>();
  cfg.height = doc.at("height").get<int>();
  cfg.dwell_frames = doc.at("dwell_frames").get<int>();
  cfg.turn_frames = doc.at("turn_frames").get<int>();
  cfg.hazard_rates = doc.at("hazard_rates").get<std::map<std::string, double>>();
  cfg.mode = mode_from_name(doc.at("capture_mode").get<std::string>());
  cfg.validate();
  return cfg;
}

void write_corpus(const std::filesystem::path& root, const std::vector<CorpusEntry>& entries) {
  std::vector<CorpusEntry> sorted = entries;
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.video_id < b.video_id; });
  json videos = json::array();
  for (const auto& e : sorted) {
    write_video(generate_video(e.config, e.video_id), root / e.video_id);
    videos.push_back({{"video_id", e.video_id},
                      {"split", e.split},
                      {"dir", e.video_id},
                      {"seed", e.config.seed},
                      {"config", json::parse(config_to_json(e.config))}});
  }
  std::ofstream out(root / "index.json", std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write corpus index in " + root.string());
  out << json({{"videos", videos}}).dump(1) << '\n';
}

std::vector<CorpusIndexItem> load_corpus_index(const std::filesystem::path& root) {
  std::ifstream in(root / "index.json");
  if (!in) throw std::runtime_error("corpus index not found: " + (root / "index.json").string());
  const json doc = json::parse(in);
  std::vector<CorpusIndexItem> items;
  for (const auto& v : doc.at("videos")) {
    CorpusIndexItem item;
    item.video_id = v.at("video_id").get<std::string>();
    item.split = v.at("split").get<std::string>();
    item.dir = root / v.at("dir").get<std::string>();
    item.config = config_from_json(v.at("config").dump());
    items.push_back(std::move(item));
  }
  return items;
}

std::vector<CorpusEntry> make_corpus_plan(int train, int heldout, std::uint64_t seed, const SynthConfig& base) {
  std::vector<CorpusEntry> out;
  const CaptureMode modes[] = {CaptureMode::RightOnly, CaptureMode::LeftOnly, CaptureMode::Both, CaptureMode::Panning};
  for (int i = 0; i < train + heldout; ++i) {
    CorpusEntry e;
    const bool is_train = i < train;
    const int k = is_train ? i : i - train;
    char id[32];
    std::snprintf(id, sizeof id, "%s_%03d", is_train ? "train" : "heldout", k);
    e.video_id = id;
    e.split = is_train ? "train" : "heldout";
    e.config = base;
    e.config.seed = mix(seed, static_cast<std::uint64_t>(i));
    e.config.mode = modes[static_cast<std::size_t>(i) % 4];
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace vidscan::synth
