#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace vidscan {

// Canonical attribute slot order.
enum class Attr : int {
  HandCoveringContent = 0,
  HandNotCoveringContent,
  ContentOutOfFrame,
  PageOutOfFrameNoLoss,
  Blur,
  Glare,
  PageLifted,
  TwoPages,
  Graphical,
  OverallCape,
};

inline constexpr int kAttrCount = 10;
inline constexpr int kHazardCount = 9;  // every slot except OverallCape

inline constexpr std::array<std::string_view, kAttrCount> kAttrNames = {
    "hand_covering_content", "hand_not_covering_content", "content_out_of_frame", "page_out_of_frame_no_loss",
    "blur",                  "glare",                     "page_lifted",          "two_pages",
    "graphical",             "overall_cape"};

constexpr int slot(Attr a) { return static_cast<int>(a); }
std::optional<Attr> attr_from_name(std::string_view name);

using AttrValues = std::array<float, kAttrCount>;

// Sparse per-frame labels; std::nullopt marks a missing value.
struct AttributeVector {
  std::array<std::optional<float>, kAttrCount> values{};

  std::optional<float>& operator[](Attr a) { return values[static_cast<std::size_t>(slot(a))]; }
  const std::optional<float>& operator[](Attr a) const { return values[static_cast<std::size_t>(slot(a))]; }

  static AttributeVector full(const AttrValues& v);
  bool any_present() const;
  friend bool operator==(const AttributeVector&, const AttributeVector&) = default;
};

using FrameIndex = std::int64_t;
using FrameRange = std::pair<FrameIndex, FrameIndex>;  // inclusive

struct AnnotationSet {
  std::string video_id;
  double fps = 30.0;
  std::vector<FrameIndex> pce_marks;
  std::map<FrameIndex, AttributeVector> attribute_labels;
  std::vector<FrameRange> capture_ranges;

  friend bool operator==(const AnnotationSet&, const AnnotationSet&) = default;
};

class AnnotationError : public std::runtime_error {
 public:
  AnnotationError(std::string field, const std::string& what) : std::runtime_error(what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

// Throws AnnotationError naming the offending field.
void validate(const AnnotationSet& set);

std::string annotations_to_json(const AnnotationSet& set);
AnnotationSet annotations_from_json(std::string_view text);
AnnotationSet load_annotations(const std::filesystem::path& path);
void save_annotations(const AnnotationSet& set, const std::filesystem::path& path);

// v[i] = 1 iff some mark m has |i - m| <= pad.
std::vector<float> expand_pce_targets(const std::vector<FrameIndex>& marks, int pad, std::size_t seq_len);

struct TargetTensor {
  std::vector<float> pce;
  std::vector<std::uint8_t> pce_mask;
  std::vector<AttrValues> attrs;
  std::vector<std::array<std::uint8_t, kAttrCount>> attr_mask;

  std::size_t size() const { return pce.size(); }
};

// pce[t] <- pce[t - laf]; the first `laf` PCE entries are masked. Attributes
// are left unshifted.
TargetTensor shift_laf(const TargetTensor& targets, int laf);

// Re-expresses annotations in the frame indices of a resampled sequence.
AnnotationSet remap_labels(const AnnotationSet& set, const std::vector<std::size_t>& index_map);

// Soft labels, when given, replace the sparse attribute labels at every
// frame.
TargetTensor build_targets(const AnnotationSet& set, std::size_t seq_len, int pad, int laf,
                           const std::vector<AttrValues>* soft_labels = nullptr);

}  // namespace vidscan
