#include "vidscan/labelstore.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace vidscan {

using nlohmann::json;

std::optional<Attr> attr_from_name(std::string_view name) {
  for (int i = 0; i < kAttrCount; ++i)
    if (kAttrNames[static_cast<std::size_t>(i)] == name) return static_cast<Attr>(i);
  return std::nullopt;
}

AttributeVector AttributeVector::full(const AttrValues& v) {
  AttributeVector out;
  for (std::size_t i = 0; i < v.size(); ++i) out.values[i] = v[i];
  return out;
}

bool AttributeVector::any_present() const {
  return std::any_of(values.begin(), values.end(), [](const auto& v) { return v.has_value(); });
}

void validate(const AnnotationSet& set) {
  if (!(set.fps > 0.0) || !std::isfinite(set.fps)) throw AnnotationError("fps", "fps must be positive");
  for (std::size_t i = 0; i < set.pce_marks.size(); ++i) {
    if (set.pce_marks[i] < 0) throw AnnotationError("pce_marks", "pce_marks contains a negative index");
    if (i > 0 && set.pce_marks[i] <= set.pce_marks[i - 1]) throw AnnotationError("pce_marks", "pce_marks not sorted");
  }
  for (std::size_t i = 0; i < set.capture_ranges.size(); ++i) {
    const auto [s, e] = set.capture_ranges[i];
    if (s < 0 || e < s) throw AnnotationError("capture_ranges", "capture_ranges entry is not a valid [start,end] pair");
    if (i > 0 && s <= set.capture_ranges[i - 1].second)
      throw AnnotationError("capture_ranges", "capture_ranges not sorted and disjoint");
  }
  for (const auto& [frame, attrs] : set.attribute_labels) {
    if (frame < 0) throw AnnotationError("attribute_labels", "attribute_labels has a negative frame index");
    for (std::size_t k = 0; k < attrs.values.size(); ++k) {
      const auto& v = attrs.values[k];
      if (v && !(*v >= 0.0f && *v <= 1.0f))
        throw AnnotationError("attribute_labels." + std::string(kAttrNames[k]),
                              "attribute " + std::string(kAttrNames[k]) + " outside [0,1] at frame " +
                                  std::to_string(frame));
    }
  }
}

std::string annotations_to_json(const AnnotationSet& set) {
  validate(set);
  json labels = json::object();
  for (const auto& [frame, attrs] : set.attribute_labels) {
    json entry = json::object();
    for (std::size_t k = 0; k < attrs.values.size(); ++k) {
      const auto& v = attrs.values[k];
      entry[std::string(kAttrNames[k])] = v ? json(*v) : json(nullptr);
    }
    labels[std::to_string(frame)] = std::move(entry);
  }
  json ranges = json::array();
  for (const auto& [s, e] : set.capture_ranges) ranges.push_back({s, e});
  const json doc = {{"video_id", set.video_id},
                    {"fps", set.fps},
                    {"pce_marks", set.pce_marks},
                    {"attribute_labels", std::move(labels)},
                    {"capture_ranges", std::move(ranges)}};
  return doc.dump();
}

AnnotationSet annotations_from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw AnnotationError("document", std::string("malformed annotation document: ") + e.what());
  }
  if (!doc.is_object()) throw AnnotationError("document", "annotation document must be an object");
  AnnotationSet set;
  const auto field = [&](const char* name) -> const json& {
    if (!doc.contains(name)) throw AnnotationError(name, std::string("missing field ") + name);
    return doc.at(name);
  };
  try {
    set.video_id = field("video_id").get<std::string>();
  } catch (const json::type_error&) {
    throw AnnotationError("video_id", "video_id must be a string");
  }
  try {
    set.fps = field("fps").get<double>();
  } catch (const json::type_error&) {
    throw AnnotationError("fps", "fps must be a number");
  }
  try {
    set.pce_marks = field("pce_marks").get<std::vector<FrameIndex>>();
  } catch (const json::type_error&) {
    throw AnnotationError("pce_marks", "pce_marks must be an array of integers");
  }
  const json& ranges = field("capture_ranges");
  if (!ranges.is_array()) throw AnnotationError("capture_ranges", "capture_ranges must be an array");
  for (const auto& r : ranges) {
    if (!r.is_array() || r.size() != 2 || !r[0].is_number_integer() || !r[1].is_number_integer())
      throw AnnotationError("capture_ranges", "capture_ranges entries must be [int,int]");
    set.capture_ranges.emplace_back(r[0].get<FrameIndex>(), r[1].get<FrameIndex>());
  }
  const json& labels = field("attribute_labels");
  if (!labels.is_object()) throw AnnotationError("attribute_labels", "attribute_labels must be an object");
  for (const auto& [key, entry] : labels.items()) {
    FrameIndex frame = 0;
    std::size_t used = 0;
    try {
      frame = std::stoll(key, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != key.size()) throw AnnotationError("attribute_labels", "attribute_labels key is not a frame index: " + key);
    if (!entry.is_object()) throw AnnotationError("attribute_labels." + key, "attribute entry must be an object");
    AttributeVector attrs;
    for (const auto& [name, value] : entry.items()) {
      const auto a = attr_from_name(name);
      if (!a) throw AnnotationError("attribute_labels." + key + "." + name, "unknown attribute name " + name);
      if (value.is_null()) continue;
      if (!value.is_number()) throw AnnotationError("attribute_labels." + key + "." + name, "attribute must be number or null");
      attrs[*a] = value.get<float>();
    }
    set.attribute_labels[frame] = attrs;
  }
  validate(set);
  return set;
}

AnnotationSet load_annotations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw AnnotationError("document", "annotation file not found: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return annotations_from_json(ss.str());
}

void save_annotations(const AnnotationSet& set, const std::filesystem::path& path) {
  const std::string text = annotations_to_json(set);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw AnnotationError("document", "cannot write " + path.string());
  out << text << '\n';
}

std::vector<float> expand_pce_targets(const std::vector<FrameIndex>& marks, int pad, std::size_t seq_len) {
  std::vector<float> v(seq_len, 0.0f);
  const auto n = static_cast<FrameIndex>(seq_len);
  for (FrameIndex m : marks) {
    const FrameIndex lo = std::max<FrameIndex>(0, m - pad);
    const FrameIndex hi = std::min<FrameIndex>(n - 1, m + pad);
    for (FrameIndex i = lo; i <= hi; ++i) v[static_cast<std::size_t>(i)] = 1.0f;
  }
  return v;
}

TargetTensor shift_laf(const TargetTensor& targets, int laf) {
  if (laf < 0) throw std::invalid_argument("shift_laf: laf must be >= 0");
  TargetTensor out = targets;
  const std::size_t n = targets.size();
  for (std::size_t t = 0; t < n; ++t) {
    if (t < static_cast<std::size_t>(laf)) {
      out.pce[t] = 0.0f;
      out.pce_mask[t] = 0;
    } else {
      out.pce[t] = targets.pce[t - static_cast<std::size_t>(laf)];
      out.pce_mask[t] = targets.pce_mask[t - static_cast<std::size_t>(laf)];
    }
  }
  return out;
}

namespace {

// Output index whose source index is nearest to `src`; ties go to the
// earlier output.
FrameIndex nearest_output(const std::vector<std::size_t>& index_map, FrameIndex src) {
  FrameIndex best = 0;
  FrameIndex best_dist = -1;
  for (std::size_t j = 0; j < index_map.size(); ++j) {
    const FrameIndex d = std::abs(static_cast<FrameIndex>(index_map[j]) - src);
    if (best_dist < 0 || d < best_dist) {
      best = static_cast<FrameIndex>(j);
      best_dist = d;
    }
  }
  return best;
}

}  // namespace

AnnotationSet remap_labels(const AnnotationSet& set, const std::vector<std::size_t>& index_map) {
  AnnotationSet out;
  out.video_id = set.video_id;
  out.fps = set.fps;
  if (index_map.empty()) return out;
  for (FrameIndex m : set.pce_marks) {
    const FrameIndex j = nearest_output(index_map, m);
    if (out.pce_marks.empty() || j > out.pce_marks.back()) out.pce_marks.push_back(j);
  }
  for (const auto& [s, e] : set.capture_ranges) {
    FrameIndex a = nearest_output(index_map, s);
    const FrameIndex b = nearest_output(index_map, e);
    // Neighbouring ranges can collapse onto one output frame when
    // downsampling; keep the mapped ranges disjoint.
    if (!out.capture_ranges.empty()) a = std::max(a, out.capture_ranges.back().second + 1);
    if (a <= b) out.capture_ranges.emplace_back(a, b);
  }
  for (std::size_t j = 0; j < index_map.size(); ++j) {
    const auto it = set.attribute_labels.find(static_cast<FrameIndex>(index_map[j]));
    if (it != set.attribute_labels.end()) out.attribute_labels[static_cast<FrameIndex>(j)] = it->second;
  }
  return out;
}

TargetTensor build_targets(const AnnotationSet& set, std::size_t seq_len, int pad, int laf,
                           const std::vector<AttrValues>* soft_labels) {
  if (soft_labels != nullptr && soft_labels->size() != seq_len)
    throw std::invalid_argument("build_targets: soft label count does not match sequence length");
  TargetTensor t;
  t.pce = expand_pce_targets(set.pce_marks, pad, seq_len);
  t.pce_mask.assign(seq_len, 1);
  t.attrs.assign(seq_len, AttrValues{});
  t.attr_mask.assign(seq_len, {});
  if (soft_labels != nullptr) {
    for (std::size_t i = 0; i < seq_len; ++i) {
      t.attrs[i] = (*soft_labels)[i];
      t.attr_mask[i].fill(1);
    }
  } else {
    for (const auto& [frame, attrs] : set.attribute_labels) {
      if (frame < 0 || static_cast<std::size_t>(frame) >= seq_len) continue;
      const auto i = static_cast<std::size_t>(frame);
      for (std::size_t k = 0; k < attrs.values.size(); ++k) {
        if (!attrs.values[k]) continue;
        t.attrs[i][k] = *attrs.values[k];
        t.attr_mask[i][k] = 1;
      }
    }
  }
  return shift_laf(t, laf);
}

}  // namespace vidscan
