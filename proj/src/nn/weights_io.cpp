#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "vidscan/nn/params.hpp"

namespace vidscan::nn {

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

namespace {

constexpr char kMagic[4] = {'P', 'S', 'N', 'W'};

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& in) : in_(in) {}

  void need(std::size_t n, const char* what) const {
    if (pos_ + n > in_.size())
      throw WeightsError(WeightsErrorKind::Truncated, std::string("weights file truncated while reading ") + what);
  }
  std::uint8_t u8(const char* what) {
    need(1, what);
    return in_[pos_++];
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
  std::string str(std::size_t n, const char* what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
    pos_ += n;
    return s;
  }

 private:
  const std::vector<std::uint8_t>& in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_weights(const ParamStore& store) {
  Writer w;
  w.bytes(kMagic, 4);
  w.u32(kWeightsVersion);
  w.u32(static_cast<std::uint32_t>(store.tensor_count()));
  for (const auto& p : store.params()) {
    w.u32(static_cast<std::uint32_t>(p.name.size()));
    w.bytes(p.name.data(), p.name.size());
    w.u8(0);
    w.u8(static_cast<std::uint8_t>(p.value.rank()));
    for (int d : p.value.shape()) w.u32(static_cast<std::uint32_t>(d));
    for (float v : p.value.values()) w.f32(v);
  }
  return w.take();
}

ParamStore decode_weights(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw WeightsError(WeightsErrorKind::BadMagic, "not a PSNW weights file (bad magic)");
  Reader r(bytes);
  r.str(4, "magic");
  const std::uint32_t version = r.u32("version");
  if (version != kWeightsVersion)
    throw WeightsError(WeightsErrorKind::VersionMismatch, "unsupported weights version " + std::to_string(version));
  const std::uint32_t count = r.u32("tensor count");
  ParamStore store;
  for (std::uint32_t t = 0; t < count; ++t) {
    const std::uint32_t name_len = r.u32("name length");
    std::string name = r.str(name_len, "name");
    const std::uint8_t dtype = r.u8("dtype");
    if (dtype != 0) throw WeightsError(WeightsErrorKind::UnsupportedDtype, "tensor " + name + ": unsupported dtype");
    const std::uint8_t rank = r.u8("rank");
    Shape shape;
    std::size_t n = 1;
    for (int i = 0; i < rank; ++i) {
      shape.push_back(static_cast<int>(r.u32("dims")));
      n *= static_cast<std::size_t>(shape.back());
    }
    r.need(n * 4, "tensor data");
    std::vector<float> data(n);
    for (auto& v : data) {
      v = r.f32("tensor data");
      if (!std::isfinite(v)) throw WeightsError(WeightsErrorKind::NonFinite, "tensor " + name + " contains NaN/Inf");
    }
    if (store.contains(name)) throw WeightsError(WeightsErrorKind::Duplicate, "duplicate tensor " + name);
    store.add(name, Tensor(std::move(shape), std::move(data)));
  }
  return store;
}

void save_weights(const ParamStore& store, const std::filesystem::path& path) {
  const auto bytes = encode_weights(store);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw WeightsError(WeightsErrorKind::Io, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw WeightsError(WeightsErrorKind::Io, "write failed: " + path.string());
}

ParamStore load_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw WeightsError(WeightsErrorKind::Io, "cannot open weights file " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_weights(bytes);
}

}  // namespace vidscan::nn
