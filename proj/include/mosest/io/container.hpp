#pragma once

// Versioned little-endian binary container used for feature dumps, UBM and
// total-variability models, and checkpoints.
//
//   offset  size  field
//   0       4     magic "MOSQ"
//   4       2     format version
//   6       2     content kind
//   8       4     tensor count
//   12      4     metadata length (bytes of UTF-8 text that follow)
//   16      ...   metadata text
//   then per tensor:
//           2     name length, followed by the name bytes
//           1     element width in bytes (4 = float32, 8 = float64)
//           1     rank, followed by rank x uint64 dimensions
//           ...   row-major elements

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "mosest/core/error.hpp"

namespace mosest::io {

static_assert(std::endian::native == std::endian::little,
              "container I/O assumes a little-endian host");

inline constexpr char kMagic[4] = {'M', 'O', 'S', 'Q'};
inline constexpr std::uint16_t kFormatVersion = 1;
inline constexpr std::size_t kHeaderSize = 16;

enum class ContentKind : std::uint16_t {
  kFeatures = 1,
  kUbm = 2,
  kTotalVariability = 3,
  kCheckpoint = 4,
};

enum class DType : std::uint8_t { kFloat32 = 4, kFloat64 = 8 };

/// Tensor payload. Values are held as double; float32 entries round-trip
/// exactly because every float is representable as a double.
struct NamedTensor {
  std::string name;
  DType dtype = DType::kFloat64;
  std::vector<std::uint64_t> shape;
  std::vector<double> values;

  std::uint64_t element_count() const {
    return std::accumulate(shape.begin(), shape.end(), std::uint64_t{1},
                           std::multiplies<>{});
  }
};

struct Container {
  ContentKind kind = ContentKind::kFeatures;
  std::string metadata;
  std::vector<NamedTensor> tensors;

  const NamedTensor* find(std::string_view name) const {
    for (const auto& t : tensors)
      if (t.name == name) return &t;
    return nullptr;
  }

  const NamedTensor& at(std::string_view name) const {
    if (const auto* t = find(name)) return *t;
    throw FormatError("container has no tensor named '" + std::string(name) + "'");
  }

  NamedTensor& add(std::string name, std::vector<std::uint64_t> shape, std::vector<double> values,
                   DType dtype = DType::kFloat64) {
    tensors.push_back({std::move(name), dtype, std::move(shape), std::move(values)});
    if (tensors.back().element_count() != tensors.back().values.size())
      throw InvalidArgument("tensor '" + tensors.back().name + "' shape does not match data");
    return tensors.back();
  }
};

namespace detail {

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::string_view take(std::size_t n) {
    need(n);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw FormatError("container truncated");
  }
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string encode(const Container& c) {
  std::string out;
  out.append(kMagic, 4);
  detail::put<std::uint16_t>(out, kFormatVersion);
  detail::put<std::uint16_t>(out, static_cast<std::uint16_t>(c.kind));
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(c.tensors.size()));
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(c.metadata.size()));
  out += c.metadata;
  for (const auto& t : c.tensors) {
    if (t.element_count() != t.values.size())
      throw InvalidArgument("tensor '" + t.name + "' shape does not match data");
    detail::put<std::uint16_t>(out, static_cast<std::uint16_t>(t.name.size()));
    out += t.name;
    detail::put<std::uint8_t>(out, static_cast<std::uint8_t>(t.dtype));
    detail::put<std::uint8_t>(out, static_cast<std::uint8_t>(t.shape.size()));
    for (auto d : t.shape) detail::put<std::uint64_t>(out, d);
    if (t.dtype == DType::kFloat32) {
      for (double v : t.values) detail::put<float>(out, static_cast<float>(v));
    } else {
      for (double v : t.values) detail::put<double>(out, v);
    }
  }
  return out;
}

inline Container decode(std::string_view bytes) {
  detail::Reader r(bytes);
  auto magic = r.take(4);
  if (std::memcmp(magic.data(), kMagic, 4) != 0) throw FormatError("bad container magic");
  const auto version = r.get<std::uint16_t>();
  if (version != kFormatVersion)
    throw VersionMismatch("container version " + std::to_string(version) + ", expected " +
                          std::to_string(kFormatVersion));
  Container c;
  c.kind = static_cast<ContentKind>(r.get<std::uint16_t>());
  const auto count = r.get<std::uint32_t>();
  const auto meta_len = r.get<std::uint32_t>();
  c.metadata = std::string(r.take(meta_len));
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    t.name = std::string(r.take(r.get<std::uint16_t>()));
    const auto width = r.get<std::uint8_t>();
    if (width != 4 && width != 8) throw FormatError("bad element width in '" + t.name + "'");
    t.dtype = static_cast<DType>(width);
    const auto rank = r.get<std::uint8_t>();
    for (std::uint8_t d = 0; d < rank; ++d) t.shape.push_back(r.get<std::uint64_t>());
    const auto n = t.element_count();
    if (n > r.remaining() / width) throw FormatError("container truncated in '" + t.name + "'");
    t.values.resize(n);
    for (std::uint64_t k = 0; k < n; ++k)
      t.values[k] = width == 4 ? static_cast<double>(r.get<float>()) : r.get<double>();
    c.tensors.push_back(std::move(t));
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes after container");
  return c;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

/// Writes via a sibling temp file and rename so readers never see a partial file.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
  auto tmp = path;
  tmp += ".partial";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + ": " + ec.message());
}

inline void save(const Container& c, const std::filesystem::path& path) {
  write_file_atomic(path, encode(c));
}

inline Container load(const std::filesystem::path& path) { return decode(read_file(path)); }

inline Container load(const std::filesystem::path& path, ContentKind expected) {
  auto c = load(path);
  if (c.kind != expected)
    throw KindMismatch(path.string() + ": unexpected container content kind " +
                       std::to_string(static_cast<int>(c.kind)));
  return c;
}

}  // namespace mosest::io
