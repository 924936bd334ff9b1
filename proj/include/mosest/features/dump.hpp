#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mosest/core/error.hpp"
#include "mosest/io/container.hpp"

namespace mosest::features {

enum class FeatureKind { kCqt, kMel, kIvector };

inline const char* to_string(FeatureKind k) {
  switch (k) {
    case FeatureKind::kCqt: return "cqt";
    case FeatureKind::kMel: return "mel";
    case FeatureKind::kIvector: return "ivec";
  }
  return "?";
}

inline FeatureKind parse_feature_kind(const std::string& s) {
  if (s == "cqt") return FeatureKind::kCqt;
  if (s == "mel") return FeatureKind::kMel;
  if (s == "ivec") return FeatureKind::kIvector;
  throw InvalidArgument("unknown feature kind '" + s + "'");
}

/// Row-major matrix as stored on disk (float32).
struct FeatureMatrix {
  FeatureKind kind = FeatureKind::kMel;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  std::span<const double> row(std::size_t r) const { return {values.data() + r * cols, cols}; }
};

/// Values are rounded to float32 on encode so a decoded matrix equals what
/// was written bit for bit.
inline io::Container to_container(const FeatureMatrix& m) {
  if (m.values.size() != m.rows * m.cols) throw InvalidArgument("feature matrix shape mismatch");
  io::Container c;
  c.kind = io::ContentKind::kFeatures;
  c.metadata = std::string("features=") + to_string(m.kind);
  std::vector<double> v(m.values.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(static_cast<float>(m.values[i]));
  c.add("values", {m.rows, m.cols}, std::move(v), io::DType::kFloat32);
  return c;
}

inline FeatureMatrix from_container(const io::Container& c) {
  if (c.kind != io::ContentKind::kFeatures) throw KindMismatch("container does not hold features");
  const std::string prefix = "features=";
  if (c.metadata.rfind(prefix, 0) != 0) throw FormatError("feature container missing kind tag");
  const auto& t = c.at("values");
  if (t.shape.size() != 2) throw FormatError("feature tensor must be rank 2");
  return {parse_feature_kind(c.metadata.substr(prefix.size())), static_cast<std::size_t>(t.shape[0]),
          static_cast<std::size_t>(t.shape[1]), t.values};
}

inline void save_features(const FeatureMatrix& m, const std::filesystem::path& path) {
  io::save(to_container(m), path);
}

inline FeatureMatrix load_features(const std::filesystem::path& path) {
  return from_container(io::load(path, io::ContentKind::kFeatures));
}

/// Loads and checks kind and width.
inline FeatureMatrix load_features(const std::filesystem::path& path, FeatureKind kind, std::size_t cols) {
  auto m = load_features(path);
  if (m.kind != kind)
    throw KindMismatch(path.string() + ": holds " + to_string(m.kind) + " features, expected " + to_string(kind));
  if (m.cols != cols)
    throw FormatError(path.string() + ": feature width " + std::to_string(m.cols) + ", expected " + std::to_string(cols));
  return m;
}

}  // namespace mosest::features
