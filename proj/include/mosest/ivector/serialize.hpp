#pragma once

#include <filesystem>

#include "mosest/io/container.hpp"
#include "mosest/ivector/tv.hpp"

namespace mosest::ivector {

namespace detail {

inline std::vector<double> flatten(const Matrix& m) {
  std::vector<double> v(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) v[static_cast<std::size_t>(r * m.cols() + c)] = m(r, c);
  return v;
}

inline Matrix unflatten(const io::NamedTensor& t) {
  if (t.shape.size() != 2) throw FormatError("tensor '" + t.name + "' must be rank 2");
  Matrix m(static_cast<Eigen::Index>(t.shape[0]), static_cast<Eigen::Index>(t.shape[1]));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = t.values[static_cast<std::size_t>(r * m.cols() + c)];
  return m;
}

inline Vector unflatten_vector(const io::NamedTensor& t) {
  if (t.shape.size() != 1) throw FormatError("tensor '" + t.name + "' must be rank 1");
  return Eigen::Map<const Vector>(t.values.data(), static_cast<Eigen::Index>(t.values.size()));
}

}  // namespace detail

inline void save_ubm(const GmmModel& g, const std::filesystem::path& path) {
  io::Container c;
  c.kind = io::ContentKind::kUbm;
  c.metadata = "gmm diagonal";
  c.add("weights", {static_cast<std::uint64_t>(g.components())}, {g.weights.data(), g.weights.data() + g.weights.size()});
  c.add("means", {static_cast<std::uint64_t>(g.means.rows()), static_cast<std::uint64_t>(g.means.cols())},
        detail::flatten(g.means));
  c.add("variances", {static_cast<std::uint64_t>(g.variances.rows()), static_cast<std::uint64_t>(g.variances.cols())},
        detail::flatten(g.variances));
  io::save(c, path);
}

inline GmmModel load_ubm(const std::filesystem::path& path) {
  const auto c = io::load(path, io::ContentKind::kUbm);
  GmmModel g{detail::unflatten_vector(c.at("weights")), detail::unflatten(c.at("means")),
             detail::unflatten(c.at("variances"))};
  g.validate();
  return g;
}

inline void save_tv(const TvMatrix& tv, const std::filesystem::path& path) {
  io::Container c;
  c.kind = io::ContentKind::kTotalVariability;
  c.metadata = "components=" + std::to_string(tv.components) + " feature_dim=" + std::to_string(tv.feature_dim);
  c.add("t", {static_cast<std::uint64_t>(tv.t.rows()), static_cast<std::uint64_t>(tv.t.cols())}, detail::flatten(tv.t));
  c.add("mean", {static_cast<std::uint64_t>(tv.mean.size())}, {tv.mean.data(), tv.mean.data() + tv.mean.size()});
  c.add("variance", {static_cast<std::uint64_t>(tv.variance.size())},
        {tv.variance.data(), tv.variance.data() + tv.variance.size()});
  c.add("layout", {2}, {static_cast<double>(tv.components), static_cast<double>(tv.feature_dim)});
  io::save(c, path);
}

inline TvMatrix load_tv(const std::filesystem::path& path) {
  const auto c = io::load(path, io::ContentKind::kTotalVariability);
  const auto& layout = c.at("layout").values;
  if (layout.size() != 2) throw FormatError("tv: bad layout tensor");
  TvMatrix tv{detail::unflatten(c.at("t")), detail::unflatten_vector(c.at("mean")),
              detail::unflatten_vector(c.at("variance")), static_cast<Eigen::Index>(layout[0]),
              static_cast<Eigen::Index>(layout[1])};
  tv.validate();
  return tv;
}

}  // namespace mosest::ivector
