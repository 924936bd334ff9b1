#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "mosest/ivector/stats.hpp"

namespace mosest::ivector {

/// Total-variability model: supervector mean and diagonal covariance come
/// from the UBM (component-major, index k*F + f); T is (K*F) x D.
struct TvMatrix {
  Matrix t;
  Vector mean;
  Vector variance;
  Eigen::Index components = 0;
  Eigen::Index feature_dim = 0;

  Eigen::Index dim() const { return t.cols(); }
  Eigen::Index supervector_dim() const { return components * feature_dim; }

  void validate() const {
    if (t.rows() != supervector_dim() || mean.size() != supervector_dim() || variance.size() != supervector_dim())
      throw InvalidArgument("tv: inconsistent shapes");
    if (dim() < 1 || dim() > supervector_dim()) throw InvalidArgument("tv: dimension must be in [1, K*F]");
    if (!t.allFinite()) throw InvalidArgument("tv: non-finite T");
  }
};

inline Vector supervector(const Matrix& per_component) {
  Vector v(per_component.size());
  for (Eigen::Index k = 0; k < per_component.rows(); ++k)
    v.segment(k * per_component.cols(), per_component.cols()) = per_component.row(k).transpose();
  return v;
}

struct TvParams {
  Eigen::Index dim = 400;
  std::size_t iterations = 10;
  double init_sd = 0.1;  ///< N(0, 0.01)
  double ridge = 1e-6;
  std::size_t jobs = 1;
};

struct TvResult {
  TvMatrix tv;
  /// objective of the model entering each iteration, followed by the final value
  std::vector<double> objective;
};

namespace detail {

inline void check_stats(const TvMatrix& tv, const SufficientStats& s) {
  if (s.n.size() != tv.components || s.f.rows() != tv.components || s.f.cols() != tv.feature_dim)
    throw InvalidArgument("i-vector: stats do not match the model dimensions");
  if (!s.n.allFinite() || !s.f.allFinite()) throw InvalidArgument("i-vector: non-finite statistics");
}

/// Per-component T_k' S_k^-1 T_k, vectorized as the columns of a D^2 x K
/// matrix, and S^-1 T.
struct TvCache {
  Matrix tst;
  Matrix sinv_t;

  explicit TvCache(const TvMatrix& tv) {
    const Eigen::Index d = tv.dim();
    sinv_t = tv.variance.cwiseInverse().asDiagonal() * tv.t;
    tst.resize(d * d, tv.components);
    for (Eigen::Index k = 0; k < tv.components; ++k) {
      const auto rows = Eigen::seqN(k * tv.feature_dim, tv.feature_dim);
      Eigen::Map<Matrix>(tst.col(k).data(), d, d).noalias() =
          tv.t(rows, Eigen::all).transpose() * sinv_t(rows, Eigen::all);
    }
  }
};

struct Posterior {
  Vector mean;
  Matrix cov;
  double objective = 0.0;  ///< 0.5 b'L^-1 b - 0.5 log|L|
};

inline Posterior posterior(const TvMatrix& tv, const TvCache& c, const SufficientStats& s, bool need_cov) {
  const Eigen::Index d = tv.dim();
  Matrix l = Matrix::Identity(d, d);
  Eigen::Map<Vector>(l.data(), d * d).noalias() += c.tst * s.n;
  const Vector b = c.sinv_t.transpose() * supervector(s.f);
  Eigen::LLT<Matrix> llt(l);
  if (llt.info() != Eigen::Success) throw SingularSystem("i-vector: posterior precision is not positive definite");
  Posterior p;
  p.mean = llt.solve(b);
  if (need_cov) p.cov = llt.solve(Matrix::Identity(d, d));
  const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  p.objective = 0.5 * b.dot(p.mean) - 0.5 * logdet;
  return p;
}

}  // namespace detail

/// w = (I + T' S^-1 N T)^-1 T' S^-1 F
inline Vector extract_ivector(const TvMatrix& tv, const SufficientStats& s) {
  detail::check_stats(tv, s);
  return detail::posterior(tv, detail::TvCache(tv), s, false).mean;
}

/// Batch extraction sharing one cache.
inline std::vector<Vector> extract_ivectors(const TvMatrix& tv, std::span<const SufficientStats> stats,
                                            std::size_t jobs = 1) {
  for (const auto& s : stats) detail::check_stats(tv, s);
  const detail::TvCache cache(tv);
  std::vector<Vector> out(stats.size());
  parallel_for(stats.size(), jobs, [&](std::size_t i) { out[i] = detail::posterior(tv, cache, stats[i], false).mean; });
  return out;
}

/// Sum over utterances of 0.5 b'L^-1 b - 0.5 log|L|: the T-dependent part of
/// the stats log-likelihood with alignments and covariances held fixed.
inline double tv_objective(const TvMatrix& tv, std::span<const SufficientStats> stats) {
  const detail::TvCache cache(tv);
  double total = 0.0;
  for (const auto& s : stats) total += detail::posterior(tv, cache, s, false).objective;
  return total;
}

inline TvResult train_tv(const GmmModel& ubm, std::span<const SufficientStats> stats, const TvParams& p, Rng& rng) {
  const Eigen::Index k_count = ubm.components(), f_dim = ubm.dim();
  TvResult r;
  auto& tv = r.tv;
  tv.components = k_count;
  tv.feature_dim = f_dim;
  tv.mean = supervector(ubm.means);
  tv.variance = supervector(ubm.variances);
  if (p.dim < 1 || p.dim > tv.supervector_dim())
    throw InvalidArgument("train_tv: dimension must be in [1, " + std::to_string(tv.supervector_dim()) + "]");
  if (stats.empty()) throw InvalidArgument("train_tv: no utterances");
  for (const auto& s : stats) detail::check_stats(tv, s);
  if (stats.size() < static_cast<std::size_t>(p.dim))
    log::warn("train_tv: fewer utterances (" + std::to_string(stats.size()) + ") than i-vector dimensions (" +
              std::to_string(p.dim) + ")");
  tv.t.resize(tv.supervector_dim(), p.dim);
  for (Eigen::Index j = 0; j < tv.t.cols(); ++j)
    for (Eigen::Index i = 0; i < tv.t.rows(); ++i) tv.t(i, j) = rng.normal(0.0, p.init_sd);

  const Eigen::Index d = p.dim;
  // utterances per accumulation step; fixed so sums never depend on jobs
  const std::size_t chunk = 32;
  for (std::size_t it = 0; it <= p.iterations; ++it) {
    const detail::TvCache cache(tv);
    const bool last = it == p.iterations;
    Matrix a = Matrix::Zero(last ? 0 : d * d, k_count);
    Matrix c = Matrix::Zero(last ? 0 : tv.supervector_dim(), d);
    double obj = 0.0;
    for (std::size_t lo = 0; lo < stats.size(); lo += chunk) {
      const std::size_t len = std::min(chunk, stats.size() - lo);
      std::vector<detail::Posterior> post(len);
      parallel_for(len, p.jobs, [&](std::size_t i) { post[i] = detail::posterior(tv, cache, stats[lo + i], !last); });
      for (const auto& q : post) obj += q.objective;
      if (last) continue;
      Matrix eww(d * d, static_cast<Eigen::Index>(len));
      Matrix counts(static_cast<Eigen::Index>(len), k_count);
      for (std::size_t i = 0; i < len; ++i) {
        const auto col = static_cast<Eigen::Index>(i);
        Eigen::Map<Matrix>(eww.col(col).data(), d, d) = post[i].cov + post[i].mean * post[i].mean.transpose();
        counts.row(col) = stats[lo + i].n.transpose();
        c.noalias() += supervector(stats[lo + i].f) * post[i].mean.transpose();
      }
      a.noalias() += eww * counts;
    }
    r.objective.push_back(obj);
    if (last) break;
    // T_k = C_k A_k^-1, solved as A_k T_k' = C_k'
    for (Eigen::Index k = 0; k < k_count; ++k) {
      Matrix ak = Eigen::Map<const Matrix>(a.col(k).data(), d, d);
      if (ak.isZero(0.0)) continue;  // no evidence for this component
      const auto rows = Eigen::seqN(k * f_dim, f_dim);
      Eigen::LLT<Matrix> llt(ak);
      bool ok = llt.info() == Eigen::Success;
      if (ok) {
        const Vector diag = llt.matrixLLT().diagonal();
        ok = diag.minCoeff() > 1e-7 * diag.maxCoeff();
      }
      if (!ok) {
        log::warn("train_tv: ill-conditioned M-step for component " + std::to_string(k) + "; adding ridge");
        ak.diagonal().array() += p.ridge * std::max(1.0, ak.diagonal().maxCoeff());
        llt.compute(ak);
        if (llt.info() != Eigen::Success) throw SingularSystem("train_tv: M-step system singular after ridge");
      }
      tv.t(rows, Eigen::all) = llt.solve(c(rows, Eigen::all).transpose()).transpose();
    }
    if (!tv.t.allFinite()) throw TrainingDiverged("train_tv: non-finite T after M-step");
  }
  return r;
}

}  // namespace mosest::ivector
