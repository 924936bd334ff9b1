#pragma once

#include "mosest/ivector/gmm.hpp"

namespace mosest::ivector {

/// Zeroth-order counts and first-order statistics centered on the UBM means.
struct SufficientStats {
  Vector n;  ///< K
  Matrix f;  ///< K x F
  double frames = 0.0;

  SufficientStats scaled(double alpha) const { return {alpha * n, alpha * f, alpha * frames}; }
};

inline SufficientStats baum_welch_stats(const GmmModel& g, const Matrix& frames) {
  if (frames.rows() == 0) throw InvalidArgument("baum_welch_stats: empty utterance");
  if (frames.cols() != g.dim()) throw InvalidArgument("baum_welch_stats: frame dimension mismatch");
  if (!frames.allFinite()) throw InvalidArgument("baum_welch_stats: non-finite frames");
  SufficientStats s{Vector::Zero(g.components()), Matrix::Zero(g.components(), g.dim()),
                    static_cast<double>(frames.rows())};
  for (Eigen::Index lo = 0; lo < frames.rows(); lo += kBlockFrames) {
    const Eigen::Index len = std::min(kBlockFrames, frames.rows() - lo);
    const Matrix x = frames.middleRows(lo, len);
    const Matrix gamma = g.posteriors(x);
    s.n += gamma.colwise().sum().transpose();
    s.f += gamma.transpose() * x;
  }
  // center: sum_t g_tk (o_t - m_k) = F_k - N_k m_k
  s.f -= s.n.asDiagonal() * g.means;
  return s;
}

}  // namespace mosest::ivector
