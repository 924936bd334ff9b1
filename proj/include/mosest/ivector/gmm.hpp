#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "mosest/core/error.hpp"
#include "mosest/core/log.hpp"
#include "mosest/core/parallel.hpp"
#include "mosest/core/rng.hpp"

namespace mosest::ivector {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr double kVarianceFloor = 1e-4;
/// Frames per E-step block. Fixed so accumulation order never depends on
/// the thread count.
inline constexpr Eigen::Index kBlockFrames = 2048;

/// Diagonal-covariance mixture. means/variances are K x F.
struct GmmModel {
  Vector weights;
  Matrix means;
  Matrix variances;

  Eigen::Index components() const { return weights.size(); }
  Eigen::Index dim() const { return means.cols(); }

  void validate(double floor = kVarianceFloor) const {
    if (components() == 0 || means.rows() != components() || variances.rows() != components() ||
        variances.cols() != dim())
      throw InvalidArgument("gmm: inconsistent shapes");
    if ((weights.array() < 0.0).any() || std::abs(weights.sum() - 1.0) > 1e-9)
      throw InvalidArgument("gmm: weights must be nonnegative and sum to 1");
    if ((variances.array() < floor * (1.0 - 1e-12)).any()) throw InvalidArgument("gmm: variance below floor");
    if (!means.allFinite() || !variances.allFinite()) throw InvalidArgument("gmm: non-finite parameters");
  }

  /// Per-frame, per-component log(w_k N(o_t; m_k, s_k)); rows of x are frames.
  Matrix log_joint(const Matrix& x) const {
    const Matrix inv = variances.cwiseInverse();
    const Vector bias = [&] {
      Vector b(components());
      const double c = static_cast<double>(dim()) * std::log(2.0 * std::numbers::pi);
      for (Eigen::Index k = 0; k < components(); ++k) {
        const double quad = (means.row(k).array().square() * inv.row(k).array()).sum();
        b(k) = std::log(weights(k)) - 0.5 * (c + variances.row(k).array().log().sum() + quad);
      }
      return b;
    }();
    Matrix out = -0.5 * (x.array().square().matrix() * inv.transpose()) +
                 x * (means.cwiseProduct(inv)).transpose();
    out.rowwise() += bias.transpose();
    return out;
  }

  /// Responsibilities (rows sum to 1) and the per-frame log-likelihoods.
  Matrix posteriors(const Matrix& x, Vector* frame_ll = nullptr) const {
    Matrix lj = log_joint(x);
    if (frame_ll) frame_ll->resize(x.rows());
    for (Eigen::Index t = 0; t < lj.rows(); ++t) {
      const double mx = lj.row(t).maxCoeff();
      double s = 0.0;
      for (Eigen::Index k = 0; k < lj.cols(); ++k) {
        lj(t, k) = std::exp(lj(t, k) - mx);
        s += lj(t, k);
      }
      lj.row(t) /= s;
      if (frame_ll) (*frame_ll)(t) = mx + std::log(s);
    }
    return lj;
  }

  double log_likelihood(const Matrix& x) const {
    Vector ll;
    posteriors(x, &ll);
    return ll.sum();
  }
};

struct UbmParams {
  Eigen::Index components = 64;
  std::size_t iterations = 20;
  std::size_t kmeans_iterations = 5;
  double variance_floor = kVarianceFloor;
  std::size_t jobs = 1;
};

struct UbmResult {
  GmmModel model;
  /// total log-likelihood of the training frames under the model entering
  /// each iteration, followed by the final model's value
  std::vector<double> log_likelihood;
};

namespace detail {

struct EmAccum {
  Vector n;
  Matrix f;
  Matrix s;
  double ll = 0.0;
};

inline EmAccum accumulate(const GmmModel& g, const Matrix& x, std::size_t jobs) {
  const Eigen::Index blocks = (x.rows() + kBlockFrames - 1) / kBlockFrames;
  std::vector<EmAccum> parts(static_cast<std::size_t>(blocks));
  parallel_for(parts.size(), jobs, [&](std::size_t b) {
    const Eigen::Index lo = static_cast<Eigen::Index>(b) * kBlockFrames;
    const Eigen::Index len = std::min(kBlockFrames, x.rows() - lo);
    const Matrix xb = x.middleRows(lo, len);
    Vector ll;
    const Matrix gamma = g.posteriors(xb, &ll);
    parts[b] = {gamma.colwise().sum().transpose(), gamma.transpose() * xb,
                gamma.transpose() * xb.array().square().matrix(), ll.sum()};
  });
  EmAccum total{Vector::Zero(g.components()), Matrix::Zero(g.components(), g.dim()),
                Matrix::Zero(g.components(), g.dim()), 0.0};
  for (const auto& p : parts) {
    total.n += p.n;
    total.f += p.f;
    total.s += p.s;
    total.ll += p.ll;
  }
  return total;
}

/// k-means++ seeding followed by a few Lloyd steps; hard clusters give the
/// initial mixture.
inline GmmModel kmeans_init(const Matrix& x, Eigen::Index k, const UbmParams& p, Rng& rng) {
  const Eigen::Index n = x.rows();
  Matrix centers(k, x.cols());
  centers.row(0) = x.row(static_cast<Eigen::Index>(rng.uniform_index(static_cast<std::uint64_t>(n))));
  Vector d2 = (x.rowwise() - centers.row(0)).rowwise().squaredNorm();
  for (Eigen::Index c = 1; c < k; ++c) {
    const double total = d2.sum();
    Eigen::Index pick = n - 1;
    if (total > 0.0) {
      double r = rng.uniform() * total, acc = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += d2(i);
        if (acc > r) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<Eigen::Index>(rng.uniform_index(static_cast<std::uint64_t>(n)));
    }
    centers.row(c) = x.row(pick);
    d2 = d2.cwiseMin((x.rowwise() - centers.row(c)).rowwise().squaredNorm());
  }
  std::vector<Eigen::Index> label(static_cast<std::size_t>(n), 0);
  auto assign = [&] {
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::Index best = 0;
      (centers.rowwise() - x.row(i)).rowwise().squaredNorm().minCoeff(&best);
      label[static_cast<std::size_t>(i)] = best;
    }
  };
  for (std::size_t it = 0; it <= p.kmeans_iterations; ++it) {
    assign();
    if (it == p.kmeans_iterations) break;
    Matrix sum = Matrix::Zero(k, x.cols());
    Vector cnt = Vector::Zero(k);
    for (Eigen::Index i = 0; i < n; ++i) {
      sum.row(label[static_cast<std::size_t>(i)]) += x.row(i);
      cnt(label[static_cast<std::size_t>(i)]) += 1.0;
    }
    for (Eigen::Index c = 0; c < k; ++c)
      if (cnt(c) > 0.0) centers.row(c) = sum.row(c) / cnt(c);
  }
  const Vector global_var =
      ((x.rowwise() - x.colwise().mean()).array().square().colwise().sum() / static_cast<double>(n))
          .transpose()
          .cwiseMax(p.variance_floor);
  GmmModel g{Vector::Zero(k), centers, Matrix::Zero(k, x.cols())};
  Matrix sq = Matrix::Zero(k, x.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto c = label[static_cast<std::size_t>(i)];
    g.weights(c) += 1.0;
    sq.row(c) += (x.row(i) - centers.row(c)).array().square().matrix();
  }
  for (Eigen::Index c = 0; c < k; ++c) {
    if (g.weights(c) > 1.0) g.variances.row(c) = (sq.row(c) / g.weights(c)).cwiseMax(p.variance_floor);
    else g.variances.row(c) = global_var.transpose();
    g.weights(c) = std::max(g.weights(c), 1.0);
  }
  g.weights /= g.weights.sum();
  return g;
}

}  // namespace detail

/// Maximum-likelihood EM for a diagonal GMM over the rows of `frames`.
inline UbmResult train_ubm(const Matrix& frames, const UbmParams& p, Rng& rng) {
  if (p.components < 1) throw InvalidArgument("train_ubm: need at least one component");
  if (p.components > frames.rows())
    throw InvalidArgument("train_ubm: more components (" + std::to_string(p.components) + ") than frames (" +
                          std::to_string(frames.rows()) + ")");
  if (!frames.allFinite()) throw InvalidArgument("train_ubm: non-finite frames");
  UbmResult r;
  r.model = detail::kmeans_init(frames, p.components, p, rng);
  const double n = static_cast<double>(frames.rows());
  for (std::size_t it = 0; it < p.iterations; ++it) {
    const auto acc = detail::accumulate(r.model, frames, p.jobs);
    r.log_likelihood.push_back(acc.ll);
    GmmModel next = r.model;
    for (Eigen::Index k = 0; k < p.components; ++k) {
      next.weights(k) = acc.n(k) / n;
      if (acc.n(k) <= 0.0) continue;  // component starved: keep its shape, weight drops to zero
      next.means.row(k) = acc.f.row(k) / acc.n(k);
      next.variances.row(k) =
          (acc.s.row(k) / acc.n(k) - next.means.row(k).array().square().matrix()).cwiseMax(p.variance_floor);
    }
    next.weights /= next.weights.sum();
    r.model = std::move(next);
  }
  r.log_likelihood.push_back(detail::accumulate(r.model, frames, p.jobs).ll);
  return r;
}

}  // namespace mosest::ivector
