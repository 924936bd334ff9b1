#pragma once

#include <cmath>

#include <Eigen/Dense>

#include "mosest/core/error.hpp"
#include "mosest/core/rng.hpp"

namespace mosest::nn {

/// Single hidden layer with fixed random input weights and sigmoid units;
/// only the output weights are fitted, by ridge least squares.
struct ElmModel {
  Eigen::MatrixXd input_weights;  ///< hidden x in
  Eigen::VectorXd input_bias;     ///< hidden
  Eigen::VectorXd beta;           ///< hidden
  double lambda = 1e-6;

  Eigen::Index inputs() const { return input_weights.cols(); }
  Eigen::Index hidden() const { return input_weights.rows(); }
};

inline ElmModel make_elm(Eigen::Index inputs, Eigen::Index hidden, Rng& rng, double lambda = 1e-6) {
  if (inputs < 1 || hidden < 1) throw InvalidArgument("elm: sizes must be positive");
  ElmModel m{Eigen::MatrixXd(hidden, inputs), Eigen::VectorXd(hidden), Eigen::VectorXd::Zero(hidden), lambda};
  for (Eigen::Index j = 0; j < inputs; ++j)
    for (Eigen::Index i = 0; i < hidden; ++i) m.input_weights(i, j) = rng.uniform(-1.0, 1.0);
  for (Eigen::Index i = 0; i < hidden; ++i) m.input_bias(i) = rng.uniform(-1.0, 1.0);
  return m;
}

/// Rows of x are samples.
inline Eigen::MatrixXd elm_hidden(const ElmModel& m, const Eigen::MatrixXd& x) {
  if (x.cols() != m.inputs()) throw InvalidArgument("elm: input width mismatch");
  Eigen::MatrixXd z = x * m.input_weights.transpose();
  z.rowwise() += m.input_bias.transpose();
  return (1.0 + (-z.array()).exp()).inverse().matrix();
}

/// Solves (H'H + lambda I) beta = H'y.
inline Eigen::VectorXd elm_fit(const Eigen::MatrixXd& h, const Eigen::VectorXd& y, double lambda) {
  if (h.rows() != y.size()) throw InvalidArgument("elm_fit: row count does not match targets");
  if (lambda < 0.0) throw InvalidArgument("elm_fit: negative ridge");
  Eigen::MatrixXd a = h.transpose() * h;
  a.diagonal().array() += lambda;
  const Eigen::VectorXd rhs = h.transpose() * y;
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  bool ok = llt.info() == Eigen::Success;
  if (ok) {
    const Eigen::VectorXd d = llt.matrixLLT().diagonal();
    ok = d.minCoeff() > 1e-7 * d.maxCoeff();
  }
  if (!ok) throw SingularSystem("elm_fit: normal equations are singular; use a positive ridge");
  Eigen::VectorXd beta = llt.solve(rhs);
  if (!beta.allFinite()) throw SingularSystem("elm_fit: non-finite solution");
  return beta;
}

inline void elm_train(ElmModel& m, const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  m.beta = elm_fit(elm_hidden(m, x), y, m.lambda);
}

inline Eigen::VectorXd elm_predict(const ElmModel& m, const Eigen::MatrixXd& x) { return elm_hidden(m, x) * m.beta; }

inline double ridge_objective(const Eigen::MatrixXd& h, const Eigen::VectorXd& y, const Eigen::VectorXd& beta,
                              double lambda) {
  return (h * beta - y).squaredNorm() + lambda * beta.squaredNorm();
}

}  // namespace mosest::nn
