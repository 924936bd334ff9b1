#pragma once

#include "mosest/nn/tensor.hpp"

namespace mosest::nn {

template <typename T>
struct LossResult {
  double loss = 0.0;
  Tensor<T> grad;
};

/// Mean of squared differences over all elements; gradient 2(p - t)/n.
template <typename T>
LossResult<T> mse_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  if (pred.size() != target.size()) throw InvalidArgument("mse_loss: size mismatch");
  if (pred.size() == 0) throw InvalidArgument("mse_loss: empty input");
  LossResult<T> r{0.0, Tensor<T>(pred.shape)};
  const double n = static_cast<double>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = static_cast<double>(pred[i]) - static_cast<double>(target[i]);
    r.loss += d * d;
    r.grad[i] = static_cast<T>(2.0 * d / n);
  }
  r.loss /= n;
  return r;
}

}  // namespace mosest::nn
