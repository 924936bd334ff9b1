#pragma once

#include <algorithm>
#include <cmath>

#include "mosest/nn/layers.hpp"

namespace mosest::nn {

struct GradCheckOptions {
  double step = 1e-5;
  bool training = false;
  std::uint64_t seed = 0;  ///< reseeded before every forward so dropout masks repeat
};

struct GradCheckResult {
  double input_error = 0.0;
  double param_error = 0.0;
  double max_error() const { return std::max(input_error, param_error); }
};

/// ||a - b|| / max(||a|| + ||b||, tiny)
inline double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double denom = std::sqrt(na) + std::sqrt(nb);
  return denom < 1e-300 ? 0.0 : std::sqrt(diff) / denom;
}

/// Compares backward() against central differences of the scalar
/// L = sum(r .* layer(x)) for a fixed random projection r.
template <typename Fwd, typename Bwd>
GradCheckResult check_gradients(Fwd&& forward, Bwd&& backward, Tensor<double>& x,
                                const std::vector<Param<double>*>& params, Rng& rng,
                                const GradCheckOptions& opt = {}) {
  const Tensor<double> y0 = forward(x);
  Tensor<double> r(y0.shape);
  for (auto& v : r.data) v = rng.uniform(-1.0, 1.0);
  auto loss = [&] {
    const auto y = forward(x);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += r[i] * y[i];
    return s;
  };
  for (auto* p : params) std::fill(p->grad.data.begin(), p->grad.data.end(), 0.0);
  forward(x);
  const Tensor<double> dx = backward(r);
  std::vector<double> analytic_p;
  for (auto* p : params) analytic_p.insert(analytic_p.end(), p->grad.data.begin(), p->grad.data.end());

  auto numeric = [&](std::vector<double>& v) {
    std::vector<double> g(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double keep = v[i];
      v[i] = keep + opt.step;
      const double up = loss();
      v[i] = keep - opt.step;
      const double down = loss();
      v[i] = keep;
      g[i] = (up - down) / (2.0 * opt.step);
    }
    return g;
  };
  GradCheckResult res;
  res.input_error = relative_error(dx.data, numeric(x.data));
  std::vector<double> numeric_p;
  for (auto* p : params) {
    const auto g = numeric(p->value.data);
    numeric_p.insert(numeric_p.end(), g.begin(), g.end());
  }
  res.param_error = relative_error(analytic_p, numeric_p);
  return res;
}

template <typename L>
GradCheckResult check_layer(L& layer, Tensor<double> x, Rng& rng, const GradCheckOptions& opt = {}) {
  auto fwd = [&](const Tensor<double>& in) {
    Rng mask_rng(opt.seed);
    return layer.forward(in, ForwardContext{opt.training, &mask_rng});
  };
  auto bwd = [&](const Tensor<double>& dy) { return layer.backward(dy); };
  return check_gradients(fwd, bwd, x, layer.params(), rng, opt);
}

}  // namespace mosest::nn
