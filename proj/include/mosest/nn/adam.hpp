#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "mosest/nn/layers.hpp"

namespace mosest::nn {

struct AdamParams {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam over a fixed parameter list.
template <typename T>
class Adam {
 public:
  Adam(std::vector<Param<T>*> params, AdamParams hp = {}) : params_(std::move(params)), hp_(hp) {
    for (auto* p : params_) {
      m_.emplace_back(p->value.shape);
      v_.emplace_back(p->value.shape);
    }
  }

  const AdamParams& hyper() const noexcept { return hp_; }
  std::uint64_t steps() const noexcept { return t_; }
  const std::vector<Tensor<T>>& first_moments() const noexcept { return m_; }
  const std::vector<Tensor<T>>& second_moments() const noexcept { return v_; }

  void restore(std::uint64_t t, std::vector<Tensor<T>> m, std::vector<Tensor<T>> v) {
    if (m.size() != m_.size() || v.size() != v_.size()) throw InvalidArgument("adam: state does not match parameters");
    for (std::size_t i = 0; i < m.size(); ++i)
      if (m[i].shape != m_[i].shape || v[i].shape != v_[i].shape) throw InvalidArgument("adam: state shape mismatch");
    t_ = t;
    m_ = std::move(m);
    v_ = std::move(v);
  }

  void step() {
    for (auto* p : params_)
      if (!p->grad.all_finite()) throw TrainingDiverged("adam: non-finite gradient in '" + p->name + "'");
    ++t_;
    const double c1 = 1.0 - std::pow(hp_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(hp_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto& value = params_[i]->value.data;
      const auto& grad = params_[i]->grad.data;
      auto& m = m_[i].data;
      auto& v = v_[i].data;
      for (std::size_t j = 0; j < value.size(); ++j) {
        const double g = static_cast<double>(grad[j]);
        const double mj = hp_.beta1 * static_cast<double>(m[j]) + (1.0 - hp_.beta1) * g;
        const double vj = hp_.beta2 * static_cast<double>(v[j]) + (1.0 - hp_.beta2) * g * g;
        m[j] = static_cast<T>(mj);
        v[j] = static_cast<T>(vj);
        if (hp_.lr != 0.0)
          value[j] = static_cast<T>(static_cast<double>(value[j]) - hp_.lr * (mj / c1) / (std::sqrt(vj / c2) + hp_.eps));
      }
    }
  }

 private:
  std::vector<Param<T>*> params_;
  AdamParams hp_;
  std::vector<Tensor<T>> m_, v_;
  std::uint64_t t_ = 0;
};

}  // namespace mosest::nn
