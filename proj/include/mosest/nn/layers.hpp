#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mosest/core/rng.hpp"
#include "mosest/nn/tensor.hpp"

namespace mosest::nn {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMatrix<T>>;

/// Trainable tensor with its gradient accumulator.
template <typename T>
struct Param {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;

  Param(std::string n, Shape s) : name(std::move(n)), value(s), grad(s) {}
};

struct ForwardContext {
  bool training = false;
  Rng* rng = nullptr;
};

template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;
  /// Caches what backward() needs.
  virtual Tensor<T> forward(const Tensor<T>& x, const ForwardContext& ctx) = 0;
  /// Adds parameter gradients into Param::grad and returns dL/dx.
  virtual Tensor<T> backward(const Tensor<T>& dy) = 0;
  /// Shape of one sample's output given one sample's input (batch axis excluded).
  virtual Shape output_shape(const Shape& in) const = 0;
  virtual std::string name() const = 0;
  virtual std::vector<Param<T>*> params() { return {}; }
};

namespace detail {

inline std::size_t batch_of(const Shape& s, std::size_t rank, const char* who) {
  if (s.size() != rank) throw InvalidArgument(std::string(who) + ": expected rank " + std::to_string(rank) + " input, got " + shape_string(s));
  return s[0];
}

template <typename T>
void fan_in_uniform(Tensor<T>& w, std::size_t fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (auto& v : w.data) v = static_cast<T>(rng.uniform(-bound, bound));
}

}  // namespace detail

/// y = W x + b over a batch of row vectors; W is out x in.
template <typename T>
class Dense final : public Layer<T> {
 public:
  Dense(std::size_t in, std::size_t out) : in_(in), out_(out), w_("weight", {out, in}), b_("bias", {out}) {}

  void init(Rng& rng) {
    detail::fan_in_uniform(w_.value, in_, rng);
    std::fill(b_.value.data.begin(), b_.value.data.end(), T(0));
  }

  Tensor<T> forward(const Tensor<T>& x, const ForwardContext&) override {
    const std::size_t n = detail::batch_of(x.shape, 2, "dense");
    if (x.dim(1) != in_) throw InvalidArgument("dense: input width " + std::to_string(x.dim(1)) + ", expected " + std::to_string(in_));
    x_ = x;
    Tensor<T> y({n, out_});
    MatMap<T> ym(y.ptr(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(out_));
    ym.noalias() = xmat(x_) * wmat().transpose();
    ym.rowwise() += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(b_.value.ptr(), static_cast<Eigen::Index>(out_));
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) override {
    const auto n = static_cast<Eigen::Index>(x_.dim(0));
    if (dy.shape != Shape{x_.dim(0), out_}) throw InvalidArgument("dense: gradient shape mismatch");
    ConstMatMap<T> dym(dy.ptr(), n, static_cast<Eigen::Index>(out_));
    MatMap<T>(w_.grad.ptr(), static_cast<Eigen::Index>(out_), static_cast<Eigen::Index>(in_)).noalias() += dym.transpose() * xmat(x_);
    Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(b_.grad.ptr(), static_cast<Eigen::Index>(out_)) += dym.colwise().sum();
    Tensor<T> dx({x_.dim(0), in_});
    MatMap<T>(dx.ptr(), n, static_cast<Eigen::Index>(in_)).noalias() = dym * wmat();
    return dx;
  }

  Shape output_shape(const Shape& in) const override {
    if (shape_size(in) != in_) throw InvalidArgument("dense: input " + shape_string(in) + " does not have " + std::to_string(in_) + " features");
    return {out_};
  }
  std::string name() const override { return "dense(" + std::to_string(in_) + "->" + std::to_string(out_) + ")"; }
  std::vector<Param<T>*> params() override { return {&w_, &b_}; }

  Param<T>& weight() { return w_; }
  Param<T>& bias() { return b_; }

 private:
  ConstMatMap<T> wmat() const { return {w_.value.ptr(), static_cast<Eigen::Index>(out_), static_cast<Eigen::Index>(in_)}; }
  static ConstMatMap<T> xmat(const Tensor<T>& x) {
    return {x.ptr(), static_cast<Eigen::Index>(x.dim(0)), static_cast<Eigen::Index>(x.dim(1))};
  }

  std::size_t in_, out_;
  Param<T> w_, b_;
  Tensor<T> x_;
};

/// Valid cross-correlation, stride 1. Input N x C x H x W; filters O x C x kh x kw.
template <typename T>
class Conv2D final : public Layer<T> {
 public:
  Conv2D(std::size_t in_channels, std::size_t out_channels, std::size_t kh, std::size_t kw)
      : c_(in_channels), o_(out_channels), kh_(kh), kw_(kw), w_("weight", {out_channels, in_channels, kh, kw}), b_("bias", {out_channels}) {}

  void init(Rng& rng) {
    detail::fan_in_uniform(w_.value, c_ * kh_ * kw_, rng);
    std::fill(b_.value.data.begin(), b_.value.data.end(), T(0));
  }

  Tensor<T> forward(const Tensor<T>& x, const ForwardContext&) override {
    const std::size_t n = detail::batch_of(x.shape, 4, "conv2d");
    const Shape out = output_shape({x.dim(1), x.dim(2), x.dim(3)});
    x_ = x;
    const std::size_t oh = out[1], ow = out[2], k = c_ * kh_ * kw_;
    Tensor<T> y({n, o_, oh, ow});
    RowMatrix<T> cols(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(oh * ow));
    for (std::size_t s = 0; s < n; ++s) {
      im2col(x, s, oh, ow, cols);
      MatMap<T> ys(y.ptr() + s * o_ * oh * ow, static_cast<Eigen::Index>(o_), static_cast<Eigen::Index>(oh * ow));
      ys.noalias() = wmat() * cols;
      for (std::size_t f = 0; f < o_; ++f) ys.row(static_cast<Eigen::Index>(f)).array() += b_.value[f];
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) override {
    const std::size_t n = x_.dim(0), h = x_.dim(2), w = x_.dim(3);
    const std::size_t oh = h - kh_ + 1, ow = w - kw_ + 1, k = c_ * kh_ * kw_;
    if (dy.shape != Shape{n, o_, oh, ow}) throw InvalidArgument("conv2d: gradient shape mismatch");
    Tensor<T> dx(x_.shape);
    RowMatrix<T> cols(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(oh * ow));
    RowMatrix<T> dcols(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(oh * ow));
    MatMap<T> dw(w_.grad.ptr(), static_cast<Eigen::Index>(o_), static_cast<Eigen::Index>(k));
    for (std::size_t s = 0; s < n; ++s) {
      ConstMatMap<T> dys(dy.ptr() + s * o_ * oh * ow, static_cast<Eigen::Index>(o_), static_cast<Eigen::Index>(oh * ow));
      im2col(x_, s, oh, ow, cols);
      dw.noalias() += dys * cols.transpose();
      for (std::size_t f = 0; f < o_; ++f) b_.grad[f] += dys.row(static_cast<Eigen::Index>(f)).sum();
      dcols.noalias() = wmat().transpose() * dys;
      col2im(dcols, s, oh, ow, dx);
    }
    return dx;
  }

  Shape output_shape(const Shape& in) const override {
    if (in.size() != 3 || in[0] != c_) throw InvalidArgument("conv2d: expected " + std::to_string(c_) + " input channels, got " + shape_string(in));
    if (in[1] < kh_ || in[2] < kw_)
      throw InvalidArgument("conv2d: kernel " + std::to_string(kh_) + "x" + std::to_string(kw_) + " larger than input " + shape_string(in));
    return {o_, in[1] - kh_ + 1, in[2] - kw_ + 1};
  }
  std::string name() const override {
    return "conv2d(" + std::to_string(o_) + "@" + std::to_string(kh_) + "x" + std::to_string(kw_) + ")";
  }
  std::vector<Param<T>*> params() override { return {&w_, &b_}; }

  Param<T>& weight() { return w_; }
  Param<T>& bias() { return b_; }

 private:
  ConstMatMap<T> wmat() const {
    return {w_.value.ptr(), static_cast<Eigen::Index>(o_), static_cast<Eigen::Index>(c_ * kh_ * kw_)};
  }

  void im2col(const Tensor<T>& x, std::size_t s, std::size_t oh, std::size_t ow, RowMatrix<T>& cols) const {
    const std::size_t h = x.dim(2), w = x.dim(3);
    const T* base = x.ptr() + s * c_ * h * w;
    for (std::size_t c = 0; c < c_; ++c)
      for (std::size_t i = 0; i < kh_; ++i)
        for (std::size_t j = 0; j < kw_; ++j) {
          T* row = cols.data() + ((c * kh_ + i) * kw_ + j) * oh * ow;
          for (std::size_t y = 0; y < oh; ++y) {
            const T* src = base + (c * h + y + i) * w + j;
            std::copy(src, src + ow, row + y * ow);
          }
        }
  }

  void col2im(const RowMatrix<T>& dcols, std::size_t s, std::size_t oh, std::size_t ow, Tensor<T>& dx) const {
    const std::size_t h = dx.dim(2), w = dx.dim(3);
    T* base = dx.ptr() + s * c_ * h * w;
    for (std::size_t c = 0; c < c_; ++c)
      for (std::size_t i = 0; i < kh_; ++i)
        for (std::size_t j = 0; j < kw_; ++j) {
          const T* row = dcols.data() + ((c * kh_ + i) * kw_ + j) * oh * ow;
          for (std::size_t y = 0; y < oh; ++y) {
            T* dst = base + (c * h + y + i) * w + j;
            for (std::size_t x = 0; x < ow; ++x) dst[x] += row[y * ow + x];
          }
        }
  }

  std::size_t c_, o_, kh_, kw_;
  Param<T> w_, b_;
  Tensor<T> x_;
};

/// Non-overlapping max pooling; trailing rows/columns that do not fill a
/// window are dropped. Ties route to the first element in row-major order.
template <typename T>
class MaxPool2D final : public Layer<T> {
 public:
  explicit MaxPool2D(std::size_t size = 2) : k_(size) {}

  Tensor<T> forward(const Tensor<T>& x, const ForwardContext&) override {
    const std::size_t n = detail::batch_of(x.shape, 4, "maxpool2d");
    const std::size_t c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const std::size_t oh = h / k_, ow = w / k_;
    in_shape_ = x.shape;
    Tensor<T> y({n, c, oh, ow});
    argmax_.assign(y.size(), 0);
    for (std::size_t p = 0; p < n * c; ++p) {
      const T* src = x.ptr() + p * h * w;
      for (std::size_t i = 0; i < oh; ++i)
        for (std::size_t j = 0; j < ow; ++j) {
          std::size_t best = (i * k_) * w + j * k_;
          for (std::size_t a = 0; a < k_; ++a)
            for (std::size_t b = 0; b < k_; ++b) {
              const std::size_t idx = (i * k_ + a) * w + j * k_ + b;
              if (src[idx] > src[best]) best = idx;
            }
          const std::size_t o = (p * oh + i) * ow + j;
          y[o] = src[best];
          argmax_[o] = p * h * w + best;
        }
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) override {
    if (dy.size() != argmax_.size()) throw InvalidArgument("maxpool2d: gradient shape mismatch");
    Tensor<T> dx(in_shape_);
    for (std::size_t o = 0; o < dy.size(); ++o) dx[argmax_[o]] += dy[o];
    return dx;
  }

  Shape output_shape(const Shape& in) const override {
    if (in.size() != 3 || in[1] < k_ || in[2] < k_) throw InvalidArgument("maxpool2d: input " + shape_string(in) + " smaller than window");
    return {in[0], in[1] / k_, in[2] / k_};
  }
  std::string name() const override { return "maxpool(" + std::to_string(k_) + "x" + std::to_string(k_) + ")"; }

 private:
  std::size_t k_;
  Shape in_shape_;
  std::vector<std::size_t> argmax_;
};

template <typename T>
class Relu final : public Layer<T> {
 public:
  Tensor<T> forward(const Tensor<T>& x, const ForwardContext&) override {
    x_ = x;
    Tensor<T> y = x;
    for (auto& v : y.data) v = std::max(v, T(0));
    return y;
  }
  Tensor<T> backward(const Tensor<T>& dy) override {
    Tensor<T> dx = dy;
    for (std::size_t i = 0; i < dx.size(); ++i)
      if (!(x_[i] > T(0))) dx[i] = T(0);
    return dx;
  }
  Shape output_shape(const Shape& in) const override { return in; }
  std::string name() const override { return "relu"; }

 private:
  Tensor<T> x_;
};

/// Inverted dropout: identity at inference.
template <typename T>
class Dropout final : public Layer<T> {
 public:
  explicit Dropout(double rate) : rate_(rate) {
    if (!(rate >= 0.0 && rate < 1.0)) throw InvalidArgument("dropout: rate must be in [0, 1)");
  }

  Tensor<T> forward(const Tensor<T>& x, const ForwardContext& ctx) override {
    mask_.clear();
    if (!ctx.training || rate_ == 0.0) return x;
    if (!ctx.rng) throw InvalidArgument("dropout: training mode needs a random stream");
    const T keep = static_cast<T>(1.0 / (1.0 - rate_));
    mask_.resize(x.size());
    Tensor<T> y = x;
    for (std::size_t i = 0; i < y.size(); ++i) {
      mask_[i] = ctx.rng->uniform() < rate_ ? T(0) : keep;
      y[i] *= mask_[i];
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) override {
    if (mask_.empty()) return dy;
    Tensor<T> dx = dy;
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= mask_[i];
    return dx;
  }

  Shape output_shape(const Shape& in) const override { return in; }
  std::string name() const override { return "dropout(" + std::to_string(rate_).substr(0, 4) + ")"; }
  double rate() const noexcept { return rate_; }

 private:
  double rate_;
  std::vector<T> mask_;
};

/// Collapses all non-batch axes.
template <typename T>
class Flatten final : public Layer<T> {
 public:
  Tensor<T> forward(const Tensor<T>& x, const ForwardContext&) override {
    in_shape_ = x.shape;
    return x.reshaped({x.dim(0), x.size() / x.dim(0)});
  }
  Tensor<T> backward(const Tensor<T>& dy) override { return dy.reshaped(in_shape_); }
  Shape output_shape(const Shape& in) const override { return {shape_size(in)}; }
  std::string name() const override { return "flatten"; }

 private:
  Shape in_shape_;
};

}  // namespace mosest::nn
