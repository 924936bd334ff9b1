#pragma once

#include <memory>
#include <string>
#include <vector>

#include "mosest/core/log.hpp"
#include "mosest/nn/layers.hpp"

namespace mosest::nn {

/// Sequential stack with a fixed per-sample input shape.
template <typename T>
class Network {
 public:
  explicit Network(Shape input_shape) : input_shape_(std::move(input_shape)) {}

  Network(Network&&) noexcept = default;
  Network& operator=(Network&&) noexcept = default;

  template <typename L, typename... Args>
  L& add(Args&&... args) {
    auto layer = std::make_unique<L>(std::forward<Args>(args)...);
    L& ref = *layer;
    shapes_.push_back(layer->output_shape(shapes_.empty() ? input_shape_ : shapes_.back()));
    layers_.push_back(std::move(layer));
    return ref;
  }

  const Shape& input_shape() const noexcept { return input_shape_; }
  /// Per-sample output shape after each layer.
  const std::vector<Shape>& shapes() const noexcept { return shapes_; }
  Shape output_shape() const { return shapes_.empty() ? input_shape_ : shapes_.back(); }
  std::size_t size() const noexcept { return layers_.size(); }
  Layer<T>& layer(std::size_t i) { return *layers_.at(i); }

  Tensor<T> forward(Tensor<T> x, const ForwardContext& ctx = {}) {
    Shape expect{x.rank() ? x.dim(0) : 0};
    expect.insert(expect.end(), input_shape_.begin(), input_shape_.end());
    if (x.shape != expect) throw InvalidArgument("network: input " + shape_string(x.shape) + ", expected " + shape_string(expect));
    for (auto& l : layers_) x = l->forward(x, ctx);
    return x;
  }

  Tensor<T> backward(Tensor<T> dy) {
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) dy = (*it)->backward(dy);
    return dy;
  }

  std::vector<Param<T>*> params() {
    std::vector<Param<T>*> out;
    for (auto& l : layers_)
      for (auto* p : l->params()) out.push_back(p);
    return out;
  }

  void zero_grad() {
    for (auto* p : params()) std::fill(p->grad.data.begin(), p->grad.data.end(), T(0));
  }

  std::size_t parameter_count() {
    std::size_t n = 0;
    for (auto* p : params()) n += p->value.size();
    return n;
  }

  std::string describe() const {
    std::string s = shape_string(input_shape_);
    for (std::size_t i = 0; i < layers_.size(); ++i) s += " -> " + layers_[i]->name() + " " + shape_string(shapes_[i]);
    return s;
  }

 private:
  Shape input_shape_;
  std::vector<std::unique_ptr<Layer<T>>> layers_;
  std::vector<Shape> shapes_;
};

}  // namespace mosest::nn
