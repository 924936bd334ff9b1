#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "mosest/core/log.hpp"
#include "mosest/features/dump.hpp"
#include "mosest/models/spec.hpp"
#include "mosest/nn/adam.hpp"
#include "mosest/nn/elm.hpp"
#include "mosest/nn/layers.hpp"
#include "mosest/nn/network.hpp"

namespace mosest::models {

using Net = nn::Network<double>;
using Tensor = nn::Tensor<double>;

/// Builds the layer stack for a spec, initializing weights from rng.
inline Net build(const ModelSpec& spec, Rng& rng) {
  spec.validate();
  Net net(spec.input_shape());
  if (spec.kind == ModelKind::kCqtCnn) {
    std::size_t channels = 1;
    for (const auto& block : spec.conv_blocks) {
      for (const auto& c : block) {
        net.add<nn::Conv2D<double>>(channels, c.filters, c.kh, c.kw).init(rng);
        net.add<nn::Relu<double>>();
        channels = c.filters;
      }
      net.add<nn::MaxPool2D<double>>(2);
      if (spec.dropout > 0.0) net.add<nn::Dropout<double>>(spec.dropout);
    }
    net.add<nn::Flatten<double>>();
  }
  for (auto width : spec.hidden) {
    net.add<nn::Dense<double>>(nn::shape_size(net.output_shape()), width).init(rng);
    net.add<nn::Relu<double>>();
    if (spec.dropout > 0.0 && spec.kind != ModelKind::kCqtCnn) net.add<nn::Dropout<double>>(spec.dropout);
  }
  net.add<nn::Dense<double>>(nn::shape_size(net.output_shape()), 1).init(rng);
  if (net.output_shape() != nn::Shape{1}) throw InvalidArgument("model: output is not a single unit");
  return net;
}

/// Size of the CNN's flattened feature vector (0 for DNNs).
inline std::size_t flatten_size(const ModelSpec& spec) {
  if (spec.kind != ModelKind::kCqtCnn) return 0;
  nn::Shape s = spec.input_shape();
  for (const auto& block : spec.conv_blocks) {
    for (const auto& c : block) s = nn::Conv2D<double>(s[0], c.filters, c.kh, c.kw).output_shape(s);
    s = nn::MaxPool2D<double>(2).output_shape(s);
  }
  return nn::shape_size(s);
}

/// Per-input-element affine standardization fitted on training samples.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> inv_std;

  bool empty() const noexcept { return mean.empty(); }

  void apply(std::span<double> x) const {
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = (x[i] - mean[i]) * inv_std[i];
  }
};

/// Network samples carried by one utterance's feature matrix: one per row
/// for mel windows; the whole (optionally pooled) map for CQT; one row for
/// i-vectors.
inline std::vector<std::vector<double>> samples_of(const ModelSpec& spec, const features::FeatureMatrix& f) {
  if (f.kind != feature_kind(spec.kind))
    throw KindMismatch(std::string("model ") + to_string(spec.kind) + " expects " + to_string(feature_kind(spec.kind)) +
                       " features, got " + to_string(f.kind));
  std::vector<std::vector<double>> out;
  if (spec.kind == ModelKind::kCqtCnn) {
    if (f.rows != spec.map_rows || f.cols != spec.map_cols)
      throw FormatError("cqt map is " + std::to_string(f.rows) + "x" + std::to_string(f.cols) + ", expected " +
                        std::to_string(spec.map_rows) + "x" + std::to_string(spec.map_cols));
    const std::size_t p = spec.input_pool, h = f.rows / p, w = f.cols / p;
    std::vector<double> v(h * w, 0.0);
    for (std::size_t i = 0; i < h; ++i)
      for (std::size_t j = 0; j < w; ++j) {
        double s = 0.0;
        for (std::size_t a = 0; a < p; ++a)
          for (std::size_t b = 0; b < p; ++b) s += f.values[(i * p + a) * f.cols + j * p + b];
        v[i * w + j] = s / static_cast<double>(p * p);
      }
    out.push_back(std::move(v));
    return out;
  }
  if (f.cols != spec.input_dim)
    throw FormatError("feature width " + std::to_string(f.cols) + ", model expects " + std::to_string(spec.input_dim));
  if (spec.kind == ModelKind::kIvecDnn && f.rows != 1) throw FormatError("i-vector features must have exactly one row");
  for (std::size_t r = 0; r < f.rows; ++r) out.emplace_back(f.row(r).begin(), f.row(r).end());
  return out;
}

// --- aggregation -----------------------------------------------------------

inline constexpr double kModeBinWidth = 0.1;
inline constexpr std::size_t kElmStatCount = 9;

inline double aggregate_mean(std::span<const double> s) {
  if (s.empty()) throw NoSpeech("no window scores to aggregate");
  double total = 0.0;
  for (double v : s) total += v;
  return total / static_cast<double>(s.size());
}

/// 0.1-wide bins over [1, 5] (outliers fall in the edge bins); the mean of
/// the scores in the fullest bin, lower bin on ties.
inline double aggregate_mode(std::span<const double> s) {
  if (s.empty()) throw NoSpeech("no window scores to aggregate");
  constexpr std::size_t kBins = 40;
  std::vector<std::size_t> count(kBins, 0);
  std::vector<double> sum(kBins, 0.0);
  for (double v : s) {
    // the epsilon keeps exact bin edges such as 3.0 in their own bin
    const double pos = std::floor((v - 1.0) / kModeBinWidth + 1e-9);
    const auto b = static_cast<std::size_t>(std::clamp(pos, 0.0, static_cast<double>(kBins - 1)));
    ++count[b];
    sum[b] += v;
  }
  std::size_t best = 0;
  for (std::size_t b = 1; b < kBins; ++b)
    if (count[b] > count[best]) best = b;
  return sum[best] / static_cast<double>(count[best]);
}

inline double sorted_percentile(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

/// mean, std, min, max, then the 5/25/50/75/95th percentiles.
inline std::array<double, kElmStatCount> window_statistics(std::span<const double> s) {
  if (s.empty()) throw NoSpeech("no window scores to summarize");
  std::vector<double> v(s.begin(), s.end());
  std::sort(v.begin(), v.end());
  const double mean = aggregate_mean(s);
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  var /= static_cast<double>(v.size());
  return {mean, std::sqrt(var), v.front(), v.back(), sorted_percentile(v, 0.05), sorted_percentile(v, 0.25),
          sorted_percentile(v, 0.50), sorted_percentile(v, 0.75), sorted_percentile(v, 0.95)};
}

/// The ELM predicts the gap between the label and the mean window score, so
/// a heavy ridge falls back to mean aggregation rather than to zero.
struct ElmHead {
  nn::ElmModel elm;
  Standardizer stats_norm;
};

struct UtterancePrediction {
  std::string utterance_id;
  std::vector<double> window_scores;
  double mos = 0.0;
  Aggregation aggregation = Aggregation::kMean;
};

/// Trained estimator: network, input standardization and optional ELM head.
class MosModel {
 public:
  MosModel(ModelSpec spec, Rng& rng) : spec_(std::move(spec)), net_(build(spec_, rng)) {}

  const ModelSpec& spec() const noexcept { return spec_; }
  ModelSpec& spec() noexcept { return spec_; }
  Net& network() noexcept { return net_; }
  Standardizer& standardizer() noexcept { return norm_; }
  const Standardizer& standardizer() const noexcept { return norm_; }
  std::optional<ElmHead>& elm_head() noexcept { return elm_; }
  const std::optional<ElmHead>& elm_head() const noexcept { return elm_; }

  /// Network outputs for already-standardized samples.
  std::vector<double> score_samples(const std::vector<std::vector<double>>& samples) {
    std::vector<double> out;
    out.reserve(samples.size());
    const std::size_t width = nn::shape_size(spec_.input_shape());
    constexpr std::size_t kBatch = 256;
    for (std::size_t lo = 0; lo < samples.size(); lo += kBatch) {
      const std::size_t n = std::min(kBatch, samples.size() - lo);
      nn::Shape shape{n};
      const auto in = spec_.input_shape();
      shape.insert(shape.end(), in.begin(), in.end());
      Tensor x(shape);
      for (std::size_t i = 0; i < n; ++i) {
        if (samples[lo + i].size() != width) throw InvalidArgument("model: sample width mismatch");
        std::copy(samples[lo + i].begin(), samples[lo + i].end(), x.ptr() + i * width);
      }
      const auto y = net_.forward(std::move(x));
      out.insert(out.end(), y.data.begin(), y.data.end());
    }
    return out;
  }

  std::vector<double> window_scores(const features::FeatureMatrix& f) {
    auto samples = samples_of(spec_, f);
    if (samples.empty()) throw NoSpeech("utterance has no speech-active windows");
    if (!norm_.empty())
      for (auto& s : samples) norm_.apply(s);
    return score_samples(samples);
  }

  double aggregate(std::span<const double> scores, Aggregation how) const {
    switch (how) {
      case Aggregation::kMean: return aggregate_mean(scores);
      case Aggregation::kMode: return aggregate_mode(scores);
      case Aggregation::kElm: {
        if (!elm_) throw ConfigError("model has no ELM head; run training with +elm");
        const auto st = window_statistics(scores);
        Eigen::MatrixXd x(1, static_cast<Eigen::Index>(kElmStatCount));
        for (std::size_t i = 0; i < kElmStatCount; ++i) x(0, static_cast<Eigen::Index>(i)) = st[i];
        std::span<double> row(x.data(), kElmStatCount);
        elm_->stats_norm.apply(row);
        return st[0] + nn::elm_predict(elm_->elm, x)(0);
      }
    }
    return 0.0;
  }

  UtterancePrediction predict(const std::string& id, const features::FeatureMatrix& f) {
    return predict(id, f, spec_.aggregation);
  }

  UtterancePrediction predict(const std::string& id, const features::FeatureMatrix& f, Aggregation how) {
    UtterancePrediction p{id, window_scores(f), 0.0, how};
    if (spec_.kind != ModelKind::kMelDnn) {
      p.mos = p.window_scores.front();
      p.aggregation = Aggregation::kMean;
    } else {
      p.mos = aggregate(p.window_scores, how);
    }
    if (!std::isfinite(p.mos)) throw TrainingDiverged("model produced a non-finite score for " + id);
    return p;
  }

 private:
  ModelSpec spec_;
  Net net_;
  Standardizer norm_;
  std::optional<ElmHead> elm_;
};

}  // namespace mosest::models
