#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "mosest/audio/buffer.hpp"
#include "mosest/core/error.hpp"

namespace mosest::features {

struct CqtParams {
  std::size_t bins_total = 240;
  std::size_t bins_per_octave = 32;
  double f_min = 44.2;
  std::size_t hop = 1440;
  std::size_t frames = 220;
  int sample_rate = audio::kSampleRate;
  double log_floor = 1e-10;

  double center(std::size_t k) const {
    return f_min * std::pow(2.0, static_cast<double>(k) / static_cast<double>(bins_per_octave));
  }
  double f_max() const { return center(bins_total - 1); }

  /// Q of bin k from its center and the spacing to the next center.
  double bin_q(std::size_t k) const {
    const double fc = center(k);
    return fc / (center(k + 1) - fc);
  }
  double q() const { return 1.0 / (std::pow(2.0, 1.0 / static_cast<double>(bins_per_octave)) - 1.0); }

  std::size_t kernel_len(std::size_t k) const {
    return static_cast<std::size_t>(std::ceil(q() * sample_rate / center(k)));
  }
  std::size_t longest_kernel() const { return kernel_len(0); }

  void validate() const {
    if (bins_total == 0 || bins_per_octave == 0 || hop == 0 || frames == 0)
      throw InvalidArgument("cqt: bins, hop and frames must be positive");
    if (!(f_min > 0.0)) throw InvalidArgument("cqt: f_min must be positive");
    if (!(f_max() < sample_rate / 2.0)) throw InvalidArgument("cqt: top bin above Nyquist");
  }
};

/// rows x cols log-magnitudes, frequency-major (values[row * cols + col]).
struct CqtFeatureMap {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  double at(std::size_t row, std::size_t col) const { return values[row * cols + col]; }
};

/// Hann-windowed complex exponentials, one per bin, normalized by length.
class CqtKernelBank {
 public:
  explicit CqtKernelBank(const CqtParams& p = {}) : p_(p) {
    p.validate();
    kernels_.resize(p.bins_total);
    for (std::size_t k = 0; k < p.bins_total; ++k) {
      const std::size_t n = p.kernel_len(k);
      const double fc = p.center(k);
      auto& ker = kernels_[k];
      ker.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        const double w = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * (static_cast<double>(i) + 0.5) /
                                              static_cast<double>(n));
        const double t = (static_cast<double>(i) - static_cast<double>(n) / 2.0) / p.sample_rate;
        ker[i] = std::polar(w / static_cast<double>(n), -2.0 * std::numbers::pi * fc * t);
      }
    }
  }

  const CqtParams& params() const noexcept { return p_; }

  /// Magnitude of bin k for the kernel centered at sample c (zero outside x).
  double magnitude(std::span<const double> x, std::size_t k, std::ptrdiff_t c) const {
    const auto& ker = kernels_[k];
    const auto n = static_cast<std::ptrdiff_t>(ker.size());
    const std::ptrdiff_t start = c - n / 2;
    const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, -start);
    const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(n, static_cast<std::ptrdiff_t>(x.size()) - start);
    double re = 0.0, im = 0.0;
    for (std::ptrdiff_t i = lo; i < hi; ++i) {
      const double v = x[static_cast<std::size_t>(start + i)];
      re += v * ker[static_cast<std::size_t>(i)].real();
      im += v * ker[static_cast<std::size_t>(i)].imag();
    }
    return std::hypot(re, im);
  }

  /// Frames centered at j*hop. Columns beyond the signal replicate the last
  /// computed frame; frames beyond the fixed count are dropped.
  CqtFeatureMap operator()(std::span<const double> x) const {
    if (x.size() < p_.longest_kernel())
      throw InvalidArgument("cqt: input shorter than the longest kernel (" +
                            std::to_string(p_.longest_kernel()) + " samples)");
    const std::size_t natural = 1 + (x.size() - 1) / p_.hop;
    const std::size_t computed = std::min(natural, p_.frames);
    CqtFeatureMap out{p_.bins_total, p_.frames, std::vector<double>(p_.bins_total * p_.frames)};
    for (std::size_t j = 0; j < computed; ++j) {
      const auto c = static_cast<std::ptrdiff_t>(j * p_.hop);
      for (std::size_t k = 0; k < p_.bins_total; ++k)
        out.values[k * p_.frames + j] = std::log(std::max(magnitude(x, k, c), p_.log_floor));
    }
    for (std::size_t k = 0; k < p_.bins_total; ++k)
      for (std::size_t j = computed; j < p_.frames; ++j)
        out.values[k * p_.frames + j] = out.values[k * p_.frames + computed - 1];
    return out;
  }

 private:
  CqtParams p_;
  std::vector<std::vector<std::complex<double>>> kernels_;
};

inline CqtFeatureMap cqt(const audio::AudioBuffer& a, const CqtParams& p = {}) {
  return CqtKernelBank(p)(a.view());
}

/// Feature-map entry point for any utterance length: inputs shorter than the
/// longest kernel are zero-padded to it first.
inline CqtFeatureMap cqt_feature_map(std::span<const double> x, const CqtKernelBank& bank) {
  const std::size_t need = bank.params().longest_kernel();
  if (x.size() >= need) return bank(x);
  std::vector<double> padded(x.begin(), x.end());
  padded.resize(need, 0.0);
  return bank(padded);
}

inline CqtFeatureMap cqt_feature_map(const audio::AudioBuffer& a, const CqtParams& p = {}) {
  return cqt_feature_map(a.view(), CqtKernelBank(p));
}

}  // namespace mosest::features
