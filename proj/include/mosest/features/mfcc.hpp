#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "mosest/core/error.hpp"

namespace mosest::features {

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

struct MfccParams {
  std::size_t spectrum_bins = 257;  ///< window_len / 2 + 1
  int sample_rate = 16000;
  std::size_t filters = 40;
  std::size_t coefficients = 26;
  double f_low = 0.0;
  double f_high = 8000.0;
  double log_floor = 1e-10;
};

/// HTK-scale triangular filters, each normalized to unit weight sum, applied
/// to the power spectrum; natural log with floor; orthonormal DCT-II.
class Mfcc {
 public:
  explicit Mfcc(const MfccParams& p = {}) : p_(p) {
    if (p.coefficients > p.filters) throw InvalidArgument("mfcc: more coefficients than filters");
    const double n_fft = static_cast<double>(2 * (p.spectrum_bins - 1));
    const double m_lo = hz_to_mel(p.f_low), m_hi = hz_to_mel(p.f_high);
    std::vector<double> edges(p.filters + 2);
    for (std::size_t i = 0; i < edges.size(); ++i)
      edges[i] = mel_to_hz(m_lo + (m_hi - m_lo) * static_cast<double>(i) / static_cast<double>(p.filters + 1));
    weights_.assign(p.filters, std::vector<double>(p.spectrum_bins, 0.0));
    for (std::size_t m = 0; m < p.filters; ++m) {
      double sum = 0.0;
      for (std::size_t k = 0; k < p.spectrum_bins; ++k) {
        const double f = static_cast<double>(k) * p.sample_rate / n_fft;
        double w = 0.0;
        if (f > edges[m] && f <= edges[m + 1]) w = (f - edges[m]) / (edges[m + 1] - edges[m]);
        else if (f > edges[m + 1] && f < edges[m + 2]) w = (edges[m + 2] - f) / (edges[m + 2] - edges[m + 1]);
        weights_[m][k] = w;
        sum += w;
      }
      if (sum <= 0.0) throw InvalidArgument("mfcc: empty mel filter; use fewer filters");
      for (double& w : weights_[m]) w /= sum;
    }
    dct_.assign(p.coefficients, std::vector<double>(p.filters));
    const double M = static_cast<double>(p.filters);
    for (std::size_t c = 0; c < p.coefficients; ++c)
      for (std::size_t m = 0; m < p.filters; ++m)
        dct_[c][m] = std::sqrt((c == 0 ? 1.0 : 2.0) / M) *
                     std::cos(std::numbers::pi * static_cast<double>(c) * (static_cast<double>(m) + 0.5) / M);
  }

  const MfccParams& params() const noexcept { return p_; }

  std::vector<double> filterbank_energies(std::span<const double> magnitude) const {
    if (magnitude.size() != p_.spectrum_bins) throw InvalidArgument("mfcc: spectrum size mismatch");
    std::vector<double> e(p_.filters, 0.0);
    for (std::size_t m = 0; m < p_.filters; ++m)
      for (std::size_t k = 0; k < p_.spectrum_bins; ++k) e[m] += weights_[m][k] * magnitude[k] * magnitude[k];
    return e;
  }

  std::vector<double> operator()(std::span<const double> magnitude) const {
    auto e = filterbank_energies(magnitude);
    for (double& v : e) v = std::log(std::max(v, p_.log_floor));
    std::vector<double> c(p_.coefficients, 0.0);
    for (std::size_t i = 0; i < p_.coefficients; ++i)
      for (std::size_t m = 0; m < p_.filters; ++m) c[i] += dct_[i][m] * e[m];
    return c;
  }

 private:
  MfccParams p_;
  std::vector<std::vector<double>> weights_;
  std::vector<std::vector<double>> dct_;
};

inline std::vector<double> mfcc(std::span<const double> magnitude) {
  static const Mfcc kDefault;
  return kDefault(magnitude);
}

}  // namespace mosest::features
