#pragma once

#include <complex>
#include <span>
#include <vector>

#include <unsupported/Eigen/FFT>

namespace mosest::dsp {

using Complex = std::complex<double>;

/// Real-input FFT of a fixed size (Eigen's kissfft backend). Not thread-safe;
/// use one instance per thread.
class RealFft {
 public:
  explicit RealFft(std::size_t n) : n_(n) { fft_.SetFlag(Eigen::FFT<double>::HalfSpectrum); }

  std::size_t size() const noexcept { return n_; }
  std::size_t bins() const noexcept { return n_ / 2 + 1; }

  /// Input shorter than size() is zero-padded.
  void forward(std::span<const double> in, std::vector<Complex>& out) {
    time_.assign(n_, 0.0);
    std::copy(in.begin(), in.begin() + static_cast<std::ptrdiff_t>(std::min(in.size(), n_)),
              time_.begin());
    fft_.fwd(out, time_);
    out.resize(bins());
  }

  /// Inverse of forward(), including the 1/n scale.
  void inverse(std::span<const Complex> spectrum, std::vector<double>& out) {
    freq_.assign(spectrum.begin(), spectrum.end());
    fft_.inv(out, freq_, static_cast<Eigen::Index>(n_));
  }

 private:
  std::size_t n_;
  Eigen::FFT<double> fft_;
  std::vector<double> time_;
  std::vector<Complex> freq_;
};

inline std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace mosest::dsp
