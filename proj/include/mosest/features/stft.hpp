#pragma once

#include <complex>
#include <vector>

#include "mosest/audio/buffer.hpp"
#include "mosest/dsp/fft.hpp"
#include "mosest/features/framing.hpp"

namespace mosest::features {

/// frames x (window_len/2 + 1) complex bins.
struct StftFrames {
  std::size_t bins = 0;
  std::vector<std::vector<dsp::Complex>> frames;

  std::size_t size() const noexcept { return frames.size(); }
};

/// Periodic-Hann windowed DFT of every full frame (no padding).
inline StftFrames stft(std::span<const double> x, const FramingParams& p = {}) {
  p.validate();
  if (x.size() < p.window_len) throw InvalidArgument("stft: input shorter than one window");
  const auto window = periodic_hann(p.window_len);
  dsp::RealFft fft(p.window_len);
  StftFrames out;
  out.bins = p.bins();
  out.frames.resize(full_frame_count(x.size(), p));
  std::vector<double> buf(p.window_len);
  for (std::size_t f = 0; f < out.frames.size(); ++f) {
    const std::size_t start = f * p.hop;
    for (std::size_t i = 0; i < p.window_len; ++i) buf[i] = x[start + i] * window[i];
    fft.forward(buf, out.frames[f]);
  }
  return out;
}

inline StftFrames stft(const audio::AudioBuffer& a, const FramingParams& p = {}) { return stft(a.view(), p); }

inline std::vector<double> magnitude(std::span<const dsp::Complex> frame) {
  std::vector<double> m(frame.size());
  for (std::size_t k = 0; k < frame.size(); ++k) m[k] = std::abs(frame[k]);
  return m;
}

/// Time-domain energy implied by a half spectrum of an n-point real DFT.
inline double spectrum_energy(std::span<const dsp::Complex> half, std::size_t n) {
  double e = std::norm(half.front()) + std::norm(half.back());
  for (std::size_t k = 1; k + 1 < half.size(); ++k) e += 2.0 * std::norm(half[k]);
  return e / static_cast<double>(n);
}

}  // namespace mosest::features
