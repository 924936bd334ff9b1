#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "mosest/audio/buffer.hpp"
#include "mosest/dsp/fft.hpp"
#include "mosest/features/framing.hpp"
#include "mosest/features/vad.hpp"

namespace mosest::audio {

/// Per-frame, per-bin real gains produced by the spectral subtractor.
struct GainMask {
  std::size_t frames = 0;
  std::size_t bins = 0;
  std::vector<double> gains;  ///< frames x bins

  double at(std::size_t f, std::size_t k) const { return gains[f * bins + k]; }
};

/// Single-channel magnitude spectral subtraction. The noise magnitude is the
/// per-bin median over frames within the first `noise_estimate_s` seconds.
/// Analysis uses a periodic Hann at 50% overlap, which sums to one, so unit
/// gains reconstruct the input.
class SpectralSubtractor {
 public:
  struct Params {
    std::size_t frame_len = 512;
    double noise_estimate_s = 0.5;
    double over_subtraction = 1.5;
    double gain_floor = 0.1;
  };

  SpectralSubtractor() : SpectralSubtractor(Params{}) {}
  explicit SpectralSubtractor(Params p)
      : p_(p), hop_(p.frame_len / 2), window_(features::periodic_hann(p.frame_len)), fft_(p.frame_len) {}

  GainMask compute_gains(const AudioBuffer& a) {
    const auto spectra = analyze(a);
    GainMask m;
    m.frames = spectra.size();
    m.bins = fft_.bins();
    m.gains.assign(m.frames * m.bins, 1.0);
    if (m.frames == 0) return m;

    // frame f covers padded samples [f*hop, f*hop + N); its centre is at
    // original sample f*hop.
    const auto est_frames = std::max<std::size_t>(
        1, std::min(m.frames, static_cast<std::size_t>(p_.noise_estimate_s * kSampleRate / hop_) + 1));
    std::vector<double> noise(m.bins);
    std::vector<double> column(est_frames);
    for (std::size_t k = 0; k < m.bins; ++k) {
      for (std::size_t f = 0; f < est_frames; ++f) column[f] = std::abs(spectra[f][k]);
      noise[k] = features::percentile(column, 0.5);
    }
    for (std::size_t f = 0; f < m.frames; ++f) {
      for (std::size_t k = 0; k < m.bins; ++k) {
        const double x2 = std::norm(spectra[f][k]);
        const double n2 = noise[k] * noise[k];
        if (n2 <= 0.0 || x2 <= 0.0) continue;
        const double g2 = std::max(1.0 - p_.over_subtraction * n2 / x2, p_.gain_floor * p_.gain_floor);
        m.gains[f * m.bins + k] = std::sqrt(g2);
      }
    }
    return m;
  }

  /// Applies a gain mask (computed from any signal of the same length).
  AudioBuffer apply(const AudioBuffer& a, const GainMask& m) {
    const auto spectra = analyze(a);
    if (spectra.size() != m.frames) throw InvalidArgument("gain mask frame count mismatch");
    const std::size_t n = p_.frame_len;
    std::vector<double> padded(a.size() + 2 * n, 0.0);
    std::vector<dsp::Complex> spec;
    std::vector<double> frame;
    for (std::size_t f = 0; f < spectra.size(); ++f) {
      spec = spectra[f];
      for (std::size_t k = 0; k < spec.size(); ++k) spec[k] *= m.at(f, k);
      fft_.inverse(spec, frame);
      for (std::size_t i = 0; i < n; ++i) padded[f * hop_ + i] += frame[i];
    }
    AudioBuffer out(a.size());
    std::copy_n(padded.begin() + static_cast<std::ptrdiff_t>(hop_), a.size(), out.samples.begin());
    return out;
  }

 private:
  std::vector<std::vector<dsp::Complex>> analyze(const AudioBuffer& a) {
    const std::size_t n = p_.frame_len;
    // pad by hop on the left so every original sample is covered by two frames
    std::vector<double> padded(a.size() + 2 * n, 0.0);
    std::copy(a.samples.begin(), a.samples.end(), padded.begin() + static_cast<std::ptrdiff_t>(hop_));
    const std::size_t frames = a.empty() ? 0 : (a.size() + hop_ + hop_ - 1) / hop_ + 1;
    std::vector<std::vector<dsp::Complex>> out(frames);
    std::vector<double> buf(n);
    for (std::size_t f = 0; f < frames; ++f) {
      for (std::size_t i = 0; i < n; ++i) buf[i] = padded[f * hop_ + i] * window_[i];
      fft_.forward(buf, out[f]);
    }
    return out;
  }

  Params p_;
  std::size_t hop_;
  std::vector<double> window_;
  dsp::RealFft fft_;
};

inline AudioBuffer noise_suppress(const AudioBuffer& a) {
  SpectralSubtractor ss;
  AudioBuffer out = ss.apply(a, ss.compute_gains(a));
  const double ein = energy(a.samples), eout = energy(out.samples);
  if (eout > ein && eout > 0.0) {
    const double g = std::sqrt(ein / eout);
    for (double& v : out.samples) v *= g;
  }
  return out;
}

struct AgcParams {
  std::size_t frame_len = 160;      ///< 10 ms
  double max_step_db = 0.3;         ///< per frame, i.e. 3 dB per 100 ms
  double level_time_constant_s = 1.0;
  double gate_dbfs = -60.0;         ///< frames below this never update the level
  double gate_relative_db = 15.0;   ///< nor frames this far below the running level
  double min_gain_db = -20.0;
  double max_gain_db = 30.0;
};

/// Frame-wise automatic gain control. A smoothed active level is tracked in
/// the power domain over gated frames; the applied gain slews toward
/// target - level by at most max_step_db per frame and is interpolated
/// linearly in dB across each frame.
inline AudioBuffer agc(const AudioBuffer& a, double target_dbfs, const AgcParams& p = {}) {
  AudioBuffer out(a.size());
  const double alpha =
      std::exp(-static_cast<double>(p.frame_len) / (p.level_time_constant_s * kSampleRate));
  double level_pw = -1.0;  // unset
  std::size_t level_frames = 0;
  double gain_db = 0.0;
  for (std::size_t start = 0; start < a.size(); start += p.frame_len) {
    const std::size_t end = std::min(a.size(), start + p.frame_len);
    const std::size_t len = end - start;
    double pw = 0.0;
    for (std::size_t i = start; i < end; ++i) pw += a.samples[i] * a.samples[i];
    pw /= static_cast<double>(len);
    const double lvl = features::frame_level_db(pw);
    const bool gated = lvl > p.gate_dbfs &&
                       (level_pw < 0.0 || lvl > db_from_power(level_pw) - p.gate_relative_db);
    if (gated) {
      // running mean until the exponential window is filled
      ++level_frames;
      const double a = std::min(alpha, 1.0 - 1.0 / static_cast<double>(level_frames));
      level_pw = level_pw < 0.0 ? pw : a * level_pw + (1.0 - a) * pw;
    }

    double next_db = gain_db;
    if (level_pw > 0.0) {
      const double desired = std::clamp(target_dbfs - db_from_power(level_pw), p.min_gain_db, p.max_gain_db);
      next_db = gain_db + std::clamp(desired - gain_db, -p.max_step_db, p.max_step_db);
    }
    for (std::size_t i = start; i < end; ++i) {
      const double frac = static_cast<double>(i - start + 1) / static_cast<double>(len);
      out.samples[i] = a.samples[i] * gain_from_db(gain_db + frac * (next_db - gain_db));
    }
    gain_db = next_db;
  }
  return out;
}

}  // namespace mosest::audio
