#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "mosest/audio/buffer.hpp"
#include "mosest/core/error.hpp"
#include "mosest/core/rng.hpp"
#include "mosest/dsp/fft.hpp"

namespace mosest::audio {

enum class RirKind { kMeasuredImport, kSyntheticDecay, kAnechoic };

inline const char* to_string(RirKind k) {
  switch (k) {
    case RirKind::kMeasuredImport: return "measured";
    case RirKind::kSyntheticDecay: return "synthetic";
    case RirKind::kAnechoic: return "anechoic";
  }
  return "?";
}

inline constexpr double kSpeedOfSound = 343.0;
/// ln(1000): amplitude envelope exp(-k t / rt60) is 60 dB down at t = rt60.
inline constexpr double kDecay60 = 6.908;
/// Diffuse-tail amplitude; puts the direct-to-reverberant ratio at 0 dB for a
/// 1 m source in a 0.4 s room.
inline constexpr double kTailAmplitude = 0.04646;
inline constexpr double kDirectWindowS = 0.005;
/// Reported DRR for responses without a tail (anechoic / close-talk).
inline constexpr double kMaxDrrDb = 30.0;
inline constexpr double kMinRt60 = 0.3, kMaxRt60 = 0.5;
inline constexpr double kMinDistance = 0.5, kMaxDistance = 3.0;

struct RoomImpulseResponse {
  std::string id;
  std::vector<double> taps;
  double rt60 = 0.0;             ///< seconds; 0 for anechoic
  double source_distance = 0.0;  ///< meters
  RirKind kind = RirKind::kAnechoic;

  void validate() const {
    if (taps.empty()) throw InvalidArgument("room impulse response has no taps");
    const double e = energy(taps);
    if (!std::isfinite(e) || e <= 0.0)
      throw InvalidArgument("room impulse response energy must be finite and nonzero");
  }
};

inline RoomImpulseResponse anechoic_rir(double distance_m = 1.0) {
  return {"", {1.0}, 0.0, distance_m, RirKind::kAnechoic};
}

/// Direct spike at the propagation delay followed by a Gaussian tail whose
/// amplitude envelope is exp(-6.908 t / rt60). The direct path scales as 1/d
/// while the diffuse tail does not, so the DRR falls with distance.
inline RoomImpulseResponse synth_rir(double rt60, double distance_m, Rng& rng) {
  if (!(distance_m >= kMinDistance && distance_m <= kMaxDistance))
    throw InvalidArgument("source distance must lie in [0.5, 3] m");
  if (rt60 == 0.0) return anechoic_rir(distance_m);
  if (!(rt60 >= kMinRt60 && rt60 <= kMaxRt60))
    throw InvalidArgument("rt60 must be 0 (anechoic) or lie in [0.3, 0.5] s");

  const double fs = kSampleRate;
  const auto delay = static_cast<std::size_t>(std::lround(distance_m / kSpeedOfSound * fs));
  // tail runs until the envelope is 80 dB down
  const auto tail_len = static_cast<std::size_t>(std::ceil(rt60 * (80.0 / 60.0) * fs));
  RoomImpulseResponse h;
  h.rt60 = rt60;
  h.source_distance = distance_m;
  h.kind = RirKind::kSyntheticDecay;
  h.taps.assign(delay + 1 + tail_len, 0.0);
  h.taps[delay] = 1.0 / distance_m;
  for (std::size_t i = 1; i <= tail_len; ++i) {
    const double t = static_cast<double>(i) / fs;
    h.taps[delay + i] = kTailAmplitude * std::exp(-kDecay60 * t / rt60) * rng.normal();
  }
  return h;
}

/// Direct window is 5 ms from the strongest tap; everything after is tail.
inline double direct_to_reverberant_db(const RoomImpulseResponse& h) {
  h.validate();
  const auto& t = h.taps;
  std::size_t onset = 0;
  for (std::size_t i = 1; i < t.size(); ++i)
    if (std::abs(t[i]) > std::abs(t[onset])) onset = i;
  const auto win = static_cast<std::size_t>(std::lround(kDirectWindowS * kSampleRate));
  const std::size_t split = std::min(t.size(), onset + win);
  double direct = 0.0, tail = 0.0;
  for (std::size_t i = 0; i < split; ++i) direct += t[i] * t[i];
  for (std::size_t i = split; i < t.size(); ++i) tail += t[i] * t[i];
  if (tail <= 0.0) return kMaxDrrDb;
  return std::min(kMaxDrrDb, db_from_power(direct / tail));
}

/// O(n*m) reference path, truncated to len(x).
inline std::vector<double> convolve_direct(std::span<const double> x, std::span<const double> h) {
  std::vector<double> y(x.size(), 0.0);
  for (std::size_t n = 0; n < x.size(); ++n) {
    const std::size_t kmax = std::min(h.size() - 1, n);
    double acc = 0.0;
    for (std::size_t k = 0; k <= kmax; ++k) acc += h[k] * x[n - k];
    y[n] = acc;
  }
  return y;
}

inline std::vector<double> convolve_fft(std::span<const double> x, std::span<const double> h) {
  if (x.empty()) return {};
  const std::size_t n = dsp::next_pow2(x.size() + h.size() - 1);
  dsp::RealFft fft(n);
  std::vector<dsp::Complex> X, H;
  fft.forward(x, X);
  fft.forward(h, H);
  for (std::size_t k = 0; k < X.size(); ++k) X[k] *= H[k];
  std::vector<double> y;
  fft.inverse(X, y);
  y.resize(x.size());
  return y;
}

/// Full linear convolution truncated to the input length.
inline AudioBuffer convolve_rir(const AudioBuffer& a, const RoomImpulseResponse& h) {
  if (h.taps.empty()) throw InvalidArgument("convolve_rir: empty impulse response");
  AudioBuffer out;
  out.sample_rate = a.sample_rate;
  if (h.taps.size() * a.size() <= (1U << 16))
    out.samples = convolve_direct(a.view(), h.taps);
  else
    out.samples = convolve_fft(a.view(), h.taps);
  return out;
}

}  // namespace mosest::audio
