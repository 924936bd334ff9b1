#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace mosest::audio {

inline constexpr int kSampleRate = 16000;

/// Mono signal at 16 kHz. Samples are nominally in [-1, 1]; intermediate
/// pipeline stages may exceed that, and the WAV writer counts the overshoot.
struct AudioBuffer {
  std::vector<double> samples;
  int sample_rate = kSampleRate;

  AudioBuffer() = default;
  explicit AudioBuffer(std::vector<double> s) : samples(std::move(s)) {}
  explicit AudioBuffer(std::size_t n) : samples(n, 0.0) {}

  std::size_t size() const noexcept { return samples.size(); }
  bool empty() const noexcept { return samples.empty(); }
  double duration_s() const noexcept { return static_cast<double>(samples.size()) / sample_rate; }
  std::span<const double> view() const noexcept { return samples; }

  bool operator==(const AudioBuffer&) const = default;
};

inline double db_from_power(double p) { return 10.0 * std::log10(p); }
inline double power_from_db(double db) { return std::pow(10.0, db / 10.0); }
inline double gain_from_db(double db) { return std::pow(10.0, db / 20.0); }

inline double energy(std::span<const double> x) {
  double e = 0.0;
  for (double v : x) e += v * v;
  return e;
}

inline AudioBuffer scaled(const AudioBuffer& a, double gain) {
  AudioBuffer out = a;
  for (double& v : out.samples) v *= gain;
  return out;
}

}  // namespace mosest::audio
