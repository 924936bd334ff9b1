#pragma once

#include <cmath>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include "mosest/audio/buffer.hpp"
#include "mosest/core/rng.hpp"

namespace mosest::testing {

inline audio::AudioBuffer tone(double freq, double seconds, double amplitude = 0.5, double phase = 0.0) {
  const auto n = static_cast<std::size_t>(std::lround(seconds * audio::kSampleRate));
  audio::AudioBuffer a(n);
  for (std::size_t i = 0; i < n; ++i)
    a.samples[i] = amplitude * std::sin(2.0 * std::numbers::pi * freq * static_cast<double>(i) / audio::kSampleRate + phase);
  return a;
}

inline audio::AudioBuffer white(double seconds, double sd, std::uint64_t seed) {
  Rng rng(seed);
  const auto n = static_cast<std::size_t>(std::lround(seconds * audio::kSampleRate));
  audio::AudioBuffer a(n);
  for (auto& v : a.samples) v = sd * rng.normal();
  return a;
}

inline std::vector<double> random_vector(std::size_t n, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("mosest_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace mosest::testing
