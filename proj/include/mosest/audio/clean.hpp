#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "mosest/audio/buffer.hpp"
#include "mosest/core/error.hpp"
#include "mosest/core/rng.hpp"

namespace mosest::audio {

/// Utterance layout as fractions of the total duration: 4 s of leading
/// silence, three 4 s bursts and 2 s gaps for a 20 s file.
struct CleanLayout {
  double lead_s = 0.0;
  double burst_s = 0.0;
  double gap_s = 0.0;
  std::array<std::pair<double, double>, 3> bursts{};
};

inline CleanLayout clean_layout(double duration_s) {
  if (!(duration_s > 0.0) || !std::isfinite(duration_s))
    throw InvalidArgument("clean signal duration must be positive");
  CleanLayout l;
  l.lead_s = 0.2 * duration_s;
  l.burst_s = 0.2 * duration_s;
  l.gap_s = 0.1 * duration_s;
  double t = l.lead_s;
  for (auto& b : l.bursts) {
    b = {t, t + l.burst_s};
    t += l.burst_s + l.gap_s;
  }
  return l;
}

namespace detail {

struct Vowel {
  double f1, f2, f3;
};

inline constexpr std::array<Vowel, 6> kVowels{{
    {730, 1090, 2440},
    {270, 2290, 3010},
    {300, 870, 2240},
    {530, 1840, 2480},
    {570, 840, 2410},
    {660, 1720, 2410},
}};

inline double formant_gain(double f, const Vowel& v) {
  auto peak = [f](double fc, double bw) {
    const double x = (f - fc) / bw;
    return 1.0 / (1.0 + x * x);
  };
  return peak(v.f1, 90.0) + 0.7 * peak(v.f2, 120.0) + 0.4 * peak(v.f3, 180.0) + 0.02;
}

}  // namespace detail

/// Speech-like test material: harmonic bursts with pitch drift, vowel-like
/// formant weighting and syllabic envelopes, separated by digital silence.
inline AudioBuffer generate_clean(double duration_s, Rng& rng) {
  const auto layout = clean_layout(duration_s);
  const double fs = kSampleRate;
  const auto n = static_cast<std::size_t>(std::lround(duration_s * fs));
  AudioBuffer out(n);
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  constexpr std::size_t kBlock = 80;

  const double speaker_f0 = rng.uniform(95.0, 240.0);
  for (const auto& [t0, t1] : layout.bursts) {
    const auto s0 = static_cast<std::size_t>(std::lround(t0 * fs));
    const auto s1 = std::min(n, static_cast<std::size_t>(std::lround(t1 * fs)));
    if (s1 <= s0) continue;
    const std::size_t len = s1 - s0;
    const auto syllables = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::lround(static_cast<double>(len) / (0.22 * fs))));
    const double syl_len = static_cast<double>(len) / static_cast<double>(syllables);

    const double f0_base = speaker_f0 * rng.uniform(0.9, 1.1);
    const double drift_rate = rng.uniform(1.5, 4.0);
    const double drift_phase = rng.uniform(0.0, kTwoPi);
    const double slope = rng.uniform(-0.15, 0.05);
    std::vector<std::size_t> vowel(syllables);
    std::vector<double> syl_amp(syllables);
    for (std::size_t s = 0; s < syllables; ++s) {
      vowel[s] = static_cast<std::size_t>(rng.uniform_index(detail::kVowels.size()));
      syl_amp[s] = rng.uniform(0.5, 1.0);
    }

    double phase = rng.uniform(0.0, kTwoPi);
    std::vector<double> harm_amp;
    for (std::size_t i = 0; i < len; i += kBlock) {
      const double tb = static_cast<double>(i) / fs;
      const double rel = static_cast<double>(i) / static_cast<double>(len);
      const double f0 =
          f0_base * (1.0 + 0.06 * std::sin(kTwoPi * drift_rate * tb + drift_phase) + slope * rel);
      const auto syl = std::min(syllables - 1, static_cast<std::size_t>(static_cast<double>(i) / syl_len));
      const auto& v = detail::kVowels[vowel[syl]];
      const auto harmonics = static_cast<std::size_t>(7600.0 / f0);
      harm_amp.resize(harmonics);
      for (std::size_t h = 1; h <= harmonics; ++h)
        harm_amp[h - 1] = detail::formant_gain(static_cast<double>(h) * f0, v) / std::sqrt(static_cast<double>(h));
      const std::size_t end = std::min(len, i + kBlock);
      for (std::size_t j = i; j < end; ++j) {
        phase += kTwoPi * f0 / fs;
        if (phase > kTwoPi * 1e6) phase = std::fmod(phase, kTwoPi);
        const double pos = static_cast<double>(j) - static_cast<double>(syl) * syl_len;
        const double env = syl_amp[syl] * std::sin(std::numbers::pi * std::clamp(pos / syl_len, 0.0, 1.0));
        double acc = 0.0;
        for (std::size_t h = 0; h < harmonics; ++h)
          acc += harm_amp[h] * std::sin(static_cast<double>(h + 1) * phase);
        out.samples[s0 + j] = env * (acc + 0.05 * rng.normal());
      }
    }
  }
  double peak = 0.0;
  for (double v : out.samples) peak = std::max(peak, std::abs(v));
  if (peak > 0.0)
    for (double& v : out.samples) v *= 0.5 / peak;
  return out;
}

}  // namespace mosest::audio
