#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mosest/audio/buffer.hpp"
#include "mosest/audio/condition.hpp"
#include "mosest/audio/levels.hpp"
#include "mosest/core/rng.hpp"

namespace mosest::audio {

namespace detail {

/// Paul Kellet's refined pink filter on a white source.
inline std::vector<double> pink_noise(std::size_t n, Rng& rng) {
  std::vector<double> out(n);
  double b0 = 0, b1 = 0, b2 = 0, b3 = 0, b4 = 0, b5 = 0, b6 = 0;
  for (auto& v : out) {
    const double w = rng.normal();
    b0 = 0.99886 * b0 + w * 0.0555179;
    b1 = 0.99332 * b1 + w * 0.0750759;
    b2 = 0.96900 * b2 + w * 0.1538520;
    b3 = 0.86650 * b3 + w * 0.3104856;
    b4 = 0.55000 * b4 + w * 0.5329522;
    b5 = -0.7616 * b5 - w * 0.0168980;
    v = b0 + b1 + b2 + b3 + b4 + b5 + b6 + w * 0.5362;
    b6 = w * 0.115926;
  }
  return out;
}

inline std::vector<double> brown_noise(std::size_t n, Rng& rng) {
  std::vector<double> out(n);
  double acc = 0.0;
  for (auto& v : out) {
    acc = 0.995 * acc + 0.1 * rng.normal();
    v = acc;
  }
  return out;
}

inline std::vector<double> white_noise(std::size_t n, Rng& rng) {
  std::vector<double> out(n);
  for (auto& v : out) v = rng.normal();
  return out;
}

inline void add_unit_rms(std::vector<double>& dst, std::vector<double> src, double weight) {
  const double e = energy(src);
  if (e <= 0.0) return;
  const double g = weight / std::sqrt(e / static_cast<double>(src.size()));
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g * src[i];
}

/// Distant overlapping talkers: harmonic sources with slow amplitude modulation.
inline std::vector<double> babble(std::size_t n, Rng& rng, int talkers) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  std::vector<double> out(n, 0.0);
  for (int t = 0; t < talkers; ++t) {
    const double f0 = rng.uniform(100.0, 220.0);
    const double am = rng.uniform(2.0, 5.0);
    const double am_phase = rng.uniform(0.0, kTwoPi);
    double phase = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double tt = static_cast<double>(i) / kSampleRate;
      const double f = f0 * (1.0 + 0.05 * std::sin(kTwoPi * 0.7 * tt + am_phase));
      phase += kTwoPi * f / kSampleRate;
      double acc = 0.0;
      for (int h = 1; h <= 12; ++h) acc += std::sin(h * phase) / h;
      out[i] += acc * std::max(0.0, std::sin(kTwoPi * am * tt + am_phase));
    }
  }
  return out;
}

}  // namespace detail

/// Synthetic background noise with unit RMS.
///   office: pink floor, distant babble, keyboard clicks
///   home:   brownish floor with mains hum and an appliance tone
///   other:  one of the white / pink / brown colored-noise presets
inline AudioBuffer generate_noise(NoiseKind kind, std::size_t n, Rng& rng) {
  AudioBuffer out(n);
  if (n == 0) return out;
  auto& y = out.samples;
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  switch (kind) {
    case NoiseKind::kOffice: {
      detail::add_unit_rms(y, detail::pink_noise(n, rng), 1.0);
      detail::add_unit_rms(y, detail::babble(n, rng, 3), 0.5);
      std::vector<double> clicks(n, 0.0);
      const double rate = rng.uniform(2.0, 6.0);
      for (std::size_t i = 0; i < n; ++i) {
        if (!rng.bernoulli(rate / kSampleRate)) continue;
        for (std::size_t k = 0; k < 160 && i + k < n; ++k)
          clicks[i + k] += std::exp(-static_cast<double>(k) / 25.0) * rng.normal();
      }
      detail::add_unit_rms(y, std::move(clicks), 0.3);
      break;
    }
    case NoiseKind::kHome: {
      detail::add_unit_rms(y, detail::brown_noise(n, rng), 1.0);
      const double mains = rng.bernoulli(0.5) ? 50.0 : 60.0;
      const double tone = rng.uniform(300.0, 1200.0);
      std::vector<double> hum(n);
      for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / kSampleRate;
        hum[i] = std::sin(kTwoPi * mains * t) + 0.5 * std::sin(kTwoPi * 3 * mains * t) +
                 0.3 * std::sin(kTwoPi * tone * t);
      }
      detail::add_unit_rms(y, std::move(hum), 0.4);
      detail::add_unit_rms(y, detail::white_noise(n, rng), 0.2);
      break;
    }
    case NoiseKind::kOther: {
      switch (rng.uniform_index(3)) {
        case 0: detail::add_unit_rms(y, detail::white_noise(n, rng), 1.0); break;
        case 1: detail::add_unit_rms(y, detail::pink_noise(n, rng), 1.0); break;
        default: detail::add_unit_rms(y, detail::brown_noise(n, rng), 1.0); break;
      }
      break;
    }
  }
  const double e = energy(y);
  if (e > 0.0) {
    const double g = 1.0 / std::sqrt(e / static_cast<double>(n));
    for (double& v : y) v *= g;
  }
  return out;
}

/// Loops or truncates `noise` to `n` samples.
inline AudioBuffer fit_length(const AudioBuffer& noise, std::size_t n) {
  if (noise.empty()) throw InvalidArgument("noise buffer is empty");
  AudioBuffer out(n);
  for (std::size_t i = 0; i < n; ++i) out.samples[i] = noise.samples[i % noise.size()];
  return out;
}

struct MixResult {
  AudioBuffer mixture;
  ConditionSpec spec;  ///< input spec with realized_snr_db filled in
  double noise_gain = 0.0;
  double target_snr_db = 0.0;  ///< before clamping
};

/// Places the noise at its absolute level (noise SPL through the dB FS
/// anchor) against the measured active level of `speech`; the resulting SNR
/// is clamped to [0, 50] dB by rescaling the noise gain.
inline MixResult mix_noise(const AudioBuffer& speech, const AudioBuffer& noise,
                           const ConditionSpec& spec) {
  const AudioBuffer fitted = fit_length(noise, speech.size());
  const auto mask = features::vad(speech);
  if (active_frame_count(mask) == 0) throw UndefinedSnr("speech has no active frames");
  const double ps = active_power(speech.view(), mask);
  const double pn = active_power(fitted.view(), mask);
  if (!(pn > 0.0)) throw InvalidArgument("mix_noise: noise has zero energy");

  MixResult r;
  r.spec = spec;
  r.target_snr_db = db_from_power(ps) - spl_to_dbfs(spec.noise_level_db_spl);
  const double snr = std::clamp(r.target_snr_db, kMinSnrDb, kMaxSnrDb);
  r.noise_gain = std::sqrt(ps / (pn * power_from_db(snr)));
  r.mixture = speech;
  for (std::size_t i = 0; i < speech.size(); ++i)
    r.mixture.samples[i] += r.noise_gain * fitted.samples[i];
  // re-measured; clamped only to absorb rounding at the bounds
  r.spec.realized_snr_db =
      std::clamp(measure_snr(speech, scaled(fitted, r.noise_gain)), kMinSnrDb, kMaxSnrDb);
  return r;
}

}  // namespace mosest::audio
