#pragma once

#include <cstdint>
#include <span>

#include "mosest/audio/buffer.hpp"
#include "mosest/core/error.hpp"
#include "mosest/features/vad.hpp"

namespace mosest::audio {

/// Mean of per-frame mean-square over the frames flagged in `mask`.
/// Returns 0 when no frame is active.
inline double active_power(std::span<const double> x, std::span<const std::uint8_t> mask,
                           const features::FramingParams& p = {}) {
  const auto powers = features::frame_powers(x, p);
  if (powers.size() != mask.size()) throw InvalidArgument("activity mask length mismatch");
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t f = 0; f < powers.size(); ++f) {
    if (!mask[f]) continue;
    sum += powers[f];
    ++count;
  }
  return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

inline std::size_t active_frame_count(std::span<const std::uint8_t> mask) {
  std::size_t n = 0;
  for (auto m : mask) n += m;
  return n;
}

/// Active-speech level, 20*log10(active RMS / full scale).
inline double active_level_dbfs(const AudioBuffer& a) {
  const auto mask = features::vad(a);
  const double pw = active_power(a.view(), mask);
  if (!(pw > 0.0)) throw CannotNormalize("signal has no active content");
  return db_from_power(pw);
}

inline AudioBuffer normalize_level(const AudioBuffer& a, double target_dbfs) {
  const auto mask = features::vad(a);
  const double pw = active_power(a.view(), mask);
  if (!(pw > 0.0)) throw CannotNormalize("cannot normalize a signal without active samples");
  return scaled(a, gain_from_db(target_dbfs - db_from_power(pw)));
}

/// SNR over the speech-active frames of `speech` (VAD on the speech signal).
inline double measure_snr(const AudioBuffer& speech, const AudioBuffer& noise) {
  if (speech.size() != noise.size()) throw InvalidArgument("measure_snr: length mismatch");
  const auto mask = features::vad(speech);
  if (active_frame_count(mask) == 0) throw UndefinedSnr("speech has no active frames");
  const double ps = active_power(speech.view(), mask);
  const double pn = active_power(noise.view(), mask);
  if (!(pn > 0.0)) throw UndefinedSnr("noise has no energy in speech-active frames");
  return db_from_power(ps / pn);
}

}  // namespace mosest::audio
