#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

#include "mosest/features/framing.hpp"

namespace mosest::features {

struct VadParams {
  double margin_db = 6.0;
  double floor_percentile = 0.10;
  /// The floor never sits more than this far below the loudest frame, which
  /// keeps decisions invariant to signal gain on clean material.
  double dynamic_range_db = 50.0;
  /// Frames at or below this absolute level (dB FS, mean square) are digital
  /// silence and never active.
  double silence_db = -100.0;
};

inline constexpr double kPowerFloor = 1e-12;

inline double frame_level_db(double mean_square) {
  return 10.0 * std::log10(std::max(mean_square, kPowerFloor));
}

/// Linear-interpolated percentile of an unsorted sample, q in [0, 1].
inline double percentile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

/// Energy VAD: a frame is active when its level exceeds the utterance noise
/// floor by the margin. The floor is the 10th percentile of frame levels,
/// raised to (loudest - dynamic_range_db) when the percentile lands in
/// silence. An utterance with no such contrast (stationary content) is
/// active wherever it rises above digital silence.
inline std::vector<std::uint8_t> vad_from_levels(std::span<const double> level_db,
                                                 const VadParams& vp = {}) {
  std::vector<std::uint8_t> out(level_db.size(), 0);
  if (level_db.empty()) return out;
  const double loudest = *std::max_element(level_db.begin(), level_db.end());
  const double floor_db = std::max(percentile({level_db.begin(), level_db.end()}, vp.floor_percentile),
                                   loudest - vp.dynamic_range_db);
  bool any = false;
  for (std::size_t i = 0; i < level_db.size(); ++i) {
    out[i] = level_db[i] > floor_db + vp.margin_db && level_db[i] > vp.silence_db;
    any = any || out[i];
  }
  if (!any) {
    for (std::size_t i = 0; i < level_db.size(); ++i) out[i] = level_db[i] > vp.silence_db;
  }
  return out;
}

inline std::vector<double> frame_levels_db(std::span<const double> x, const FramingParams& p) {
  auto pw = frame_powers(x, p);
  for (double& v : pw) v = frame_level_db(v);
  return pw;
}

inline std::vector<std::uint8_t> vad(std::span<const double> x, const FramingParams& p = {},
                                     const VadParams& vp = {}) {
  return vad_from_levels(frame_levels_db(x, p), vp);
}

inline std::vector<std::uint8_t> vad(const audio::AudioBuffer& a, const FramingParams& p = {},
                                     const VadParams& vp = {}) {
  return vad(a.view(), p, vp);
}

}  // namespace mosest::features
