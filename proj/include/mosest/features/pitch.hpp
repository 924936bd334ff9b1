#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "mosest/features/framing.hpp"

namespace mosest::features {

struct PitchParams {
  double f_low = 50.0;
  double f_high = 400.0;
  double voicing_threshold = 0.5;
  /// a later lag wins only if no earlier local peak reaches this share of the best
  double first_peak_ratio = 0.9;
};

/// Normalized cross-correlation between the analysis window at the frame
/// start and the same window shifted by lag (samples past the signal end read
/// as zero). Returns the pitch in Hz, or 0 when the best peak is below the
/// voicing threshold.
inline double pitch_estimate(std::span<const double> x, std::size_t frame_index,
                             const FramingParams& fp = {}, const PitchParams& pp = {}) {
  const std::size_t start = frame_index * fp.hop;
  if (start >= x.size()) return 0.0;
  const auto sample = [&](std::size_t i) { return start + i < x.size() ? x[start + i] : 0.0; };
  const auto min_lag = static_cast<std::size_t>(std::floor(fp.sample_rate / pp.f_high));
  const auto max_lag = static_cast<std::size_t>(std::ceil(fp.sample_rate / pp.f_low));
  const std::size_t n = fp.window_len;

  double e0 = 0.0;
  for (std::size_t i = 0; i < n; ++i) e0 += sample(i) * sample(i);
  if (e0 <= 1e-12) return 0.0;

  std::vector<double> r(max_lag + 2, 0.0);
  // sliding energy of the shifted window
  double el = 0.0;
  for (std::size_t i = min_lag - 1; i < min_lag - 1 + n; ++i) el += sample(i) * sample(i);
  for (std::size_t lag = min_lag - 1; lag <= max_lag + 1; ++lag) {
    if (lag > min_lag - 1) el += sample(lag + n - 1) * sample(lag + n - 1) - sample(lag - 1) * sample(lag - 1);
    double xc = 0.0;
    for (std::size_t i = 0; i < n; ++i) xc += sample(i) * sample(i + lag);
    r[lag] = el > 1e-12 ? xc / std::sqrt(e0 * std::max(el, 1e-12)) : 0.0;
  }
  double best = -1.0;
  for (std::size_t lag = min_lag; lag <= max_lag; ++lag) best = std::max(best, r[lag]);
  if (best < pp.voicing_threshold) return 0.0;
  std::size_t pick = 0;
  for (std::size_t lag = min_lag; lag <= max_lag; ++lag) {
    if (r[lag] >= pp.first_peak_ratio * best && r[lag] >= r[lag - 1] && r[lag] >= r[lag + 1]) {
      pick = lag;
      break;
    }
  }
  if (pick == 0) return 0.0;
  // parabolic refinement
  const double a = r[pick - 1], b = r[pick], c = r[pick + 1];
  const double denom = a - 2.0 * b + c;
  const double offset = std::abs(denom) > 1e-12 ? 0.5 * (a - c) / denom : 0.0;
  return fp.sample_rate / (static_cast<double>(pick) + std::clamp(offset, -0.5, 0.5));
}

}  // namespace mosest::features
