#pragma once

#include <algorithm>
#include <cmath>

#include "mosest/audio/condition.hpp"
#include "mosest/core/error.hpp"

namespace mosest::audio {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// Deterministic stand-in for listener ratings; nondecreasing in SNR and DRR.
inline double proxy_mos(double snr_db, double drr_db, bool processed) {
  if (!(snr_db >= kMinSnrDb - 1e-9 && snr_db <= kMaxSnrDb + 1e-9))
    throw InvalidArgument("proxy_mos: SNR outside [0, 50] dB");
  const double bonus = processed ? 1.05 : 1.0;
  const double q = std::min(1.0, sigmoid(0.18 * (snr_db - 18.0)) * sigmoid(0.5 * (drr_db + 2.0)) * bonus);
  return 1.0 + 4.0 * q;
}

inline double proxy_mos(const ConditionSpec& spec, double drr_db) {
  return proxy_mos(spec.realized_snr_db, drr_db, spec.processed);
}

}  // namespace mosest::audio
