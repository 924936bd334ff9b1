#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "mosest/audio/buffer.hpp"
#include "mosest/core/log.hpp"
#include "mosest/features/vad.hpp"
#include "mosest/io/two_column.hpp"

namespace mosest::eval {

inline constexpr double kSegSnrMin = -10.0;
inline constexpr double kSegSnrMax = 35.0;

/// Mean per-frame SNR (clean vs. degraded - clean) over the clean signal's
/// active frames, each frame clamped to [-10, 35] dB. Intrusive.
inline double segsnr_baseline(const audio::AudioBuffer& degraded, const audio::AudioBuffer& clean,
                              const features::FramingParams& p = {}) {
  if (degraded.size() != clean.size()) throw InvalidArgument("segsnr: degraded and clean lengths differ");
  const auto mask = features::vad(clean, p);
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t f = 0; f < mask.size(); ++f) {
    if (!mask[f]) continue;
    const auto c = features::frame_view(clean.view(), f, p);
    const auto d = features::frame_view(degraded.view(), f, p);
    double sig = 0.0, err = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) {
      sig += c[i] * c[i];
      err += (d[i] - c[i]) * (d[i] - c[i]);
    }
    const double snr = err > 0.0 ? 10.0 * std::log10(std::max(sig, 1e-300) / err) : kSegSnrMax;
    total += std::clamp(snr, kSegSnrMin, kSegSnrMax);
    ++count;
  }
  if (count == 0) throw NoSpeech("segsnr: clean reference has no active frames");
  return total / static_cast<double>(count);
}

/// Two-column "id score" file produced by an external tool.
inline std::map<std::string, double> import_external_scores(const std::filesystem::path& path) {
  std::map<std::string, double> out;
  for (const auto& [id, score] : io::read_two_column(path))
    if (!out.emplace(id, score).second) throw DataError(path.string() + ": duplicate utterance id '" + id + "'");
  if (out.empty()) log::warn(path.string() + ": no scores found");
  return out;
}

}  // namespace mosest::eval
