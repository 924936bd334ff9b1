#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

#include "mosest/core/error.hpp"

namespace mosest::audio {

enum class NoiseKind { kOffice = 0, kHome = 1, kOther = 2 };

inline constexpr std::array<std::string_view, 3> kNoiseKindNames{"office", "home", "other"};

inline std::string_view to_string(NoiseKind k) { return kNoiseKindNames[static_cast<int>(k)]; }

inline std::optional<NoiseKind> parse_noise_kind(std::string_view s) {
  for (std::size_t i = 0; i < kNoiseKindNames.size(); ++i)
    if (kNoiseKindNames[i] == s) return static_cast<NoiseKind>(i);
  return std::nullopt;
}

/// Acoustic level anchor: dB FS = dB SPL - 88, so 65 dB SPL speech sits at
/// the -23 dB FS normalization level.
inline constexpr double kSplToDbfs = -88.0;
inline constexpr double kMinSnrDb = 0.0;
inline constexpr double kMaxSnrDb = 50.0;

inline constexpr double spl_to_dbfs(double spl) { return spl + kSplToDbfs; }

struct ConditionSpec {
  std::string utterance_id;
  double voice_level_db_spl = 65.0;
  double noise_level_db_spl = 45.0;
  std::string rir_id;
  NoiseKind noise_kind = NoiseKind::kOffice;
  bool processed = false;
  double realized_snr_db = 0.0;

  bool operator==(const ConditionSpec&) const = default;
};

}  // namespace mosest::audio
