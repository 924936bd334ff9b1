#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "mosest/audio/buffer.hpp"
#include "mosest/core/error.hpp"

namespace mosest::features {

struct FramingParams {
  std::size_t window_len = 512;
  std::size_t hop = 160;
  int sample_rate = audio::kSampleRate;

  void validate() const {
    if (window_len == 0 || (window_len & (window_len - 1)) != 0)
      throw InvalidArgument("window length must be a power of two");
    if (hop == 0 || hop > window_len) throw InvalidArgument("hop must be in (0, window_len]");
  }

  std::size_t bins() const noexcept { return window_len / 2 + 1; }
};

/// Number of full frames; signals shorter than one window count as a single
/// (short) frame so level measurements remain defined.
inline std::size_t frame_count(std::size_t n, const FramingParams& p) {
  if (n == 0) return 0;
  if (n < p.window_len) return 1;
  return 1 + (n - p.window_len) / p.hop;
}

inline std::size_t full_frame_count(std::size_t n, const FramingParams& p) {
  return n < p.window_len ? 0 : 1 + (n - p.window_len) / p.hop;
}

inline std::vector<double> periodic_hann(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i)
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
  return w;
}

inline std::span<const double> frame_view(std::span<const double> x, std::size_t frame,
                                          const FramingParams& p) {
  const std::size_t start = frame * p.hop;
  const std::size_t len = std::min(p.window_len, x.size() - std::min(start, x.size()));
  return x.subspan(std::min(start, x.size()), len);
}

/// Mean square of each (unwindowed) frame.
inline std::vector<double> frame_powers(std::span<const double> x, const FramingParams& p) {
  const std::size_t n = frame_count(x.size(), p);
  std::vector<double> out(n);
  for (std::size_t f = 0; f < n; ++f) {
    auto fr = frame_view(x, f, p);
    out[f] = fr.empty() ? 0.0 : audio::energy(fr) / static_cast<double>(fr.size());
  }
  return out;
}

}  // namespace mosest::features
