#pragma once

#include <array>
#include <cmath>
#include <span>
#include <vector>

#include "mosest/audio/buffer.hpp"
#include "mosest/core/error.hpp"
#include "mosest/features/mfcc.hpp"
#include "mosest/features/pitch.hpp"
#include "mosest/features/stft.hpp"
#include "mosest/features/vad.hpp"

namespace mosest::features {

inline constexpr std::size_t kMfccCount = 26;
inline constexpr std::size_t kStaticDim = kMfccCount + 3;
inline constexpr std::size_t kFrameDim = 2 * kStaticDim;
inline constexpr std::size_t kContextRadius = 12;
inline constexpr std::size_t kContextFrames = 2 * kContextRadius + 1;
inline constexpr std::size_t kMelContextDim = kContextFrames * kFrameDim;
inline constexpr double kLogEnergyFloor = 1e-10;

using StaticVector = std::array<double, kStaticDim>;
using MelContextVector = std::array<double, kMelContextDim>;

struct FrameFeatures {
  std::array<double, kMfccCount> mfcc{};
  double pitch_hz = 0.0;
  double vad = 0.0;
  double log_energy = 0.0;
  StaticVector deltas{};

  StaticVector statics() const {
    StaticVector s{};
    std::copy(mfcc.begin(), mfcc.end(), s.begin());
    s[kMfccCount] = pitch_hz;
    s[kMfccCount + 1] = vad;
    s[kMfccCount + 2] = log_energy;
    return s;
  }

  std::array<double, kFrameDim> flat() const {
    std::array<double, kFrameDim> out{};
    const auto s = statics();
    std::copy(s.begin(), s.end(), out.begin());
    std::copy(deltas.begin(), deltas.end(), out.begin() + kStaticDim);
    return out;
  }

  bool active() const noexcept { return vad > 0.5; }
};

/// First differences against the preceding frame; frame 0 gets zeros.
inline std::vector<StaticVector> deltas(std::span<const StaticVector> seq) {
  if (seq.empty()) throw InvalidArgument("deltas: empty sequence");
  std::vector<StaticVector> out(seq.size());
  out[0].fill(0.0);
  for (std::size_t t = 1; t < seq.size(); ++t)
    for (std::size_t i = 0; i < kStaticDim; ++i) out[t][i] = seq[t][i] - seq[t - 1][i];
  return out;
}

struct MelFeatureParams {
  FramingParams framing;
  MfccParams mfcc;
  PitchParams pitch;
  VadParams vad;
};

/// Per-frame features over every full frame. Inputs shorter than one window
/// are zero-padded to a single frame.
inline std::vector<FrameFeatures> frame_features(std::span<const double> x, const MelFeatureParams& p = {}) {
  if (p.mfcc.coefficients != kMfccCount) throw InvalidArgument("frame features expect 26 MFCCs");
  if (x.empty()) throw InvalidArgument("frame features: empty signal");
  std::vector<double> padded;
  if (x.size() < p.framing.window_len) {
    padded.assign(x.begin(), x.end());
    padded.resize(p.framing.window_len, 0.0);
    x = padded;
  }
  const auto spec = stft(x, p.framing);
  const Mfcc mfcc(p.mfcc);
  const auto mask = vad(x, p.framing, p.vad);
  std::vector<FrameFeatures> out(spec.size());
  std::vector<StaticVector> statics(spec.size());
  for (std::size_t f = 0; f < spec.size(); ++f) {
    auto& ff = out[f];
    const auto c = mfcc(magnitude(spec.frames[f]));
    std::copy(c.begin(), c.end(), ff.mfcc.begin());
    ff.pitch_hz = pitch_estimate(x, f, p.framing, p.pitch);
    ff.vad = mask[f] ? 1.0 : 0.0;
    ff.log_energy = std::log(std::max(audio::energy(frame_view(x, f, p.framing)), kLogEnergyFloor));
    statics[f] = ff.statics();
  }
  const auto d = deltas(statics);
  for (std::size_t f = 0; f < out.size(); ++f) out[f].deltas = d[f];
  return out;
}

inline std::vector<FrameFeatures> frame_features(const audio::AudioBuffer& a, const MelFeatureParams& p = {}) {
  return frame_features(a.view(), p);
}

/// 25-frame window around an active center; edges replicate the first/last frame.
inline MelContextVector stack_context(std::span<const FrameFeatures> frames, std::size_t center) {
  if (center >= frames.size()) throw InvalidArgument("stack_context: center out of range");
  if (!frames[center].active()) throw InvalidArgument("stack_context: center frame is not speech-active");
  MelContextVector out{};
  const auto last = static_cast<std::ptrdiff_t>(frames.size()) - 1;
  for (std::size_t slot = 0; slot < kContextFrames; ++slot) {
    const auto idx = std::clamp(static_cast<std::ptrdiff_t>(center + slot) - static_cast<std::ptrdiff_t>(kContextRadius),
                                std::ptrdiff_t{0}, last);
    const auto f = frames[static_cast<std::size_t>(idx)].flat();
    std::copy(f.begin(), f.end(), out.begin() + static_cast<std::ptrdiff_t>(slot * kFrameDim));
  }
  return out;
}

/// One context vector per speech-active frame, in frame order.
inline std::vector<MelContextVector> mel_context_vectors(std::span<const FrameFeatures> frames) {
  std::vector<MelContextVector> out;
  for (std::size_t f = 0; f < frames.size(); ++f)
    if (frames[f].active()) out.push_back(stack_context(frames, f));
  return out;
}

}  // namespace mosest::features
