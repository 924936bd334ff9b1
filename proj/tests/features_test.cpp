#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "mosest/audio/clean.hpp"
#include "mosest/features/cqt.hpp"
#include "mosest/features/dump.hpp"
#include "mosest/features/mel_context.hpp"
#include "mosest/features/mfcc.hpp"
#include "mosest/features/pitch.hpp"
#include "mosest/features/stft.hpp"
#include "mosest/features/vad.hpp"
#include "test_util.hpp"

namespace mosest::features {
namespace {

using mosest::testing::random_vector;
using mosest::testing::tone;
using mosest::testing::white;

std::vector<dsp::Complex> direct_dft(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<dsp::Complex> out(n / 2 + 1);
  for (std::size_t k = 0; k <= n / 2; ++k) {
    dsp::Complex acc = 0.0;
    for (std::size_t t = 0; t < n; ++t)
      acc += x[t] * std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k * t % n) / static_cast<double>(n));
    out[k] = acc;
  }
  return out;
}

std::vector<double> windowed(std::span<const double> x, std::size_t start) {
  std::vector<double> w(512);
  for (std::size_t i = 0; i < 512; ++i)
    w[i] = x[start + i] * (0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / 512.0));
  return w;
}

// --- stft ------------------------------------------------------------------

TEST(Stft, MatchesDirectDft) {
  Rng rng(3);
  const auto x = random_vector(2048, rng);
  const auto s = stft(x);
  ASSERT_EQ(s.size(), 10u);
  for (std::size_t f : {0u, 4u, 9u}) {
    const auto ref = direct_dft(windowed(x, f * 160));
    ASSERT_EQ(s.frames[f].size(), 257u);
    double scale = 0.0;
    for (const auto& v : ref) scale = std::max(scale, std::abs(v));
    for (std::size_t k = 0; k < 257; ++k) EXPECT_LE(std::abs(s.frames[f][k] - ref[k]), 1e-9 * scale);
  }
}

TEST(Stft, ZeroSignal) {
  const std::vector<double> x(1000, 0.0);
  for (const auto& fr : stft(x).frames)
    for (const auto& v : fr) EXPECT_EQ(std::abs(v), 0.0);
}

TEST(Stft, ToneArgmaxBin32) {
  const auto a = tone(1000.0, 0.2);
  const auto s = stft(a);
  for (const auto& fr : s.frames) {
    const auto m = magnitude(fr);
    EXPECT_EQ(std::max_element(m.begin(), m.end()) - m.begin(), 32);
  }
}

TEST(Stft, FrameCount) {
  Rng rng(1);
  EXPECT_EQ(stft(random_vector(2048, rng)).size(), 10u);
  EXPECT_EQ(stft(random_vector(512, rng)).size(), 1u);
}

TEST(Stft, TooShortThrows) {
  const std::vector<double> x(511, 0.1);
  EXPECT_THROW(stft(x), InvalidArgument);
}

TEST(Stft, Parseval) {
  Rng rng(9);
  const auto x = random_vector(4000, rng);
  const auto s = stft(x);
  for (std::size_t f = 0; f < s.size(); ++f) {
    const auto w = windowed(x, f * 160);
    double e = 0.0;
    for (double v : w) e += v * v;
    EXPECT_NEAR(spectrum_energy(s.frames[f], 512), e, 1e-6 * e);
  }
}

TEST(Stft, Deterministic) {
  const auto a = white(0.5, 0.1, 4);
  const auto s1 = stft(a), s2 = stft(a);
  for (std::size_t f = 0; f < s1.size(); ++f)
    for (std::size_t k = 0; k < 257; ++k) EXPECT_EQ(s1.frames[f][k], s2.frames[f][k]);
}

// --- mfcc ------------------------------------------------------------------

// Independent restatement: HTK mel edges, Hz-linear triangles written as a
// min of two slopes, unit-sum rows, natural log, orthonormal DCT-II.
std::vector<double> reference_mfcc(const std::vector<double>& mag) {
  const int M = 40, C = 26, K = 257;
  auto mel = [](double f) { return 1127.0 * std::log(1.0 + f / 700.0); };
  auto inv = [](double m) { return 700.0 * (std::exp(m / 1127.0) - 1.0); };
  std::vector<double> log_e(M);
  for (int m = 0; m < M; ++m) {
    const double step = mel(8000.0) / (M + 1);
    const double lo = inv(step * m), mid = inv(step * (m + 1)), hi = inv(step * (m + 2));
    double wsum = 0.0, acc = 0.0;
    for (int k = 0; k < K; ++k) {
      const double f = k * 16000.0 / 512.0;
      const double w = std::max(0.0, std::min((f - lo) / (mid - lo), (hi - f) / (hi - mid)));
      wsum += w;
      acc += w * mag[k] * mag[k];
    }
    log_e[m] = std::log(std::max(acc / wsum, 1e-10));
  }
  std::vector<double> c(C);
  for (int i = 0; i < C; ++i) {
    double s = 0.0;
    for (int m = 0; m < M; ++m) s += log_e[m] * std::cos(std::numbers::pi * i * (2 * m + 1) / (2.0 * M));
    c[i] = s * std::sqrt((i == 0 ? 1.0 : 2.0) / M);
  }
  return c;
}

TEST(Mfcc, ZeroSpectrum) {
  const auto c = mfcc(std::vector<double>(257, 0.0));
  ASSERT_EQ(c.size(), 26u);
  EXPECT_NEAR(c[0], std::sqrt(40.0) * std::log(1e-10), 1e-9);
  for (std::size_t i = 1; i < 26; ++i) EXPECT_NEAR(c[i], 0.0, 1e-9);
}

TEST(Mfcc, FlatSpectrum) {
  const auto c = mfcc(std::vector<double>(257, 1.0));
  for (std::size_t i = 0; i < 26; ++i) EXPECT_NEAR(c[i], 0.0, 1e-9);
}

TEST(Mfcc, ToneMatchesReference) {
  const auto a = tone(1000.0, 0.1);
  const auto s = stft(a);
  const auto mag = magnitude(s.frames[2]);
  const auto c = mfcc(mag);
  const auto ref = reference_mfcc(mag);
  for (std::size_t i = 0; i < 26; ++i) EXPECT_NEAR(c[i], ref[i], 1e-6) << i;
}

TEST(Mfcc, RandomSpectrumMatchesReference) {
  Rng rng(12);
  const auto mag = random_vector(257, rng, 0.0, 2.0);
  const auto c = mfcc(mag);
  const auto ref = reference_mfcc(mag);
  for (std::size_t i = 0; i < 26; ++i) EXPECT_NEAR(c[i], ref[i], 1e-6) << i;
}

TEST(Mfcc, WrongSizeThrows) { EXPECT_THROW(mfcc(std::vector<double>(100, 1.0)), InvalidArgument); }

// --- pitch -----------------------------------------------------------------

TEST(Pitch, Sine200) {
  const auto a = tone(200.0, 0.5);
  for (std::size_t f : {0u, 10u, 20u}) EXPECT_NEAR(pitch_estimate(a.view(), f), 200.0, 2.0);
}

TEST(Pitch, Square100NoOctaveError) {
  audio::AudioBuffer a(8000);
  for (std::size_t i = 0; i < a.size(); ++i) a.samples[i] = (i % 160) < 80 ? 0.5 : -0.5;
  for (std::size_t f : {0u, 5u, 15u}) EXPECT_NEAR(pitch_estimate(a.view(), f), 100.0, 2.0);
}

TEST(Pitch, WhiteNoiseUnvoiced) {
  const auto a = white(0.5, 0.3, 77);
  for (std::size_t f : {0u, 10u, 20u}) EXPECT_EQ(pitch_estimate(a.view(), f), 0.0);
}

TEST(Pitch, SilenceUnvoiced) {
  const std::vector<double> x(4000, 0.0);
  EXPECT_EQ(pitch_estimate(x, 3), 0.0);
}

// --- vad -------------------------------------------------------------------

TEST(Vad, DigitalSilence) {
  const std::vector<double> x(8000, 0.0);
  for (auto v : vad(x)) EXPECT_EQ(v, 0);
}

TEST(Vad, ToneAmidSilence) {
  std::vector<double> x(16000, 0.0);
  const auto t = tone(440.0, 0.5, 1.0);
  std::copy(t.samples.begin(), t.samples.end(), x.begin() + 4000);
  const auto m = vad(x);
  // frame 40 spans samples 6400..6911, inside the tone
  EXPECT_EQ(m[40], 1);
  EXPECT_EQ(m[0], 0);
  EXPECT_EQ(m.back(), 0);
}

TEST(Vad, LeadingSilenceOfCleanUtterance) {
  Rng rng(5);
  const auto a = audio::generate_clean(20.0, rng);
  const auto m = vad(a);
  const FramingParams p;
  std::size_t lead = 0, zeros = 0;
  for (std::size_t f = 0; f < m.size() && f * p.hop + p.window_len <= 4 * 16000; ++f, ++lead) zeros += m[f] == 0;
  ASSERT_GT(lead, 300u);
  EXPECT_GE(static_cast<double>(zeros) / lead, 0.95);
}

// --- deltas / context ------------------------------------------------------

std::vector<StaticVector> random_statics(std::size_t n, Rng& rng) {
  std::vector<StaticVector> s(n);
  for (auto& v : s)
    for (auto& x : v) x = rng.uniform(-3.0, 3.0);
  return s;
}

TEST(Deltas, Constant) {
  std::vector<StaticVector> s(6);
  for (auto& v : s) v.fill(2.5);
  for (const auto& d : deltas(s))
    for (double x : d) EXPECT_EQ(x, 0.0);
}

TEST(Deltas, Ramp) {
  std::vector<StaticVector> s(6);
  for (std::size_t t = 0; t < s.size(); ++t) s[t].fill(0.75 * static_cast<double>(t));
  const auto d = deltas(s);
  for (double x : d[0]) EXPECT_EQ(x, 0.0);
  for (std::size_t t = 1; t < d.size(); ++t)
    for (double x : d[t]) EXPECT_EQ(x, 0.75);
}

TEST(Deltas, RandomMatchesSubtraction) {
  Rng rng(8);
  const auto s = random_statics(30, rng);
  const auto d = deltas(s);
  for (std::size_t t = 1; t < s.size(); ++t)
    for (std::size_t i = 0; i < kStaticDim; ++i) EXPECT_EQ(d[t][i], s[t][i] - s[t - 1][i]);
}

TEST(Deltas, InvertsCumsum) {
  Rng rng(21);
  const auto inc = random_statics(40, rng);
  std::vector<StaticVector> cum(inc.size());
  for (std::size_t t = 0; t < inc.size(); ++t)
    for (std::size_t i = 0; i < kStaticDim; ++i) cum[t][i] = (t ? cum[t - 1][i] : 0.0) + inc[t][i];
  const auto d = deltas(cum);
  for (std::size_t t = 1; t < inc.size(); ++t)
    for (std::size_t i = 0; i < kStaticDim; ++i) EXPECT_NEAR(d[t][i], inc[t][i], 1e-12);
}

TEST(Deltas, EmptyThrows) { EXPECT_THROW(deltas({}), InvalidArgument); }

std::vector<FrameFeatures> numbered_frames(std::size_t n) {
  std::vector<FrameFeatures> f(n);
  for (std::size_t t = 0; t < n; ++t) {
    f[t].mfcc.fill(static_cast<double>(t));
    f[t].pitch_hz = 100.0 + static_cast<double>(t);
    f[t].vad = 1.0;
    f[t].log_energy = -static_cast<double>(t);
    f[t].deltas.fill(0.5 * static_cast<double>(t));
  }
  return f;
}

TEST(StackContext, CenterTwelveOfTwentyFive) {
  const auto f = numbered_frames(25);
  const auto v = stack_context(f, 12);
  ASSERT_EQ(v.size(), 1450u);
  for (std::size_t slot = 0; slot < 25; ++slot) {
    const auto ref = f[slot].flat();
    for (std::size_t i = 0; i < kFrameDim; ++i) EXPECT_EQ(v[slot * kFrameDim + i], ref[i]);
  }
}

TEST(StackContext, SingleFrameReplicates) {
  const auto f = numbered_frames(1);
  const auto v = stack_context(f, 0);
  const auto ref = f[0].flat();
  for (std::size_t slot = 0; slot < 25; ++slot)
    for (std::size_t i = 0; i < kFrameDim; ++i) EXPECT_EQ(v[slot * kFrameDim + i], ref[i]);
}

TEST(StackContext, EdgesReplicate) {
  const auto f = numbered_frames(10);
  const auto v = stack_context(f, 2);
  for (std::size_t slot = 0; slot < 25; ++slot) {
    const std::size_t src = std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(slot) - 10, 0, 9);
    EXPECT_EQ(v[slot * kFrameDim + kMfccCount], f[src].pitch_hz);
  }
}

TEST(StackContext, InactiveCenterThrows) {
  auto f = numbered_frames(5);
  f[3].vad = 0.0;
  EXPECT_THROW(stack_context(f, 3), InvalidArgument);
}

TEST(FrameFeatures, LayoutAndDeltas) {
  Rng rng(2);
  const auto a = audio::generate_clean(2.0, rng);
  const auto f = frame_features(a);
  ASSERT_EQ(f.size(), full_frame_count(a.size(), FramingParams{}));
  EXPECT_EQ(f[0].flat().size(), 58u);
  for (double d : f[0].deltas) EXPECT_EQ(d, 0.0);
  const auto s0 = f[10].statics(), s1 = f[11].statics();
  for (std::size_t i = 0; i < kStaticDim; ++i) EXPECT_EQ(f[11].deltas[i], s1[i] - s0[i]);
  std::size_t active = 0;
  for (const auto& x : f) {
    EXPECT_TRUE(x.vad == 0.0 || x.vad == 1.0);
    active += x.active();
  }
  EXPECT_GT(active, 0u);
  EXPECT_EQ(mel_context_vectors(f).size(), active);
}

TEST(FrameFeatures, Deterministic) {
  Rng rng(2);
  const auto a = audio::generate_clean(1.0, rng);
  const auto f1 = frame_features(a), f2 = frame_features(a);
  for (std::size_t t = 0; t < f1.size(); ++t) EXPECT_EQ(f1[t].flat(), f2[t].flat());
}

// --- cqt -------------------------------------------------------------------

TEST(Cqt, ConstantQ) {
  const CqtParams p;
  EXPECT_NEAR(p.q(), 1.0 / (std::pow(2.0, 1.0 / 32.0) - 1.0), 1e-12);
  EXPECT_NEAR(p.q(), 45.668, 5e-4);
  for (std::size_t k = 0; k < p.bins_total; ++k) EXPECT_NEAR(p.bin_q(k), p.bin_q(0), 1e-9);
  EXPECT_LT(p.f_max(), 8000.0);
}

TEST(Cqt, ToneAtBinCenter) {
  const CqtParams p;
  const CqtKernelBank bank(p);
  for (std::size_t k : {20u, 100u, 160u, 230u}) {
    const auto a = tone(p.center(k), 3.0);
    const auto m = bank(a.view());
    // columns whose kernels lie wholly inside the signal
    for (std::size_t col : {12u, 20u}) {
      std::size_t best = 0;
      for (std::size_t r = 1; r < m.rows; ++r)
        if (m.at(r, col) > m.at(best, col)) best = r;
      EXPECT_EQ(best, k);
    }
  }
}

TEST(Cqt, ShortInputThrows) {
  const auto a = tone(440.0, 0.5);
  EXPECT_THROW(cqt(a), InvalidArgument);
}

TEST(Cqt, LastFrameReplicated) {
  const auto a = white(2.0, 0.1, 3);
  const auto m = cqt(a);
  const std::size_t natural = 1 + (a.size() - 1) / 1440;
  for (std::size_t r : {0u, 120u, 239u})
    for (std::size_t c = natural; c < 220; ++c) EXPECT_EQ(m.at(r, c), m.at(r, natural - 1));
}

TEST(Cqt, LongInputsTruncated) {
  const CqtKernelBank bank;
  const auto a10 = white(10.0, 0.1, 1), a30 = white(30.0, 0.1, 1);
  const auto m10 = bank(a10.view()), m30 = bank(a30.view());
  EXPECT_EQ(m10.rows, 240u);
  EXPECT_EQ(m10.cols, 220u);
  EXPECT_EQ(m30.rows, 240u);
  EXPECT_EQ(m30.cols, 220u);
}

// --- dimension contract ----------------------------------------------------

class DimensionContract : public ::testing::TestWithParam<double> {};

TEST_P(DimensionContract, FixedShapes) {
  static const CqtKernelBank bank;
  Rng rng(17);
  const auto a = audio::generate_clean(GetParam(), rng);
  const auto m = cqt_feature_map(a.view(), bank);
  EXPECT_EQ(m.rows, 240u);
  EXPECT_EQ(m.cols, 220u);
  for (double v : m.values) ASSERT_TRUE(std::isfinite(v));
  const auto frames = frame_features(a);
  const auto ctx = mel_context_vectors(frames);
  ASSERT_FALSE(ctx.empty());
  for (const auto& v : ctx) EXPECT_EQ(v.size(), 1450u);
}

INSTANTIATE_TEST_SUITE_P(Durations, DimensionContract, ::testing::Values(0.5, 2.0, 20.0, 60.0));

// --- dump ------------------------------------------------------------------

TEST(FeatureDump, RoundTrip) {
  const auto dir = mosest::testing::scratch_dir("features_dump");
  Rng rng(4);
  FeatureMatrix m{FeatureKind::kMel, 3, 5, random_vector(15, rng)};
  save_features(m, dir / "x.feat");
  const auto back = load_features(dir / "x.feat", FeatureKind::kMel, 5);
  EXPECT_EQ(back.rows, 3u);
  for (std::size_t i = 0; i < 15; ++i) EXPECT_EQ(back.values[i], static_cast<double>(static_cast<float>(m.values[i])));
  EXPECT_THROW(load_features(dir / "x.feat", FeatureKind::kCqt, 5), KindMismatch);
  EXPECT_THROW(load_features(dir / "x.feat", FeatureKind::kMel, 6), FormatError);
}

}  // namespace
}  // namespace mosest::features
