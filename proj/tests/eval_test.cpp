#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <set>

#include "mosest/audio/levels.hpp"
#include "mosest/eval/baseline.hpp"
#include "mosest/eval/metrics.hpp"
#include "mosest/eval/plot.hpp"
#include "mosest/eval/report.hpp"
#include "mosest/eval/split.hpp"
#include "test_util.hpp"

namespace mosest::eval {
namespace {

using mosest::testing::random_vector;
using mosest::testing::tone;
using mosest::testing::white;

std::vector<std::string> ids(std::size_t n) {
  std::vector<std::string> v;
  for (std::size_t i = 0; i < n; ++i) v.push_back("utt_" + std::to_string(i));
  return v;
}

// --- split -----------------------------------------------------------------

TEST(Split, FullScale) {
  const auto a = split(ids(10000), 1);
  EXPECT_EQ(a.train.size(), 7000u);
  EXPECT_EQ(a.val.size(), 1500u);
  EXPECT_EQ(a.test.size(), 1500u);
}

TEST(Split, Twenty) {
  const auto a = split(ids(20), 1);
  EXPECT_EQ(a.train.size(), 14u);
  EXPECT_EQ(a.val.size(), 3u);
  EXPECT_EQ(a.test.size(), 3u);
}

TEST(Split, Deterministic) {
  EXPECT_EQ(split(ids(50), 9).of, split(ids(50), 9).of);
  EXPECT_NE(split(ids(50), 9).of, split(ids(50), 10).of);
}

TEST(Split, PartitionProperty) {
  Rng rng(3);
  for (int t = 0; t < 60; ++t) {
    const std::size_t n = 3 + rng.uniform_index(10000 - 3 + 1);
    const auto all = ids(n);
    const auto a = split(all, rng.next_u64());
    const auto held = static_cast<std::size_t>(std::lround(0.15 * static_cast<double>(n)));
    ASSERT_EQ(a.val.size(), held);
    ASSERT_EQ(a.test.size(), held);
    ASSERT_EQ(a.train.size() + a.val.size() + a.test.size(), n);
    std::set<std::string> seen(a.train.begin(), a.train.end());
    seen.insert(a.val.begin(), a.val.end());
    seen.insert(a.test.begin(), a.test.end());
    ASSERT_EQ(seen.size(), n);
  }
}

TEST(Split, TooSmallThrows) { EXPECT_THROW(split(ids(2), 1), InvalidArgument); }

// --- pearson / mse ---------------------------------------------------------

TEST(Pearson, PerfectLinear) {
  const std::vector<double> x{1, 2, 3, 4}, y{2, 4, 6, 8}, z{-1, -2, -3, -4};
  EXPECT_NEAR(pearson(x, y), 1.0, 1e-15);
  EXPECT_NEAR(pearson(x, z), -1.0, 1e-15);
}

TEST(Pearson, HandCase) {
  EXPECT_NEAR(pearson(std::vector<double>{1, 2, 3, 4}, std::vector<double>{1, 3, 2, 4}), 0.8, 1e-12);
}

TEST(Pearson, ConstantThrows) {
  EXPECT_THROW(pearson(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3}), UndefinedCorrelation);
}

TEST(Pearson, MatchesDefinition) {
  Rng rng(5);
  const auto x = random_vector(10, rng), y = random_vector(10, rng);
  double mx = 0, my = 0;
  for (int i = 0; i < 10; ++i) {
    mx += x[i] / 10;
    my += y[i] / 10;
  }
  double c = 0, vx = 0, vy = 0;
  for (int i = 0; i < 10; ++i) {
    c += (x[i] - mx) * (y[i] - my);
    vx += (x[i] - mx) * (x[i] - mx);
    vy += (y[i] - my) * (y[i] - my);
  }
  EXPECT_NEAR(pearson(x, y), c / std::sqrt(vx * vy), 1e-12);
}

TEST(Pearson, AffineInvariant) {
  Rng rng(6);
  for (int t = 0; t < 50; ++t) {
    const auto x = random_vector(20, rng), y = random_vector(20, rng);
    const double a = rng.uniform(0.1, 10.0), b = rng.uniform(-5.0, 5.0);
    std::vector<double> xa(x);
    for (auto& v : xa) v = a * v + b;
    EXPECT_NEAR(pearson(xa, y), pearson(x, y), 1e-12);
  }
}

TEST(Mse, Cases) {
  const std::vector<double> a{1, 2, 3};
  EXPECT_EQ(mse(a, a), 0.0);
  EXPECT_DOUBLE_EQ(mse(std::vector<double>{0, 0}, std::vector<double>{1, 1}), 1.0);
  EXPECT_THROW(mse(std::vector<double>{1}, std::vector<double>{1, 2}), InvalidArgument);
}

TEST(Mse, BruteForceAndSymmetry) {
  Rng rng(7);
  const auto x = random_vector(10, rng), y = random_vector(10, rng);
  double s = 0;
  for (int i = 0; i < 10; ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
  EXPECT_NEAR(mse(x, y), s / 10, 1e-12);
  EXPECT_EQ(mse(x, y), mse(y, x));
  EXPECT_GT(mse(x, y), 0.0);
}

// --- segsnr ----------------------------------------------------------------

TEST(SegSnr, IdenticalIsUpperClamp) {
  const auto c = tone(300.0, 1.0);
  EXPECT_DOUBLE_EQ(segsnr_baseline(c, c), 35.0);
}

TEST(SegSnr, PureNoiseIsLowerClamp) {
  const auto c = tone(300.0, 1.0, 0.01);
  auto d = white(1.0, 1.0, 3);
  EXPECT_DOUBLE_EQ(segsnr_baseline(d, c), -10.0);
}

TEST(SegSnr, KnownMixture) {
  const auto c = tone(300.0, 2.0, 0.5);
  auto n = white(2.0, 1.0, 4);
  // noise power = signal power / 10
  const double g = std::sqrt(0.125 / 10.0);
  audio::AudioBuffer d = c;
  for (std::size_t i = 0; i < d.size(); ++i) d.samples[i] += g * n.samples[i];
  EXPECT_NEAR(segsnr_baseline(d, c), 10.0, 1.0);
}

TEST(SegSnr, LengthMismatch) { EXPECT_THROW(segsnr_baseline(tone(300, 1.0), tone(300, 0.5)), InvalidArgument); }

// --- external scores -------------------------------------------------------

TEST(ExternalScores, Cases) {
  const auto dir = mosest::testing::scratch_dir("external");
  {
    std::ofstream f(dir / "ok.txt");
    for (int i = 0; i < 5; ++i) f << "utt_" << i << " " << 1.5 + i * 0.5 << "\n";
  }
  EXPECT_EQ(import_external_scores(dir / "ok.txt").size(), 5u);
  { std::ofstream(dir / "dup.txt") << "a 1\nb 2\na 3\n"; }
  try {
    import_external_scores(dir / "dup.txt");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("'a'"), std::string::npos);
  }
  { std::ofstream(dir / "empty.txt") << ""; }
  EXPECT_TRUE(import_external_scores(dir / "empty.txt").empty());
  { std::ofstream(dir / "bad.txt") << "a 1\nb\n"; }
  try {
    import_external_scores(dir / "bad.txt");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

// --- evaluate --------------------------------------------------------------

std::map<std::string, double> label_map(std::size_t n, Rng& rng) {
  std::map<std::string, double> m;
  for (const auto& id : ids(n)) m[id] = rng.uniform(1.5, 4.5);
  return m;
}

TEST(Evaluate, Identity) {
  Rng rng(1);
  const auto labels = label_map(20, rng);
  const auto r = evaluate("m", labels, labels, ids(20));
  EXPECT_NEAR(r.rho, 1.0, 1e-12);
  EXPECT_EQ(r.mse, 0.0);
  EXPECT_EQ(r.n, 20u);
}

TEST(Evaluate, ShiftChangesOnlyMse) {
  Rng rng(2);
  const auto labels = label_map(20, rng);
  auto pred = labels;
  for (auto& [k, v] : pred) v += 0.5;
  const auto r = evaluate("m", pred, labels, ids(20));
  EXPECT_NEAR(r.rho, 1.0, 1e-12);
  EXPECT_NEAR(r.mse, 0.25, 1e-12);
}

TEST(Evaluate, MissingPredictionsCounted) {
  Rng rng(3);
  const auto labels = label_map(10, rng);
  auto pred = labels;
  pred.erase("utt_3");
  pred["utt_4"] = std::nan("");
  const auto r = evaluate("m", pred, labels, ids(10));
  EXPECT_EQ(r.n, 8u);
  EXPECT_EQ(r.errored, 2u);
}

TEST(Evaluate, TooFewPairs) {
  Rng rng(3);
  const auto labels = label_map(3, rng);
  EXPECT_THROW(evaluate("m", {{"utt_0", 2.0}}, labels, ids(3)), DataError);
}

TEST(Evaluate, ClipsToMosRange) {
  const std::map<std::string, double> labels{{"a", 1.0}, {"b", 5.0}, {"c", 3.0}};
  const std::map<std::string, double> pred{{"a", -3.0}, {"b", 9.0}, {"c", 3.0}};
  const auto r = evaluate("m", pred, labels, {"a", "b", "c"});
  EXPECT_EQ(r.mse, 0.0);
}

TEST(Evaluate, ResidualCsvFixedPoint) {
  Rng rng(4);
  const auto labels = label_map(15, rng);
  auto pred = labels;
  for (auto& [k, v] : pred) v = std::round(rng.uniform(1.0, 5.0) * 1e6) / 1e6;
  auto lab = labels;
  for (auto& [k, v] : lab) v = std::round(v * 1e6) / 1e6;
  const auto r = evaluate("m", pred, lab, ids(15));
  const auto parsed = parse_residual_csv(format_residual_csv({r}));
  ASSERT_EQ(parsed.size(), 1u);
  const auto again = report_from_residuals(parsed[0].first, parsed[0].second);
  EXPECT_EQ(again.rho, r.rho);
  EXPECT_EQ(again.mse, r.mse);
  EXPECT_EQ(format_report_csv({again}), format_report_csv({r}));
}

TEST(Report, CsvLayout) {
  EvalReport r{"mel_dnn", 0.912345678, 0.1, 30, 0, {}};
  EXPECT_EQ(format_report_csv({r}), "model,rho,mse,n\nmel_dnn,0.912346,0.100000,30\n");
}

TEST(Plot, SvgOutputs) {
  Rng rng(5);
  const auto labels = label_map(12, rng);
  auto pred = labels;
  for (auto& [k, v] : pred) v += rng.uniform(-0.3, 0.3);
  const auto r = evaluate("m<1>", pred, labels, ids(12));
  const auto s = scatter_svg(r);
  EXPECT_EQ(s.rfind("<svg", 0), 0u);
  EXPECT_NE(s.find("m&lt;1&gt;"), std::string::npos);
  std::size_t circles = 0;
  for (std::size_t pos = s.find("<circle"); pos != std::string::npos; pos = s.find("<circle", pos + 1)) ++circles;
  EXPECT_EQ(circles, 12u);
  std::vector<double> v;
  for (const auto& [k, x] : labels) v.push_back(x);
  EXPECT_NE(histogram_svg(v, "labels").find("</svg>"), std::string::npos);
}

TEST(LinearFit, Recovers) {
  const std::vector<double> x{0, 1, 2, 3}, y{1, 3, 5, 7};
  const auto m = fit_linear(x, y);
  EXPECT_NEAR(m.slope, 2.0, 1e-12);
  EXPECT_NEAR(m.intercept, 1.0, 1e-12);
}

}  // namespace
}  // namespace mosest::eval
