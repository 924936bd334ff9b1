// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numbers>
#include <numeric>
#include <string>
#include <vector>

#include "mosest/audio/clean.hpp"
#include "mosest/audio/dataset.hpp"
#include "mosest/audio/levels.hpp"
#include "mosest/audio/noise.hpp"
#include "mosest/audio/rir.hpp"
#include "mosest/core/log.hpp"
#include "mosest/eval/metrics.hpp"
#include "mosest/features/cqt.hpp"
#include "mosest/features/mel_context.hpp"
#include "mosest/features/stft.hpp"
#include "mosest/io/container.hpp"
#include "mosest/ivector/gmm.hpp"
#include "mosest/ivector/stats.hpp"
#include "mosest/ivector/tv.hpp"
#include "mosest/nn/elm.hpp"
#include "mosest/nn/gradcheck.hpp"
#include "mosest/nn/layers.hpp"
#include "mosest/nn/loss.hpp"
#include "mosest/pipeline/commands.hpp"

namespace {

namespace fs = std::filesystem;
using namespace mosest;
using Tn = nn::Tensor<double>;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

Tn random_tensor(nn::Shape s, Rng& rng) {
  Tn t(std::move(s));
  for (auto& v : t.data) v = rng.uniform(-1.0, 1.0);
  return t;
}

std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) { return lo + rng.uniform_index(hi - lo + 1); }

// --- gradients -------------------------------------------------------------

Outcome gradient_suite() {
  const auto t0 = Clock::now();
  Rng rng(2024);
  double worst = 0.0;
  std::string worst_case;
  constexpr int kShapes = 30;
  auto note = [&](double err, const std::string& what) {
    if (err > worst || worst_case.empty()) {
      worst = std::max(worst, err);
      worst_case = what;
    }
  };
  for (int trial = 0; trial < kShapes; ++trial) {
    const std::size_t n = pick(rng, 1, 3);
    switch (trial % 6) {
      case 0: {
        const std::size_t in = pick(rng, 1, 9), out = pick(rng, 1, 7);
        nn::Dense<double> d(in, out);
        d.init(rng);
        for (auto& b : d.bias().value.data) b = rng.uniform(-1.0, 1.0);
        note(nn::check_layer(d, random_tensor({n, in}, rng), rng).max_error(), fmt("dense %zux%zu", in, out));
        break;
      }
      case 1: {
        const std::size_t c = pick(rng, 1, 3), o = pick(rng, 1, 3), kh = pick(rng, 1, 3), kw = pick(rng, 1, 3);
        const std::size_t h = kh + pick(rng, 0, 4), w = kw + pick(rng, 0, 4);
        nn::Conv2D<double> conv(c, o, kh, kw);
        conv.init(rng);
        for (auto& b : conv.bias().value.data) b = rng.uniform(-1.0, 1.0);
        note(nn::check_layer(conv, random_tensor({n, c, h, w}, rng), rng).max_error(),
             fmt("conv %zu->%zu %zux%zu on %zux%zu", c, o, kh, kw, h, w));
        break;
      }
      case 2: {
        const std::size_t c = pick(rng, 1, 3), h = pick(rng, 2, 7), w = pick(rng, 2, 7);
        Tn x({n, c, h, w});
        // distinct, spaced values keep every window's argmax stable
        std::vector<std::size_t> order(x.size());
        std::iota(order.begin(), order.end(), 0u);
        shuffle(std::span<std::size_t>(order), rng);
        for (std::size_t i = 0; i < x.size(); ++i) x[i] = 0.01 * static_cast<double>(order[i]);
        nn::MaxPool2D<double> p;
        note(nn::check_layer(p, x, rng).max_error(), fmt("maxpool %zux%zux%zu", c, h, w));
        break;
      }
      case 3: {
        Tn x = random_tensor({n, pick(rng, 1, 12)}, rng);
        for (auto& v : x.data)
          if (std::abs(v) < 1e-3) v = 0.5;
        nn::Relu<double> r;
        note(nn::check_layer(r, x, rng).max_error(), fmt("relu %zu", x.dim(1)));
        break;
      }
      case 4: {
        const double rate = rng.uniform(0.05, 0.6);
        nn::Dropout<double> d(rate);
        const auto x = random_tensor({n, pick(rng, 1, 12)}, rng);
        note(nn::check_layer(d, x, rng, {.training = true, .seed = rng.next_u64()}).max_error(), fmt("dropout %.2f", rate));
        break;
      }
      case 5: {
        nn::Flatten<double> f;
        auto x = random_tensor({n, pick(rng, 1, 3), pick(rng, 1, 4), pick(rng, 1, 4)}, rng);
        note(nn::check_layer(f, x, rng).max_error(), "flatten");
        // the loss gradient on the same draw
        const auto t = random_tensor(x.shape, rng);
        const auto g = nn::mse_loss(x, t).grad;
        std::vector<double> num(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) {
          const double keep = x[i];
          x[i] = keep + 1e-5;
          const double up = nn::mse_loss(x, t).loss;
          x[i] = keep - 1e-5;
          const double down = nn::mse_loss(x, t).loss;
          x[i] = keep;
          num[i] = (up - down) / 2e-5;
        }
        note(nn::relative_error(g.data, num), "mse");
        break;
      }
    }
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-4 && secs < 60.0,
          fmt("%d shapes, worst relative error %.2e (%s), %.1f s", kShapes, worst, worst_case.c_str(), secs)};
}

// --- oracles ---------------------------------------------------------------

Outcome oracle_equivalence() {
  const auto t0 = Clock::now();
  Rng rng(7);
  std::vector<std::string> bad;

  double conv_err = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    const std::size_t c = pick(rng, 1, 3), o = pick(rng, 1, 3), kh = pick(rng, 1, 4), kw = pick(rng, 1, 4);
    const std::size_t h = kh + pick(rng, 0, 10 - kh), w = kw + pick(rng, 0, 10 - kw);
    nn::Conv2D<double> conv(c, o, kh, kw);
    conv.init(rng);
    for (auto& b : conv.bias().value.data) b = rng.uniform(-1.0, 1.0);
    const auto x = random_tensor({2, c, h, w}, rng);
    const auto y = conv.forward(x, {});
    const std::size_t oh = h - kh + 1, ow = w - kw + 1;
    const auto& wt = conv.weight().value;
    for (std::size_t b = 0; b < 2; ++b)
      for (std::size_t oc = 0; oc < o; ++oc)
        for (std::size_t i = 0; i < oh; ++i)
          for (std::size_t j = 0; j < ow; ++j) {
            double s = conv.bias().value[oc];
            for (std::size_t ch = 0; ch < c; ++ch)
              for (std::size_t a = 0; a < kh; ++a)
                for (std::size_t e = 0; e < kw; ++e)
                  s += wt[((oc * c + ch) * kh + a) * kw + e] * x[((b * c + ch) * h + i + a) * w + j + e];
            conv_err = std::max(conv_err, std::abs(y[((b * o + oc) * oh + i) * ow + j] - s));
          }
  }
  if (!(conv_err < 1e-12)) bad.push_back("conv");

  double stft_err = 0.0;
  {
    std::vector<double> x(1024);
    for (auto& v : x) v = rng.uniform(-1.0, 1.0);
    const auto s = features::stft(x);
    for (std::size_t f = 0; f < s.size(); f += 2) {
      double scale = 0.0, diff = 0.0;
      for (std::size_t k = 0; k <= 256; ++k) {
        std::complex<double> acc = 0.0;
        for (std::size_t t = 0; t < 512; ++t) {
          const double win = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(t) / 512.0);
          acc += x[f * 160 + t] * win * std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k * t % 512) / 512.0);
        }
        scale = std::max(scale, std::abs(acc));
        diff = std::max(diff, std::abs(s.frames[f][k] - acc));
      }
      stft_err = std::max(stft_err, diff / scale);
    }
  }
  if (!(stft_err < 1e-9)) bad.push_back("stft");

  double ivec_err = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::Index k = static_cast<Eigen::Index>(pick(rng, 1, 3)), f = static_cast<Eigen::Index>(pick(rng, 1, 3));
    const Eigen::Index d = static_cast<Eigen::Index>(pick(rng, 1, static_cast<std::size_t>(k * f)));
    ivector::TvMatrix tv{ivector::Matrix(k * f, d), ivector::Vector::Zero(k * f), ivector::Vector(k * f), k, f};
    for (Eigen::Index i = 0; i < tv.t.size(); ++i) tv.t.data()[i] = rng.normal(0.0, 0.5);
    for (Eigen::Index i = 0; i < tv.variance.size(); ++i) tv.variance(i) = rng.uniform(0.5, 2.0);
    ivector::SufficientStats s{ivector::Vector(k), ivector::Matrix(k, f), 0.0};
    for (Eigen::Index i = 0; i < k; ++i) s.n(i) = rng.uniform(0.0, 20.0);
    for (Eigen::Index i = 0; i < s.f.size(); ++i) s.f.data()[i] = rng.normal(0.0, 3.0);
    s.frames = s.n.sum();
    ivector::Matrix nbig = ivector::Matrix::Zero(k * f, k * f);
    for (Eigen::Index c = 0; c < k; ++c)
      for (Eigen::Index j = 0; j < f; ++j) nbig(c * f + j, c * f + j) = s.n(c);
    const ivector::Matrix sinv = tv.variance.cwiseInverse().asDiagonal();
    const ivector::Matrix l = ivector::Matrix::Identity(d, d) + tv.t.transpose() * sinv * nbig * tv.t;
    const ivector::Vector w = l.inverse() * tv.t.transpose() * sinv * ivector::supervector(s.f);
    ivec_err = std::max(ivec_err, (ivector::extract_ivector(tv, s) - w).cwiseAbs().maxCoeff());
  }
  if (!(ivec_err < 1e-8)) bad.push_back("ivector");

  double elm_err = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    const auto rows = static_cast<Eigen::Index>(pick(rng, 6, 10)), cols = static_cast<Eigen::Index>(pick(rng, 1, 5));
    Eigen::MatrixXd h(rows, cols);
    Eigen::VectorXd y(rows);
    for (Eigen::Index i = 0; i < h.size(); ++i) h.data()[i] = rng.normal();
    for (Eigen::Index i = 0; i < y.size(); ++i) y(i) = rng.normal();
    const Eigen::VectorXd ref = h.completeOrthogonalDecomposition().pseudoInverse() * y;
    elm_err = std::max(elm_err, (nn::elm_fit(h, y, 0.0) - ref).cwiseAbs().maxCoeff());
  }
  if (!(elm_err < 1e-8)) bad.push_back("elm");

  double metric_err = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    const std::size_t n = pick(rng, 3, 10);
    std::vector<double> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = rng.uniform(1.0, 5.0);
      b[i] = rng.uniform(1.0, 5.0);
    }
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      ma += a[i] / static_cast<double>(n);
      mb += b[i] / static_cast<double>(n);
    }
    double sab = 0.0, saa = 0.0, sbb = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      sab += (a[i] - ma) * (b[i] - mb);
      saa += (a[i] - ma) * (a[i] - ma);
      sbb += (b[i] - mb) * (b[i] - mb);
      sq += (a[i] - b[i]) * (a[i] - b[i]);
    }
    metric_err = std::max(metric_err, std::abs(eval::pearson(a, b) - sab / std::sqrt(saa * sbb)));
    metric_err = std::max(metric_err, std::abs(eval::mse(a, b) - sq / static_cast<double>(n)));
  }
  if (!(metric_err < 1e-12)) bad.push_back("metrics");

  const double secs = seconds_since(t0);
  std::string failed;
  for (const auto& b : bad) failed += " " + b;
  return {bad.empty() && secs < 60.0,
          fmt("conv %.1e, stft %.1e, ivector %.1e, elm %.1e, pearson/mse %.1e, %.1f s%s%s", conv_err, stft_err, ivec_err,
              elm_err, metric_err, secs, failed.empty() ? "" : "; failed:", failed.c_str())};
}

// --- EM --------------------------------------------------------------------

Outcome em_monotonicity() {
  std::size_t drops = 0;
  double worst = 0.0;  // largest relative decrease seen
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    ivector::Matrix x(1200, 3);
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = rng.normal() + (i % 3 == 0 ? 3.0 : 0.0) * static_cast<double>(j);
    Rng urng(seed + 100);
    const auto ubm = ivector::train_ubm(x, {.components = 6, .iterations = 20}, urng);
    for (std::size_t i = 1; i < ubm.log_likelihood.size(); ++i) {
      const double prev = ubm.log_likelihood[i - 1];
      const double rel = (prev - ubm.log_likelihood[i]) / std::max(1.0, std::abs(prev));
      worst = std::max(worst, rel);
      drops += rel > 1e-8;
    }

    std::vector<ivector::SufficientStats> stats;
    for (int u = 0; u < 40; ++u) {
      ivector::Matrix frames(60, 3);
      const double shift = rng.normal();
      for (Eigen::Index i = 0; i < frames.rows(); ++i)
        for (Eigen::Index j = 0; j < frames.cols(); ++j) frames(i, j) = rng.normal() + shift * (j + 1) + (i % 3 == 0 ? 3.0 * j : 0.0);
      stats.push_back(ivector::baum_welch_stats(ubm.model, frames));
    }
    Rng trng(seed + 200);
    const auto tv = ivector::train_tv(ubm.model, stats, {.dim = 4, .iterations = 20}, trng);
    for (std::size_t i = 1; i < tv.objective.size(); ++i) {
      const double prev = tv.objective[i - 1];
      const double rel = (prev - tv.objective[i]) / std::max(1.0, std::abs(prev));
      worst = std::max(worst, rel);
      drops += rel > 1e-8;
    }
  }
  return {drops == 0, fmt("10 seeds x (UBM + TV) x 20 iterations, %zu decreases beyond slack, worst relative step %.1e",
                          drops, worst)};
}

// --- dimensions ------------------------------------------------------------

Outcome dimension_contracts() {
  const features::CqtKernelBank bank;
  std::string seen;
  bool ok = true;
  for (double dur : {0.5, 2.0, 20.0, 60.0}) {
    Rng rng(17);
    const auto a = audio::generate_clean(dur, rng);
    const auto m = features::cqt_feature_map(a.view(), bank);
    const auto ctx = features::mel_context_vectors(features::frame_features(a));
    bool lens = !ctx.empty();
    for (const auto& v : ctx) lens = lens && v.size() == 1450;
    ok = ok && lens && m.rows == 240 && m.cols == 220;
    seen += fmt("%s%.1fs: %zu ctx of %zu, cqt %zux%zu", seen.empty() ? "" : "; ", dur, ctx.size(),
                ctx.empty() ? 0 : ctx[0].size(), m.rows, m.cols);
  }
  return {ok, seen};
}

// --- synthesis -------------------------------------------------------------

Outcome synthesis_calibration() {
  const audio::SynthConfig cfg;
  const auto lib = audio::build_rir_library(cfg, 11);
  Rng rng(11);
  double snr_err = 0.0, norm_err = 0.0, lo = 1e9, hi = -1e9;
  for (int i = 0; i < 100; ++i) {
    Rng urng(rng.next_u64());
    const auto clean = audio::generate_clean(1.0, urng);
    const double target_level = rng.uniform(-40.0, -10.0);
    const auto normalized = audio::normalize_level(clean, target_level);
    norm_err = std::max(norm_err, std::abs(audio::active_level_dbfs(normalized) - target_level));

    audio::ConditionSpec spec;
    spec.utterance_id = "c";
    spec.voice_level_db_spl = rng.normal(cfg.voice_mean_spl, cfg.voice_sd_spl);
    spec.noise_level_db_spl = rng.normal(cfg.noise_mean_spl, cfg.noise_sd_spl);
    spec.noise_kind = static_cast<audio::NoiseKind>(rng.uniform_index(3));
    const auto& rir = lib[rng.uniform_index(lib.size())].rir;
    const auto leveled = audio::scaled(audio::normalize_level(clean, cfg.normalize_dbfs),
                                       audio::gain_from_db(audio::spl_to_dbfs(spec.voice_level_db_spl) - audio::spl_to_dbfs(65.0)));
    const auto rev = audio::convolve_rir(leveled, rir);
    const auto noise = audio::generate_noise(spec.noise_kind, rev.size(), urng);
    const auto mix = audio::mix_noise(rev, noise, spec);
    audio::AudioBuffer added(rev.size());
    for (std::size_t k = 0; k < rev.size(); ++k) added.samples[k] = mix.mixture.samples[k] - rev.samples[k];
    const double expected = std::clamp(mix.target_snr_db, audio::kMinSnrDb, audio::kMaxSnrDb);
    const double measured = audio::measure_snr(rev, added);
    snr_err = std::max(snr_err, std::abs(measured - expected));
    lo = std::min(lo, mix.spec.realized_snr_db);
    hi = std::max(hi, mix.spec.realized_snr_db);
  }
  return {snr_err <= 0.1 && norm_err <= 0.01 && lo >= 0.0 && hi <= 50.0,
          fmt("100 conditions, max SNR error %.4f dB, max level error %.5f dB, SNR range [%.2f, %.2f]", snr_err, norm_err,
              lo, hi)};
}

// --- end to end ------------------------------------------------------------

struct PipelineRun {
  std::vector<eval::EvalReport> reports;
  std::string report_csv;
  std::size_t epochs = 0;
  double seconds = 0.0;

  const eval::EvalReport* find(const std::string& name) const {
    for (const auto& r : reports)
      if (r.model == name) return &r;
    return nullptr;
  }
};

PipelineRun run_pipeline(const fs::path& dir) {
  const auto t0 = Clock::now();
  fs::remove_all(dir);
  fs::create_directories(dir);
  auto cfg = pipeline::load_config(MOSEST_DESK_CONFIG);
  cfg.workdir = dir.string();
  pipeline::cmd_synth(cfg);
  pipeline::cmd_extract(cfg, features::FeatureKind::kMel);
  pipeline::cmd_extract(cfg, features::FeatureKind::kIvector);
  const auto choices = pipeline::parse_model_list(pipeline::kDefaultModels);
  pipeline::cmd_train(cfg, choices);
  pipeline::cmd_predict(cfg, choices);
  PipelineRun run;
  run.reports = pipeline::cmd_evaluate(cfg, choices);
  run.report_csv = io::read_file(pipeline::Layout{dir}.report());
  run.epochs = cfg.model_spec(models::ModelKind::kMelDnn).max_epochs;
  run.seconds = seconds_since(t0);
  return run;
}

Outcome end_to_end(const PipelineRun& run) {
  const auto* mel = run.find("mel_dnn");
  const auto* ivec = run.find("ivec_dnn");
  if (!mel) return {false, "no mel_dnn report"};
  std::string order = "ivec_dnn missing";
  if (ivec) order = fmt("ivec_dnn rho %.4f, ordering mel_dnn >= ivec_dnn %s", ivec->rho, mel->rho >= ivec->rho ? "holds" : "does not hold");
  return {mel->rho >= 0.8 && run.seconds < 600.0 && run.epochs <= 200,
          fmt("mel_dnn rho %.4f on %zu held-out utterances (need >= 0.8), %.0f s; %s", mel->rho, mel->n, run.seconds,
              order.c_str())};
}

Outcome elm_head(const PipelineRun& run) {
  const auto* mean = run.find("mel_dnn");
  const auto* elm = run.find("mel_dnn+elm");
  if (!mean || !elm) return {false, "missing mel_dnn or mel_dnn+elm report"};
  return {elm->rho >= mean->rho - 0.02, fmt("rho elm %.4f vs mean %.4f (margin %+.4f, need >= -0.02)", elm->rho,
                                             mean->rho, elm->rho - mean->rho)};
}

Outcome determinism(const PipelineRun& a, const PipelineRun& b) {
  return {a.report_csv == b.report_csv && !a.report_csv.empty(),
          fmt("report CSVs %s (%zu bytes)", a.report_csv == b.report_csv ? "byte-identical" : "differ", a.report_csv.size())};
}

}  // namespace

int main() {
  log::set_level(log::Level::kWarn);
  int failures = 0, total = 0;
  auto line = [&](const char* name, const std::function<Outcome()>& fn) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    ++total;
    failures += !o.pass;
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
  };

  line("gradient_suite", gradient_suite);
  line("oracle_equivalence", oracle_equivalence);
  line("em_monotonicity", em_monotonicity);
  line("dimension_contracts", dimension_contracts);
  line("synthesis_calibration", synthesis_calibration);

  const auto root = fs::temp_directory_path() / "mosest_acceptance";
  PipelineRun first, second;
  std::string pipeline_error;
  try {
    first = run_pipeline(root / "a");
    second = run_pipeline(root / "b");
  } catch (const std::exception& e) {
    pipeline_error = e.what();
  }
  auto guarded = [&](auto fn) {
    return [&, fn] { return pipeline_error.empty() ? fn() : Outcome{false, "pipeline failed: " + pipeline_error}; };
  };
  line("end_to_end_proxy", guarded([&] { return end_to_end(first); }));
  line("elm_head", guarded([&] { return elm_head(first); }));
  line("determinism", guarded([&] { return determinism(first, second); }));

  std::printf("acceptance: %d/%d criteria passed\n", total - failures, total);
  return failures;
}
