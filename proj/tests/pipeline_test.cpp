#include <gtest/gtest.h>

#include <fstream>
#include <map>

#include "mosest/pipeline/commands.hpp"
#include "mosest/pipeline/config.hpp"
#include "test_util.hpp"

namespace mosest::pipeline {
namespace {

namespace fs = std::filesystem;
using mosest::testing::scratch_dir;

// --- config ----------------------------------------------------------------

TEST(Config, FullScaleDefaults) {
  const Config c;
  EXPECT_EQ(c.synth.voice_mean_spl, 65.0);
  EXPECT_EQ(c.synth.voice_sd_spl, 8.0);
  EXPECT_EQ(c.synth.noise_mean_spl, 45.0);
  EXPECT_EQ(c.synth.noise_sd_spl, 15.0);
  EXPECT_EQ(c.synth.processed_fraction, 0.5);
  EXPECT_EQ(c.synth.count, 10000u);
  EXPECT_EQ(c.synth.rir_count, 120u);
  EXPECT_EQ(c.ivector.tv_dim, 400u);
  EXPECT_EQ(c.model_spec(ModelKind::kIvecDnn).input_dim, 400u);
  EXPECT_EQ(c.model_spec(ModelKind::kMelDnn).hidden, (std::vector<std::size_t>{1024, 1024, 1024, 1024}));
}

TEST(Config, ShippedFiles) {
  const fs::path dir = MOSEST_CONFIG_DIR;
  // the full-scale file spells out the defaults
  auto full = load_config(dir / "full.ini");
  for (auto k : {ModelKind::kCqtCnn, ModelKind::kIvecDnn, ModelKind::kMelDnn})
    EXPECT_EQ(full.model_spec(k), Config{}.model_spec(k));
  full.workdir = Config{}.workdir;
  full.model.clear();
  EXPECT_TRUE(full == Config{});

  const auto desk = load_config(dir / "desk.ini");
  EXPECT_EQ(desk.synth.count, 200u);
  EXPECT_EQ(desk.synth.duration_s, 2.0);
  EXPECT_EQ(desk.model_spec(ModelKind::kMelDnn).hidden, (std::vector<std::size_t>{64, 64}));
  EXPECT_LE(desk.model_spec(ModelKind::kMelDnn).max_epochs, 200u);
  EXPECT_EQ(desk.model_spec(ModelKind::kIvecDnn).input_dim, desk.ivector.tv_dim);
}

TEST(Config, DefaultRoundTrip) {
  const Config c;
  EXPECT_EQ(parse_config(format_config(c)), c);
}

TEST(Config, RandomizedRoundTrip) {
  Rng rng(11);
  for (int t = 0; t < 25; ++t) {
    Config c;
    c.seed = rng.next_u64();
    c.jobs = 1 + rng.uniform_index(8);
    c.workdir = "runs/w" + std::to_string(t);
    c.synth.count = 3 + rng.uniform_index(1000);
    c.synth.duration_s = rng.uniform(0.1, 30.0);
    c.synth.voice_mean_spl = rng.uniform(40, 80);
    c.synth.noise_sd_spl = rng.uniform(0, 20);
    const double a = rng.uniform(), b = rng.uniform() * (1 - a);
    c.synth.noise_kind_probs = {a, b, 1 - a - b};
    c.synth.processed_fraction = rng.uniform();
    c.synth.write_clean = rng.uniform() < 0.5;
    c.ivector.tv_dim = 1 + rng.uniform_index(500);
    c.model["mel_dnn"]["dropout"] = fixed(rng.uniform(0, 0.9), 3);
    c.model["cqt_cnn"]["conv"] = "8@5x5;16@3x3";
    c.eval.segsnr = rng.uniform() < 0.5;
    c.eval.external["pesq"] = "scores/pesq.txt";
    const auto back = parse_config(format_config(c));
    ASSERT_EQ(back, c) << format_config(c);
    EXPECT_EQ(format_config(back), format_config(c));
  }
}

TEST(Config, PartialFileKeepsDefaults) {
  const auto c = parse_config("[synth]\ncount = 12\n[model.mel_dnn]\nhidden = 8,8\n");
  EXPECT_EQ(c.synth.count, 12u);
  EXPECT_EQ(c.synth.voice_mean_spl, 65.0);
  EXPECT_EQ(c.model_spec(ModelKind::kMelDnn).hidden, (std::vector<std::size_t>{8, 8}));
}

TEST(Config, Errors) {
  EXPECT_THROW(parse_config("[synth]\nbogus = 1\n"), ConfigError);
  EXPECT_THROW(parse_config("[nowhere]\nx = 1\n"), ConfigError);
  EXPECT_THROW(parse_config("[synth]\ncount = -3\n"), ConfigError);
  EXPECT_THROW(parse_config("[synth]\nduration_s = fast\n"), ConfigError);
  EXPECT_THROW(parse_config("[model.mel_dnn]\nhidden = 0\n"), ConfigError);
  EXPECT_THROW(parse_config("[model.resnet]\nhidden = 8\n"), ConfigError);
  EXPECT_THROW(parse_config("[synth\ncount = 1\n"), ConfigError);
  EXPECT_THROW(parse_config("[synth]\np_office = 0.5\n").validate(), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/mosest.ini"), ConfigError);
}

TEST(Config, EnvironmentOverrides) {
  const std::map<std::string, std::string> env{{"MOSEST_SYNTH_COUNT", "12"},
                                               {"MOSEST_RUN_SEED", "99"},
                                               {"MOSEST_IVECTOR_TV_DIM", "16"},
                                               {"MOSEST_MODEL_MEL_DNN_HIDDEN", "8,4"}};
  auto lookup = [&](const char* name) -> const char* {
    auto it = env.find(name);
    return it == env.end() ? nullptr : it->second.c_str();
  };
  const auto c = apply_env_overrides(Config{}, lookup);
  EXPECT_EQ(c.synth.count, 12u);
  EXPECT_EQ(c.seed, 99u);
  EXPECT_EQ(c.model_spec(ModelKind::kIvecDnn).input_dim, 16u);
  EXPECT_EQ(c.model_spec(ModelKind::kMelDnn).hidden, (std::vector<std::size_t>{8, 4}));
  EXPECT_EQ(apply_env_overrides(Config{}, [](const char*) -> const char* { return nullptr; }), Config{});
}

TEST(ModelList, Parsing) {
  const auto a = parse_model_list("mel_dnn,+elm,ivec_dnn");
  ASSERT_EQ(a.size(), 3u);
  EXPECT_EQ(a[1].name(), "mel_dnn+elm");
  EXPECT_EQ(a[2].kind, ModelKind::kIvecDnn);
  EXPECT_EQ(parse_model_list("mel_dnn+elm, mel_dnn+elm").size(), 1u);
  EXPECT_THROW(parse_model_list("ivec_dnn+elm"), ConfigError);
  EXPECT_THROW(parse_model_list("resnet"), ConfigError);
  EXPECT_THROW(parse_model_list(""), ConfigError);
  EXPECT_EQ(kinds_of(parse_model_list(kDefaultModels)).size(), 2u);
}

// --- stages ----------------------------------------------------------------

Config tiny(const fs::path& dir, std::size_t n = 20, double seconds = 1.0) {
  Config c;
  c.seed = 5;
  c.workdir = dir.string();
  c.synth.count = n;
  c.synth.duration_s = seconds;
  c.synth.rir_count = 8;
  c.ivector = {.ubm_components = 4, .ubm_iterations = 3, .kmeans_iterations = 2, .ubm_max_frames = 500,
               .tv_dim = 6, .tv_iterations = 2};
  c.model["mel_dnn"] = {{"hidden", "8"}, {"max_epochs", "3"}, {"learning_rate", "0.01"}, {"windows_per_utterance", "8"}, {"elm_hidden", "16"}};
  c.model["ivec_dnn"] = {{"hidden", "4"}, {"max_epochs", "5"}, {"learning_rate", "0.01"}};
  return c;
}

std::string checksum_text(const fs::path& p) { return io::read_file(p); }

TEST(Synth, WritesManifestAndIsRepeatable) {
  const auto dir = scratch_dir("pipe_synth");
  const auto cfg = tiny(dir, 6, 0.5);
  EXPECT_EQ(cmd_synth(cfg).records.size(), 6u);
  const auto first = checksum_text(dir / "manifest.tsv");
  EXPECT_EQ(audio::read_manifest(dir / "manifest.tsv").records.size(), 6u);
  cmd_synth(cfg);
  EXPECT_EQ(checksum_text(dir / "manifest.tsv"), first);
  EXPECT_EQ(parse_config(checksum_text(dir / "config.ini")), cfg);
}

TEST(Synth, MissingOutputDirectory) {
  const auto dir = scratch_dir("pipe_missing") / "absent";
  try {
    cmd_synth(tiny(dir, 4, 0.5));
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(e.exit_code(), ExitCode::kOk);
  }
  EXPECT_FALSE(fs::exists(dir / "manifest.tsv"));
}

TEST(Extract, NeedsManifest) {
  const auto dir = scratch_dir("pipe_nomanifest");
  EXPECT_THROW(cmd_extract(tiny(dir), FeatureKind::kMel), DataError);
}

TEST(Extract, LongUtteranceMelWidth) {
  const auto dir = scratch_dir("pipe_long");
  const auto cfg = tiny(dir, 3, 20.0);
  cmd_synth(cfg);
  cmd_extract(cfg, FeatureKind::kMel);
  for (const auto& e : fs::directory_iterator(dir / "features" / "mel")) {
    const auto m = features::load_features(e.path());
    EXPECT_EQ(m.cols, 1450u);
    EXPECT_GT(m.rows, 500u);
  }
}

class PipelineTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new fs::path(scratch_dir("pipe_full"));
    cfg_ = new Config(tiny(*dir_));
    cmd_synth(*cfg_);
  }
  static void TearDownTestSuite() {
    delete cfg_;
    delete dir_;
  }
  static fs::path* dir_;
  static Config* cfg_;
};
fs::path* PipelineTest::dir_ = nullptr;
Config* PipelineTest::cfg_ = nullptr;

TEST_F(PipelineTest, CqtMapsAndResume) {
  auto s = cmd_extract(*cfg_, FeatureKind::kCqt);
  EXPECT_EQ(s.written, 20u);
  const Layout out{*dir_};
  for (const auto& e : fs::directory_iterator(out.features(FeatureKind::kCqt))) {
    const auto m = features::load_features(e.path());
    EXPECT_EQ(m.rows, 240u);
    EXPECT_EQ(m.cols, 220u);
  }
  fs::remove(out.feature_file(FeatureKind::kCqt, "utt_00003"));
  fs::remove(out.feature_file(FeatureKind::kCqt, "utt_00011"));
  s = cmd_extract(*cfg_, FeatureKind::kCqt);
  EXPECT_EQ(s.written, 2u);
  EXPECT_EQ(s.skipped, 18u);
  s = cmd_extract(*cfg_, FeatureKind::kCqt, true);
  EXPECT_EQ(s.written, 20u);
}

TEST_F(PipelineTest, IvectorResumeKeepsModels) {
  auto s = cmd_extract(*cfg_, FeatureKind::kIvector);
  EXPECT_EQ(s.written + s.failed, 20u);
  const Layout out{*dir_};
  ASSERT_TRUE(fs::exists(out.ubm()));
  ASSERT_TRUE(fs::exists(out.tv()));
  const auto ubm_bytes = io::read_file(out.ubm());
  const auto kept = io::read_file(out.feature_file(FeatureKind::kIvector, "utt_00001"));
  fs::remove(out.feature_file(FeatureKind::kIvector, "utt_00001"));
  s = cmd_extract(*cfg_, FeatureKind::kIvector);
  EXPECT_EQ(s.written, 1u);
  EXPECT_EQ(io::read_file(out.ubm()), ubm_bytes);
  EXPECT_EQ(io::read_file(out.feature_file(FeatureKind::kIvector, "utt_00001")), kept);
  const auto m = features::load_features(out.feature_file(FeatureKind::kIvector, "utt_00001"));
  EXPECT_EQ(m.rows, 1u);
  EXPECT_EQ(m.cols, 6u);
}

TEST_F(PipelineTest, TrainPredictEvaluatePlot) {
  cmd_extract(*cfg_, FeatureKind::kMel);
  cmd_extract(*cfg_, FeatureKind::kIvector);
  const auto models = parse_model_list("mel_dnn,mel_dnn+elm,ivec_dnn");
  cmd_train(*cfg_, models);
  cmd_predict(*cfg_, models);
  const Layout out{*dir_};
  const auto preds = read_predictions(out.predictions("mel_dnn+elm"));
  EXPECT_GE(preds.size(), 18u);

  // external baseline scores for every utterance
  const auto ds = load_dataset(*cfg_);
  {
    std::ofstream f(*dir_ / "ext.txt");
    for (const auto& r : ds.manifest.records) f << r.spec.utterance_id << ' ' << r.spec.realized_snr_db << '\n';
  }
  auto cfg = *cfg_;
  cfg.eval.external["snr_oracle"] = (*dir_ / "ext.txt").string();
  const auto reports = cmd_evaluate(cfg, models);
  std::vector<std::string> names;
  for (const auto& r : reports) names.push_back(r.model);
  EXPECT_EQ(names, (std::vector<std::string>{"mel_dnn", "mel_dnn+elm", "ivec_dnn", "segsnr", "snr_oracle"}));
  for (const auto& r : reports) {
    EXPECT_GE(r.rho, -1.0);
    EXPECT_LE(r.rho, 1.0);
    EXPECT_GE(r.mse, 0.0);
    EXPECT_EQ(r.n + r.errored, ds.split.test.size());
  }
  const auto csv = io::read_file(out.report());
  EXPECT_EQ(csv.rfind("model,rho,mse,n\n", 0), 0u);
  EXPECT_NE(csv.find("\nsnr_oracle,"), std::string::npos);

  const auto first = csv;
  cmd_evaluate(cfg, models);
  EXPECT_EQ(io::read_file(out.report()), first);

  const auto plots = cmd_plot(cfg);
  EXPECT_EQ(plots.size(), 2 * reports.size() + 1);
  for (const auto& p : plots) EXPECT_EQ(io::read_file(p).rfind("<svg", 0), 0u);
}

TEST_F(PipelineTest, PredictRejectsForeignFeatures) {
  cmd_extract(*cfg_, FeatureKind::kMel);
  cmd_extract(*cfg_, FeatureKind::kCqt);
  cmd_train(*cfg_, parse_model_list("mel_dnn"));
  const Layout out{*dir_};
  EXPECT_THROW(cmd_predict(*cfg_, parse_model_list("mel_dnn"), out.features(FeatureKind::kCqt)), KindMismatch);
}

TEST_F(PipelineTest, ElmNeedsTrainedHead) {
  cmd_extract(*cfg_, FeatureKind::kMel);
  cmd_train(*cfg_, parse_model_list("mel_dnn"));
  EXPECT_THROW(cmd_predict(*cfg_, parse_model_list("mel_dnn+elm")), ConfigError);
}

TEST_F(PipelineTest, EvaluateWithoutPredictions) {
  auto cfg = *cfg_;
  EXPECT_THROW(cmd_evaluate(cfg, parse_model_list("cqt_cnn")), DataError);
}

}  // namespace
}  // namespace mosest::pipeline
