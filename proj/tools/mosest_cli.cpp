// mosest: batch front end for the synth -> extract -> train -> predict ->
// evaluate -> plot pipeline. Exit codes follow mosest::ExitCode.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mosest/core/error.hpp"
#include "mosest/core/log.hpp"
#include "mosest/pipeline/commands.hpp"
#include "mosest/pipeline/config.hpp"

namespace {

using namespace mosest;

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs;
  std::string workdir;
  bool force = false;
  bool quiet = false;
  std::string models = pipeline::kDefaultModels;
  std::vector<std::string> kinds{"mel", "ivec"};
  std::optional<std::size_t> count;
  std::optional<double> duration;
  std::string features_dir;
  std::vector<std::string> external;
};

pipeline::Config resolve(const Options& o) {
  pipeline::Config cfg;
  if (!o.config_path.empty()) cfg = pipeline::load_config(o.config_path);
  cfg = pipeline::apply_env_overrides(cfg);
  if (o.seed) cfg.seed = *o.seed;
  if (o.jobs) cfg.jobs = *o.jobs;
  if (!o.workdir.empty()) cfg.workdir = o.workdir;
  if (o.count) cfg.synth.count = *o.count;
  if (o.duration) cfg.synth.duration_s = *o.duration;
  for (const auto& e : o.external) {
    const auto eq = e.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--external expects name=path, got '" + e + "'");
    cfg.eval.external[e.substr(0, eq)] = e.substr(eq + 1);
  }
  cfg.validate();
  return cfg;
}

int run(int argc, char** argv) {
  Options o;
  CLI::App app{"Non-intrusive speech quality (MOS) estimation toolkit"};
  app.require_subcommand(1);
  app.add_option("--config", o.config_path, "INI configuration file")->check(CLI::ExistingFile);
  app.add_option("--seed", o.seed, "Seed for synthesis, splits, initialization and dropout");
  app.add_option("--jobs", o.jobs, "Worker threads for per-utterance work")->check(CLI::PositiveNumber);
  app.add_option("--workdir", o.workdir, "Work directory (overrides [run] workdir)");
  app.add_flag("--force", o.force, "Recompute outputs that already exist");
  app.add_flag("-q,--quiet", o.quiet, "Only print warnings and errors");

  auto* synth = app.add_subcommand("synth", "Synthesize the degraded-speech dataset and manifest");
  synth->add_option("--n", o.count, "Number of utterances")->check(CLI::PositiveNumber);
  synth->add_option("--duration", o.duration, "Utterance duration in seconds")->check(CLI::PositiveNumber);

  auto* extract = app.add_subcommand("extract", "Extract cqt, mel and/or ivec features");
  extract->add_option("--kind", o.kinds, "Feature kinds")->check(CLI::IsMember({"cqt", "mel", "ivec"}))->delimiter(',');

  auto* train = app.add_subcommand("train", "Train MOS models on the training split");
  auto* predict = app.add_subcommand("predict", "Score every utterance with trained models");
  auto* evaluate = app.add_subcommand("evaluate", "Report rho and MSE on the test split");
  for (auto* sub : {train, predict, evaluate})
    sub->add_option("--model", o.models, "Models: cqt_cnn|ivec_dnn|mel_dnn[+elm], comma separated")
        ->capture_default_str();
  predict->add_option("--features", o.features_dir, "Feature directory to score instead of the work directory's");
  evaluate->add_option("--external", o.external, "Baseline score file as name=path (repeatable)");

  app.add_subcommand("plot", "Write SVG scatter plots and histograms from the last evaluation");
  app.add_subcommand("config", "Print the resolved configuration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return static_cast<int>(ExitCode::kConfig);
  }
  if (o.quiet) log::set_level(log::Level::kWarn);

  const auto cfg = resolve(o);
  const auto* sub = app.get_subcommands().front();
  const std::string name = sub->get_name();
  if (name == "synth") {
    pipeline::cmd_synth(cfg);
  } else if (name == "extract") {
    for (const auto& k : o.kinds) pipeline::cmd_extract(cfg, features::parse_feature_kind(k), o.force);
  } else if (name == "train") {
    pipeline::cmd_train(cfg, pipeline::parse_model_list(o.models));
  } else if (name == "predict") {
    pipeline::cmd_predict(cfg, pipeline::parse_model_list(o.models), o.features_dir);
  } else if (name == "evaluate") {
    const auto reports = pipeline::cmd_evaluate(cfg, pipeline::parse_model_list(o.models));
    std::cout << eval::format_report_csv(reports);
  } else if (name == "plot") {
    for (const auto& p : pipeline::cmd_plot(cfg)) std::cout << p.string() << '\n';
  } else if (name == "config") {
    std::cout << pipeline::format_config(cfg);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const mosest::Error& e) {
    mosest::log::error(e.what());
    return static_cast<int>(e.exit_code());
  } catch (const std::exception& e) {
    mosest::log::error(e.what());
    return static_cast<int>(mosest::ExitCode::kFailure);
  }
}
