#pragma once

// Pipeline stages behind the CLI. Every stage reads and writes a work
// directory:
//
//   manifest.tsv rirs.tsv config.ini
//   audio/<id>.wav  clean/<id>.wav
//   features/{mel,cqt,ivec}/<id>.mosq
//   models/{ubm,tv,<kind>}.mosq
//   predictions/<model>.csv
//   reports/report.csv  reports/residuals.csv
//   plots/*.svg

#include <algorithm>
#include <cmath>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mosest/audio/dataset.hpp"
#include "mosest/core/format.hpp"
#include "mosest/core/log.hpp"
#include "mosest/core/parallel.hpp"
#include "mosest/eval/baseline.hpp"
#include "mosest/eval/metrics.hpp"
#include "mosest/eval/plot.hpp"
#include "mosest/eval/report.hpp"
#include "mosest/eval/split.hpp"
#include "mosest/features/cqt.hpp"
#include "mosest/features/dump.hpp"
#include "mosest/features/mel_context.hpp"
#include "mosest/io/container.hpp"
#include "mosest/io/wav.hpp"
#include "mosest/ivector/gmm.hpp"
#include "mosest/ivector/serialize.hpp"
#include "mosest/ivector/stats.hpp"
#include "mosest/ivector/tv.hpp"
#include "mosest/models/checkpoint.hpp"
#include "mosest/models/train.hpp"
#include "mosest/pipeline/config.hpp"

namespace mosest::pipeline {

using features::FeatureKind;
using models::ModelKind;

struct Layout {
  fs::path root;

  fs::path manifest() const { return root / "manifest.tsv"; }
  fs::path features(FeatureKind k) const { return root / "features" / features::to_string(k); }
  fs::path feature_file(FeatureKind k, const std::string& id) const { return features(k) / (id + ".mosq"); }
  fs::path clean(const std::string& id) const { return root / "clean" / (id + ".wav"); }
  fs::path ubm() const { return root / "models" / "ubm.mosq"; }
  fs::path tv() const { return root / "models" / "tv.mosq"; }
  fs::path checkpoint(ModelKind k) const { return root / "models" / (std::string(models::to_string(k)) + ".mosq"); }
  fs::path predictions(const std::string& model) const { return root / "predictions" / (model + ".csv"); }
  fs::path report() const { return root / "reports" / "report.csv"; }
  fs::path residuals() const { return root / "reports" / "residuals.csv"; }
  fs::path plots() const { return root / "plots"; }
};

/// One --model entry: a network kind, optionally scored through the ELM head.
struct ModelChoice {
  ModelKind kind = ModelKind::kMelDnn;
  bool elm = false;

  std::string name() const { return std::string(models::to_string(kind)) + (elm ? "+elm" : ""); }
  bool operator==(const ModelChoice&) const = default;
};

inline constexpr const char* kDefaultModels = "mel_dnn,mel_dnn+elm,ivec_dnn";

/// Comma-separated list; "+elm" either suffixes a kind or stands alone and
/// then applies to the entry before it.
inline std::vector<ModelChoice> parse_model_list(const std::string& text) {
  std::vector<ModelChoice> out;
  std::stringstream ss(text);
  for (std::string tok; std::getline(ss, tok, ',');) {
    tok.erase(0, tok.find_first_not_of(' '));
    tok.erase(tok.find_last_not_of(' ') + 1);
    if (tok.empty()) continue;
    if (tok == "+elm") {
      if (out.empty()) throw ConfigError("--model: '+elm' needs a model before it");
      out.push_back({out.back().kind, true});
    } else {
      ModelChoice c;
      if (tok.size() > 4 && tok.compare(tok.size() - 4, 4, "+elm") == 0) {
        c.elm = true;
        tok.resize(tok.size() - 4);
      }
      c.kind = models::parse_model_kind(tok);
      out.push_back(c);
    }
    if (out.back().elm && out.back().kind != ModelKind::kMelDnn)
      throw ConfigError("--model: the ELM head applies to mel_dnn only");
  }
  if (out.empty()) throw ConfigError("--model: no models given");
  std::vector<ModelChoice> unique;
  for (const auto& c : out)
    if (std::find(unique.begin(), unique.end(), c) == unique.end()) unique.push_back(c);
  return unique;
}

/// Manifest plus the seeded 70/15/15 split and the labels.
struct Dataset {
  audio::DatasetManifest manifest;
  eval::SplitAssignment split;
  std::map<std::string, double> labels;

  std::vector<std::string> labelled(const std::vector<std::string>& ids) const {
    std::vector<std::string> out;
    for (const auto& id : ids)
      if (labels.count(id)) out.push_back(id);
    return out;
  }
};

inline Dataset load_dataset(const Config& cfg) {
  Dataset d;
  const Layout out{cfg.root()};
  if (!fs::exists(out.manifest())) throw DataError("no manifest at " + out.manifest().string() + "; run synth first");
  d.manifest = audio::read_manifest(out.manifest());
  std::vector<std::string> ids;
  for (const auto& r : d.manifest.records) {
    ids.push_back(r.spec.utterance_id);
    if (r.label) d.labels[r.spec.utterance_id] = *r.label;
  }
  d.split = eval::split(ids, cfg.seed);
  return d;
}

// --- synth -----------------------------------------------------------------

inline audio::DatasetManifest cmd_synth(const Config& cfg) {
  cfg.validate();
  auto sc = cfg.synth;
  sc.jobs = cfg.jobs;
  auto m = audio::synthesize_dataset(sc, cfg.seed, cfg.root());
  io::write_file_atomic(cfg.root() / "config.ini", format_config(cfg));
  log::info("synth: wrote " + std::to_string(m.records.size()) + " utterances to " + cfg.root().string());
  return m;
}

// --- extract ---------------------------------------------------------------

struct ExtractSummary {
  std::size_t written = 0;
  std::size_t skipped = 0;
  std::size_t failed = 0;
};

namespace detail {

/// 26 MFCCs of every speech-active frame, one row per frame.
inline ivector::Matrix active_mfcc(const audio::AudioBuffer& a) {
  const auto frames = features::frame_features(a);
  std::size_t n = 0;
  for (const auto& f : frames) n += f.active();
  ivector::Matrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(features::kMfccCount));
  Eigen::Index r = 0;
  for (const auto& f : frames) {
    if (!f.active()) continue;
    for (std::size_t j = 0; j < features::kMfccCount; ++j) m(r, static_cast<Eigen::Index>(j)) = f.mfcc[j];
    ++r;
  }
  return m;
}

/// Evenly spaced subset of at most `cap` rows (cap 0 keeps everything).
inline ivector::Matrix thin(const ivector::Matrix& m, std::size_t cap) {
  if (cap == 0 || static_cast<std::size_t>(m.rows()) <= cap) return m;
  ivector::Matrix out(static_cast<Eigen::Index>(cap), m.cols());
  for (std::size_t i = 0; i < cap; ++i)
    out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(i * static_cast<std::size_t>(m.rows()) / cap));
  return out;
}

inline ExtractSummary extract_frames(const Config& cfg, const Dataset& ds, FeatureKind kind, bool force) {
  const Layout out{cfg.root()};
  fs::create_directories(out.features(kind));
  const auto& recs = ds.manifest.records;
  std::unique_ptr<features::CqtKernelBank> bank;
  if (kind == FeatureKind::kCqt) bank = std::make_unique<features::CqtKernelBank>();
  std::vector<int> status(recs.size(), 0);  // 0 skipped, 1 written, 2 failed
  parallel_for(recs.size(), cfg.jobs, [&](std::size_t i) {
    const auto& id = recs[i].spec.utterance_id;
    const auto path = out.feature_file(kind, id);
    if (!force && fs::exists(path)) return;
    const auto a = io::read_wav(out.root / recs[i].audio_path);
    features::FeatureMatrix m;
    m.kind = kind;
    if (kind == FeatureKind::kMel) {
      const auto frames = features::frame_features(a);
      const auto vecs = features::mel_context_vectors(frames);
      m.rows = vecs.size();
      m.cols = features::kMelContextDim;
      m.values.reserve(m.rows * m.cols);
      for (const auto& v : vecs) m.values.insert(m.values.end(), v.begin(), v.end());
      if (vecs.empty()) {
        log::warn("extract: " + id + " has no speech-active frames");
        status[i] = 2;
      }
    } else {
      auto map = features::cqt_feature_map(a.view(), *bank);
      m.rows = map.rows;
      m.cols = map.cols;
      m.values = std::move(map.values);
    }
    features::save_features(m, path);
    if (status[i] == 0) status[i] = 1;
  });
  ExtractSummary s;
  for (int st : status) (st == 0 ? s.skipped : st == 1 ? s.written : s.failed)++;
  return s;
}

inline ExtractSummary extract_ivectors(const Config& cfg, const Dataset& ds, bool force) {
  const Layout out{cfg.root()};
  fs::create_directories(out.features(FeatureKind::kIvector));
  fs::create_directories(out.root / "models");
  const auto& recs = ds.manifest.records;
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < recs.size(); ++i) index[recs[i].spec.utterance_id] = i;
  auto load_audio = [&](const std::string& id) { return io::read_wav(out.root / recs[index.at(id)].audio_path); };

  std::vector<std::string> pending;
  for (const auto& r : recs)
    if (force || !fs::exists(out.feature_file(FeatureKind::kIvector, r.spec.utterance_id)))
      pending.push_back(r.spec.utterance_id);
  ExtractSummary summary;
  summary.skipped = recs.size() - pending.size();
  if (pending.empty()) return summary;

  const auto& train_ids = ds.split.train;
  const auto& iv = cfg.ivector;
  bool retrained = false;
  ivector::GmmModel ubm;
  if (!force && fs::exists(out.ubm())) {
    ubm = ivector::load_ubm(out.ubm());
  } else {
    const std::size_t per_utt =
        iv.ubm_max_frames == 0 ? 0 : std::max<std::size_t>(1, iv.ubm_max_frames / std::max<std::size_t>(1, train_ids.size()));
    std::vector<ivector::Matrix> parts(train_ids.size());
    parallel_for(train_ids.size(), cfg.jobs, [&](std::size_t i) { parts[i] = thin(active_mfcc(load_audio(train_ids[i])), per_utt); });
    Eigen::Index total = 0;
    for (const auto& p : parts) total += p.rows();
    if (total < static_cast<Eigen::Index>(iv.ubm_components))
      throw DataError("extract ivec: only " + std::to_string(total) + " active training frames for " +
                      std::to_string(iv.ubm_components) + " UBM components");
    ivector::Matrix pooled(total, static_cast<Eigen::Index>(features::kMfccCount));
    Eigen::Index r = 0;
    for (const auto& p : parts) {
      pooled.middleRows(r, p.rows()) = p;
      r += p.rows();
    }
    ivector::UbmParams up;
    up.components = static_cast<decltype(up.components)>(iv.ubm_components);
    up.iterations = iv.ubm_iterations;
    up.kmeans_iterations = iv.kmeans_iterations;
    up.jobs = cfg.jobs;
    Rng rng(derive_seed(cfg.seed, 0x0B11));
    const auto res = ivector::train_ubm(pooled, up, rng);
    ubm = res.model;
    ivector::save_ubm(ubm, out.ubm());
    retrained = true;
    log::info("extract ivec: UBM with " + std::to_string(iv.ubm_components) + " components on " + std::to_string(total) +
              " frames, log-likelihood " + fixed(res.log_likelihood.back(), 4));
  }

  // Statistics for the utterances that need them.
  const bool train_tv = force || retrained || !fs::exists(out.tv());
  std::set<std::string> need(pending.begin(), pending.end());
  if (train_tv) need.insert(train_ids.begin(), train_ids.end());
  const std::vector<std::string> need_ids(need.begin(), need.end());
  std::vector<ivector::SufficientStats> stats(need_ids.size());
  std::vector<std::uint8_t> ok(need_ids.size(), 0);
  parallel_for(need_ids.size(), cfg.jobs, [&](std::size_t i) {
    const auto frames = active_mfcc(load_audio(need_ids[i]));
    if (frames.rows() == 0) return;
    stats[i] = ivector::baum_welch_stats(ubm, frames);
    ok[i] = 1;
  });
  std::map<std::string, std::size_t> at;
  for (std::size_t i = 0; i < need_ids.size(); ++i)
    if (ok[i]) at[need_ids[i]] = i;

  ivector::TvMatrix tv;
  if (!train_tv) {
    tv = ivector::load_tv(out.tv());
  } else {
    std::vector<ivector::SufficientStats> train_stats;
    for (const auto& id : train_ids)
      if (auto it = at.find(id); it != at.end()) train_stats.push_back(stats[it->second]);
    ivector::TvParams tp;
    tp.dim = static_cast<Eigen::Index>(iv.tv_dim);
    tp.iterations = iv.tv_iterations;
    tp.jobs = cfg.jobs;
    Rng rng(derive_seed(cfg.seed, 0x7F));
    auto res = ivector::train_tv(ubm, train_stats, tp, rng);
    tv = std::move(res.tv);
    ivector::save_tv(tv, out.tv());
    log::info("extract ivec: T matrix " + std::to_string(tv.t.rows()) + "x" + std::to_string(tv.t.cols()) + " on " +
              std::to_string(train_stats.size()) + " utterances");
  }

  std::vector<std::string> todo;
  std::vector<ivector::SufficientStats> todo_stats;
  for (const auto& id : pending) {
    if (auto it = at.find(id); it != at.end()) {
      todo.push_back(id);
      todo_stats.push_back(stats[it->second]);
    } else {
      log::warn("extract: " + id + " has no speech-active frames");
      ++summary.failed;
    }
  }
  const auto vecs = ivector::extract_ivectors(tv, todo_stats, cfg.jobs);
  for (std::size_t i = 0; i < todo.size(); ++i) {
    features::FeatureMatrix m{FeatureKind::kIvector, 1, static_cast<std::size_t>(vecs[i].size()),
                              {vecs[i].data(), vecs[i].data() + vecs[i].size()}};
    features::save_features(m, out.feature_file(FeatureKind::kIvector, todo[i]));
  }
  summary.written = todo.size();
  return summary;
}

}  // namespace detail

/// Writes one feature file per utterance; existing files are kept unless
/// `force`. The i-vector stage also trains the UBM and T matrix on the
/// training split when they are absent.
inline ExtractSummary cmd_extract(const Config& cfg, FeatureKind kind, bool force = false) {
  cfg.validate();
  const auto ds = load_dataset(cfg);
  const auto s = kind == FeatureKind::kIvector ? detail::extract_ivectors(cfg, ds, force)
                                               : detail::extract_frames(cfg, ds, kind, force);
  log::info(std::string("extract ") + features::to_string(kind) + ": " + std::to_string(s.written) + " written, " +
            std::to_string(s.skipped) + " already present, " + std::to_string(s.failed) + " without speech");
  return s;
}

// --- train -----------------------------------------------------------------

namespace detail {

inline std::size_t expected_cols(const models::ModelSpec& spec) {
  return spec.kind == ModelKind::kCqtCnn ? spec.map_cols : spec.input_dim;
}

/// Features of `ids` that exist and carry at least one sample.
inline std::vector<models::LabeledUtterance> labelled_set(const Dataset& ds, const Layout& out,
                                                         const models::ModelSpec& spec, const std::vector<std::string>& ids,
                                                         std::deque<features::FeatureMatrix>& store) {
  std::vector<models::LabeledUtterance> set;
  const auto kind = models::feature_kind(spec.kind);
  for (const auto& id : ds.labelled(ids)) {
    const auto path = out.feature_file(kind, id);
    if (!fs::exists(path)) {
      log::warn("train: no " + std::string(features::to_string(kind)) + " features for " + id);
      continue;
    }
    store.push_back(features::load_features(path, kind, expected_cols(spec)));
    if (store.back().rows == 0) continue;
    set.push_back({id, &store.back(), ds.labels.at(id)});
  }
  return set;
}

}  // namespace detail

inline std::vector<ModelKind> kinds_of(const std::vector<ModelChoice>& choices) {
  std::vector<ModelKind> out;
  for (const auto& c : choices)
    if (std::find(out.begin(), out.end(), c.kind) == out.end()) out.push_back(c.kind);
  return out;
}

/// Trains each requested network on the training split (validation split
/// for early stopping) and fits the ELM head when any entry asks for it.
inline void cmd_train(const Config& cfg, const std::vector<ModelChoice>& choices) {
  cfg.validate();
  const auto ds = load_dataset(cfg);
  const Layout out{cfg.root()};
  fs::create_directories(out.root / "models");
  for (auto kind : kinds_of(choices)) {
    const auto spec = cfg.model_spec(kind);
    std::deque<features::FeatureMatrix> store;
    const auto tr = detail::labelled_set(ds, out, spec, ds.split.train, store);
    const auto va = detail::labelled_set(ds, out, spec, ds.split.val, store);
    if (tr.empty()) throw DataError(std::string("train: no usable training utterances for ") + models::to_string(kind));
    log::info(std::string("train ") + models::to_string(kind) + ": " + std::to_string(tr.size()) + " train, " +
              std::to_string(va.size()) + " validation utterances");
    auto ck = models::train(spec, tr, va, cfg.seed);
    const bool elm = std::any_of(choices.begin(), choices.end(), [&](const auto& c) { return c.kind == kind && c.elm; });
    if (elm) models::fit_elm_head(ck.model, tr, va, cfg.seed);
    models::save_checkpoint(ck, out.checkpoint(kind));
  }
}

// --- predict ---------------------------------------------------------------

inline constexpr const char* kPredictionHeader = "utterance_id,mos,windows";

/// Scores every utterance in the manifest. Utterances without features or
/// speech get NA and are counted as errors by evaluate.
inline std::size_t cmd_predict(const Config& cfg, const std::vector<ModelChoice>& choices,
                               const fs::path& features_dir = {}) {
  cfg.validate();
  const auto ds = load_dataset(cfg);
  const Layout out{cfg.root()};
  fs::create_directories(out.root / "predictions");
  std::size_t errored = 0;
  for (auto kind : kinds_of(choices)) {
    auto ck = models::load_checkpoint(out.checkpoint(kind));
    auto& model = ck.model;
    const auto fkind = models::feature_kind(kind);
    const fs::path dir = features_dir.empty() ? out.features(fkind) : features_dir;
    for (const auto& c : choices) {
      if (c.kind != kind) continue;
      const auto how = c.elm ? models::Aggregation::kElm : model.spec().aggregation;
      if (c.elm && !model.elm_head()) throw ConfigError("predict: " + out.checkpoint(kind).string() + " has no ELM head; train with " + c.name());
      std::ostringstream csv;
      csv << kPredictionHeader << '\n';
      for (const auto& r : ds.manifest.records) {
        const auto& id = r.spec.utterance_id;
        const auto path = dir / (id + ".mosq");
        std::string mos = "NA";
        std::size_t windows = 0;
        if (fs::exists(path)) {
          const auto f = features::load_features(path, fkind, detail::expected_cols(model.spec()));
          try {
            const auto p = model.predict(id, f, how);
            mos = fixed(p.mos, 6);
            windows = p.window_scores.size();
          } catch (const NoSpeech&) {
          } catch (const TrainingDiverged& e) {
            log::warn(std::string("predict: ") + e.what());
          }
        }
        if (mos == "NA") ++errored;
        csv << id << ',' << mos << ',' << windows << '\n';
      }
      io::write_file_atomic(out.predictions(c.name()), csv.str());
      log::info("predict: wrote " + out.predictions(c.name()).string());
    }
  }
  return errored;
}

inline std::map<std::string, double> read_predictions(const fs::path& path) {
  if (!fs::exists(path)) throw DataError("no predictions at " + path.string() + "; run predict first");
  std::istringstream in(io::read_file(path));
  std::string line;
  std::getline(in, line);
  if (line != kPredictionHeader) throw FormatError(path.string() + ": unexpected header");
  std::map<std::string, double> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto a = line.find(','), b = line.find(',', a + 1);
    if (a == std::string::npos || b == std::string::npos) throw ParseError(path.string() + ": malformed row", lineno);
    const auto value = line.substr(a + 1, b - a - 1);
    if (value == "NA") continue;
    const auto v = parse_double(value);
    if (!v) throw ParseError(path.string() + ": bad score '" + value + "'", lineno);
    out[line.substr(0, a)] = *v;
  }
  return out;
}

// --- evaluate --------------------------------------------------------------

namespace detail {

/// Maps baseline scores onto the MOS scale with a least-squares line fitted
/// on training utterances, then evaluates on the test split.
inline std::optional<eval::EvalReport> baseline_report(const std::string& name, const std::map<std::string, double>& scores,
                                                       const Dataset& ds) {
  std::vector<double> x, y;
  for (const auto& id : ds.labelled(ds.split.train))
    if (auto it = scores.find(id); it != scores.end()) {
      x.push_back(it->second);
      y.push_back(ds.labels.at(id));
    }
  eval::LinearMap map{1.0, 0.0};
  try {
    map = eval::fit_linear(x, y);
  } catch (const Error&) {
    log::warn("evaluate: " + name + " has too few training scores for a MOS mapping; using raw scores");
  }
  std::map<std::string, double> mapped;
  for (const auto& [id, v] : scores) mapped[id] = map.slope * v + map.intercept;
  try {
    return eval::evaluate(name, mapped, ds.labels, ds.labelled(ds.split.test));
  } catch (const DataError& e) {
    log::warn(std::string("evaluate: skipping ") + name + ": " + e.what());
    return std::nullopt;
  }
}

}  // namespace detail

/// Test-split report for each model plus the segmental-SNR baseline and any
/// external score files; writes report.csv and residuals.csv.
inline std::vector<eval::EvalReport> cmd_evaluate(const Config& cfg, const std::vector<ModelChoice>& choices) {
  cfg.validate();
  const auto ds = load_dataset(cfg);
  const Layout out{cfg.root()};
  const auto test = ds.labelled(ds.split.test);
  std::vector<eval::EvalReport> reports;
  for (const auto& c : choices) {
    try {
      reports.push_back(eval::evaluate(c.name(), read_predictions(out.predictions(c.name())), ds.labels, test));
    } catch (const UndefinedCorrelation& e) {
      throw UndefinedCorrelation("evaluate " + c.name() + ": test predictions are constant after clipping to [1, 5]");
    }
  }

  if (cfg.eval.segsnr) {
    const auto& recs = ds.manifest.records;
    std::vector<double> score(recs.size(), std::nan(""));
    bool have_clean = true;
    for (const auto& r : recs) have_clean = have_clean && fs::exists(out.clean(r.spec.utterance_id));
    if (!have_clean) {
      log::warn("evaluate: clean references missing; skipping the segsnr baseline");
    } else {
      parallel_for(recs.size(), cfg.jobs, [&](std::size_t i) {
        const auto& id = recs[i].spec.utterance_id;
        try {
          score[i] = eval::segsnr_baseline(io::read_wav(out.root / recs[i].audio_path), io::read_wav(out.clean(id)));
        } catch (const NoSpeech&) {
        }
      });
      std::map<std::string, double> scores;
      for (std::size_t i = 0; i < recs.size(); ++i)
        if (std::isfinite(score[i])) scores[recs[i].spec.utterance_id] = score[i];
      if (auto r = detail::baseline_report("segsnr", scores, ds)) reports.push_back(std::move(*r));
    }
  }
  for (const auto& [name, path] : cfg.eval.external) {
    const auto scores = eval::import_external_scores(path);
    std::size_t unknown = 0;
    for (const auto& [id, v] : scores) unknown += ds.manifest.find(id) == nullptr;
    if (unknown) log::warn("evaluate: " + name + ": " + std::to_string(unknown) + " ids are not in the manifest");
    if (auto r = detail::baseline_report(name, scores, ds)) reports.push_back(std::move(*r));
  }

  fs::create_directories(out.root / "reports");
  io::write_file_atomic(out.report(), eval::format_report_csv(reports));
  io::write_file_atomic(out.residuals(), eval::format_residual_csv(reports));
  for (const auto& r : reports)
    log::info("evaluate " + r.model + ": rho " + fixed(r.rho, 4) + ", mse " + fixed(r.mse, 4) + ", n " + std::to_string(r.n) +
              (r.errored ? ", errored " + std::to_string(r.errored) : ""));
  return reports;
}

// --- plot ------------------------------------------------------------------

/// SVG scatter per report row and histograms of labels and predictions.
inline std::vector<fs::path> cmd_plot(const Config& cfg) {
  const Layout out{cfg.root()};
  if (!fs::exists(out.residuals())) throw DataError("no residuals at " + out.residuals().string() + "; run evaluate first");
  const auto parsed = eval::parse_residual_csv(io::read_file(out.residuals()));
  fs::create_directories(out.plots());
  std::vector<fs::path> written;
  auto emit = [&](const std::string& file, const std::string& svg) {
    io::write_file_atomic(out.plots() / file, svg);
    written.push_back(out.plots() / file);
  };
  std::vector<double> labels;
  for (const auto& [model, residuals] : parsed) {
    const auto r = eval::report_from_residuals(model, residuals);
    emit(model + "_scatter.svg", eval::scatter_svg(r));
    std::vector<double> preds;
    for (const auto& x : residuals) preds.push_back(x.prediction);
    emit(model + "_hist.svg", eval::histogram_svg(preds, model + " predictions"));
    if (labels.empty())
      for (const auto& x : residuals) labels.push_back(x.label);
  }
  if (!labels.empty()) emit("labels_hist.svg", eval::histogram_svg(labels, "test labels"));
  return written;
}

}  // namespace mosest::pipeline
