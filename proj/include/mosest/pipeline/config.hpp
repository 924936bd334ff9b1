#pragma once

// Run configuration: an INI file with [run], [synth], [ivector],
// [model.<kind>], [eval] and [external] sections. Every field defaults to the
// full-scale setup; desk-scale files only list what they change.

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "mosest/audio/dataset.hpp"
#include "mosest/core/error.hpp"
#include "mosest/core/format.hpp"
#include "mosest/models/spec.hpp"

namespace mosest::pipeline {

namespace fs = std::filesystem;

struct IvectorConfig {
  std::size_t ubm_components = 64;
  std::size_t ubm_iterations = 20;
  std::size_t kmeans_iterations = 5;
  /// cap on frames pooled for UBM training, 0 = every active training frame
  std::size_t ubm_max_frames = 0;
  std::size_t tv_dim = 400;
  std::size_t tv_iterations = 10;

  bool operator==(const IvectorConfig&) const = default;
};

struct EvalConfig {
  bool segsnr = true;
  /// baseline name -> two-column score file
  std::map<std::string, std::string> external;

  bool operator==(const EvalConfig&) const = default;
};

struct Config {
  std::uint64_t seed = 1;
  std::size_t jobs = 1;
  std::string workdir = "work";
  audio::SynthConfig synth;
  IvectorConfig ivector;
  /// per-kind model spec overrides, kept as text so they round trip verbatim
  std::map<std::string, std::map<std::string, std::string>> model;
  EvalConfig eval;

  bool operator==(const Config& o) const {
    return seed == o.seed && jobs == o.jobs && workdir == o.workdir && ivector == o.ivector && model == o.model &&
           eval == o.eval && same_synth(o.synth);
  }

  /// Model spec after defaults, the i-vector width and overrides.
  models::ModelSpec model_spec(models::ModelKind kind) const {
    auto s = models::default_spec(kind);
    if (kind == models::ModelKind::kIvecDnn) s.input_dim = ivector.tv_dim;
    if (auto it = model.find(models::to_string(kind)); it != model.end())
      for (const auto& [k, v] : it->second) models::set_spec_field(s, k, v);
    if (s.kind != kind) throw ConfigError(std::string("[model.") + models::to_string(kind) + "] may not change kind");
    s.validate();
    return s;
  }

  fs::path root() const { return workdir; }

  void validate() const {
    synth.validate();
    if (jobs == 0) throw ConfigError("run: jobs must be positive");
    if (ivector.ubm_components == 0 || ivector.tv_dim == 0) throw ConfigError("ivector: sizes must be positive");
    for (const auto& [kind, fields] : model) model_spec(models::parse_model_kind(kind));
  }

 private:
  bool same_synth(const audio::SynthConfig& o) const {
    const auto& s = synth;
    return s.count == o.count && s.duration_s == o.duration_s && s.voice_mean_spl == o.voice_mean_spl &&
           s.voice_sd_spl == o.voice_sd_spl && s.noise_mean_spl == o.noise_mean_spl &&
           s.noise_sd_spl == o.noise_sd_spl && s.noise_kind_probs == o.noise_kind_probs &&
           s.processed_fraction == o.processed_fraction && s.rir_count == o.rir_count &&
           s.anechoic_fraction == o.anechoic_fraction && s.normalize_dbfs == o.normalize_dbfs &&
           s.agc_target_dbfs == o.agc_target_dbfs && s.write_clean == o.write_clean &&
           s.clean_list == o.clean_list && s.label_file == o.label_file;
  }
};

namespace detail {

inline std::string real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string upper(std::string s) {
  for (auto& c : s) c = c == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

using Section = std::vector<std::pair<std::string, std::string>>;
using Sections = std::vector<std::pair<std::string, Section>>;

inline Sections to_sections(const Config& c) {
  const auto& s = c.synth;
  Sections out;
  out.push_back({"run", {{"seed", std::to_string(c.seed)}, {"jobs", std::to_string(c.jobs)}, {"workdir", c.workdir}}});
  out.push_back({"synth",
                 {{"count", std::to_string(s.count)},
                  {"duration_s", real(s.duration_s)},
                  {"voice_mean_spl", real(s.voice_mean_spl)},
                  {"voice_sd_spl", real(s.voice_sd_spl)},
                  {"noise_mean_spl", real(s.noise_mean_spl)},
                  {"noise_sd_spl", real(s.noise_sd_spl)},
                  {"p_office", real(s.noise_kind_probs[0])},
                  {"p_home", real(s.noise_kind_probs[1])},
                  {"p_other", real(s.noise_kind_probs[2])},
                  {"processed_fraction", real(s.processed_fraction)},
                  {"rir_count", std::to_string(s.rir_count)},
                  {"anechoic_fraction", real(s.anechoic_fraction)},
                  {"normalize_dbfs", real(s.normalize_dbfs)},
                  {"agc_target_dbfs", real(s.agc_target_dbfs)},
                  {"write_clean", s.write_clean ? "true" : "false"},
                  {"clean_list", s.clean_list.string()},
                  {"label_file", s.label_file.string()}}});
  const auto& iv = c.ivector;
  out.push_back({"ivector",
                 {{"ubm_components", std::to_string(iv.ubm_components)},
                  {"ubm_iterations", std::to_string(iv.ubm_iterations)},
                  {"kmeans_iterations", std::to_string(iv.kmeans_iterations)},
                  {"ubm_max_frames", std::to_string(iv.ubm_max_frames)},
                  {"tv_dim", std::to_string(iv.tv_dim)},
                  {"tv_iterations", std::to_string(iv.tv_iterations)}}});
  for (const auto& [kind, fields] : c.model) out.push_back({"model." + kind, {fields.begin(), fields.end()}});
  out.push_back({"eval", {{"segsnr", c.eval.segsnr ? "true" : "false"}}});
  if (!c.eval.external.empty()) out.push_back({"external", {c.eval.external.begin(), c.eval.external.end()}});
  return out;
}

inline std::size_t to_size(const std::string& v, const std::string& key) {
  std::size_t pos = 0;
  try {
    if (!v.empty() && v[0] != '-') {
      const auto r = std::stoull(v, &pos);
      if (pos == v.size()) return static_cast<std::size_t>(r);
    }
  } catch (const std::exception&) {
  }
  throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
}

inline double to_real(const std::string& v, const std::string& key) {
  if (auto d = parse_double(v)) return *d;
  throw ConfigError(key + ": expected a number, got '" + v + "'");
}

inline bool to_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

inline void set_field(Config& c, const std::string& section, const std::string& key, const std::string& v) {
  const std::string name = section + "." + key;
  auto& s = c.synth;
  auto& iv = c.ivector;
  if (section == "run") {
    if (key == "seed") c.seed = to_size(v, name);
    else if (key == "jobs") c.jobs = to_size(v, name);
    else if (key == "workdir") c.workdir = v;
    else throw ConfigError("unknown setting " + name);
  } else if (section == "synth") {
    if (key == "count") s.count = to_size(v, name);
    else if (key == "duration_s") s.duration_s = to_real(v, name);
    else if (key == "voice_mean_spl") s.voice_mean_spl = to_real(v, name);
    else if (key == "voice_sd_spl") s.voice_sd_spl = to_real(v, name);
    else if (key == "noise_mean_spl") s.noise_mean_spl = to_real(v, name);
    else if (key == "noise_sd_spl") s.noise_sd_spl = to_real(v, name);
    else if (key == "p_office") s.noise_kind_probs[0] = to_real(v, name);
    else if (key == "p_home") s.noise_kind_probs[1] = to_real(v, name);
    else if (key == "p_other") s.noise_kind_probs[2] = to_real(v, name);
    else if (key == "processed_fraction") s.processed_fraction = to_real(v, name);
    else if (key == "rir_count") s.rir_count = to_size(v, name);
    else if (key == "anechoic_fraction") s.anechoic_fraction = to_real(v, name);
    else if (key == "normalize_dbfs") s.normalize_dbfs = to_real(v, name);
    else if (key == "agc_target_dbfs") s.agc_target_dbfs = to_real(v, name);
    else if (key == "write_clean") s.write_clean = to_bool(v, name);
    else if (key == "clean_list") s.clean_list = v;
    else if (key == "label_file") s.label_file = v;
    else throw ConfigError("unknown setting " + name);
  } else if (section == "ivector") {
    if (key == "ubm_components") iv.ubm_components = to_size(v, name);
    else if (key == "ubm_iterations") iv.ubm_iterations = to_size(v, name);
    else if (key == "kmeans_iterations") iv.kmeans_iterations = to_size(v, name);
    else if (key == "ubm_max_frames") iv.ubm_max_frames = to_size(v, name);
    else if (key == "tv_dim") iv.tv_dim = to_size(v, name);
    else if (key == "tv_iterations") iv.tv_iterations = to_size(v, name);
    else throw ConfigError("unknown setting " + name);
  } else if (section.rfind("model.", 0) == 0) {
    const auto kind = section.substr(6);
    models::parse_model_kind(kind);
    // checked against a scratch spec so bad values fail at load time
    auto probe = models::default_spec(models::parse_model_kind(kind));
    models::set_spec_field(probe, key, v);
    probe.validate();
    c.model[kind][key] = v;
  } else if (section == "eval") {
    if (key == "segsnr") c.eval.segsnr = to_bool(v, name);
    else throw ConfigError("unknown setting " + name);
  } else if (section == "external") {
    c.eval.external[key] = v;
  } else {
    throw ConfigError("unknown config section [" + section + "]");
  }
}

}  // namespace detail

inline std::string format_config(const Config& c) {
  std::ostringstream o;
  bool first = true;
  for (const auto& [name, fields] : detail::to_sections(c)) {
    if (!first) o << '\n';
    first = false;
    o << '[' << name << "]\n";
    for (const auto& [k, v] : fields) o << k << " = " << v << '\n';
  }
  return o.str();
}

/// Applies an INI document on top of `base`.
inline Config parse_config(std::istream& in, Config base = {}) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.message() + " (line " + std::to_string(e.line()) + ")");
  }
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) throw ConfigError("config: setting '" + section + "' outside a section");
    for (const auto& [key, value] : body) detail::set_field(base, section, key, value.data());
  }
  return base;
}

inline Config parse_config(const std::string& text, Config base = {}) {
  std::istringstream in(text);
  return parse_config(in, std::move(base));
}

inline Config load_config(const fs::path& path, Config base = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  return parse_config(in, std::move(base));
}

using EnvLookup = std::function<const char*(const char*)>;

/// Overrides any known setting from MOSEST_<SECTION>_<KEY> (upper case, dots
/// as underscores), e.g. MOSEST_SYNTH_COUNT or MOSEST_MODEL_MEL_DNN_HIDDEN.
inline Config apply_env_overrides(Config c, const EnvLookup& getenv = [](const char* n) { return std::getenv(n); }) {
  auto sections = detail::to_sections(c);
  // model sections for kinds not yet overridden
  for (const char* kind : {"cqt_cnn", "ivec_dnn", "mel_dnn"}) {
    detail::Section fields;
    std::istringstream spec(models::format_spec(models::default_spec(models::parse_model_kind(kind))));
    for (std::string line; std::getline(spec, line);)
      if (auto eq = line.find('='); eq != std::string::npos && line.substr(0, eq) != "kind")
        fields.push_back({line.substr(0, eq), ""});
    sections.push_back({std::string("model.") + kind, fields});
  }
  for (const auto& [section, fields] : sections) {
    if (section == "external") continue;
    for (const auto& [key, unused] : fields) {
      const auto var = "MOSEST_" + detail::upper(section) + "_" + detail::upper(key);
      if (const char* v = getenv(var.c_str())) detail::set_field(c, section, key, v);
    }
  }
  return c;
}

}  // namespace mosest::pipeline
