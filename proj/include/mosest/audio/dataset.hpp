#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mosest/audio/clean.hpp"
#include "mosest/audio/condition.hpp"
#include "mosest/audio/levels.hpp"
#include "mosest/audio/noise.hpp"
#include "mosest/audio/processing.hpp"
#include "mosest/audio/proxy.hpp"
#include "mosest/audio/rir.hpp"
#include "mosest/core/format.hpp"
#include "mosest/core/log.hpp"
#include "mosest/core/parallel.hpp"
#include "mosest/core/rng.hpp"
#include "mosest/io/container.hpp"
#include "mosest/io/two_column.hpp"
#include "mosest/io/wav.hpp"

namespace mosest::audio {

inline constexpr const char* kGeneratorVersion = "mosest-synth 1.0.0";
inline constexpr double kMinMos = 1.0, kMaxMos = 5.0;

struct SynthConfig {
  std::size_t count = 10000;
  double duration_s = 20.0;
  double voice_mean_spl = 65.0;
  double voice_sd_spl = 8.0;
  double noise_mean_spl = 45.0;
  double noise_sd_spl = 15.0;
  std::array<double, 3> noise_kind_probs{0.8, 0.1, 0.1};
  double processed_fraction = 0.5;
  std::size_t rir_count = 120;
  double anechoic_fraction = 0.1;
  double normalize_dbfs = -23.0;
  double agc_target_dbfs = -23.0;
  bool write_clean = true;
  std::filesystem::path clean_list;   ///< optional list of 16 kHz mono WAVs
  std::filesystem::path label_file;   ///< optional external (id, MOS) labels
  std::size_t jobs = 1;

  void validate() const {
    auto bad = [](const std::string& m) { throw ConfigError("synth: " + m); };
    if (count == 0) bad("count must be positive");
    if (!(duration_s > 0.0)) bad("duration must be positive");
    if (!(voice_sd_spl >= 0.0) || !(noise_sd_spl >= 0.0)) bad("level deviations must be >= 0");
    double s = 0.0;
    for (double p : noise_kind_probs) {
      if (!(p >= 0.0)) bad("noise kind probabilities must be >= 0");
      s += p;
    }
    if (std::abs(s - 1.0) > 1e-9) bad("noise kind probabilities must sum to 1");
    if (!(processed_fraction >= 0.0 && processed_fraction <= 1.0)) bad("processed fraction must be in [0, 1]");
    if (rir_count == 0) bad("rir count must be positive");
    if (!(anechoic_fraction >= 0.0 && anechoic_fraction <= 1.0)) bad("anechoic fraction must be in [0, 1]");
  }
};

struct ManifestRecord {
  std::string audio_path;  ///< relative to the manifest directory
  ConditionSpec spec;
  std::optional<double> label;
};

struct DatasetManifest {
  std::uint64_t seed = 0;
  std::string generator_version = kGeneratorVersion;
  std::vector<ManifestRecord> records;

  const ManifestRecord* find(std::string_view id) const {
    for (const auto& r : records)
      if (r.spec.utterance_id == id) return &r;
    return nullptr;
  }
};

// ---------------------------------------------------------------------------
// Manifest text format: one header line, then one tab-separated record per
// line: id, path, voice_spl, noise_spl, noise_kind, rir_id, processed,
// realized_snr, label|NA.

inline std::string format_manifest(const DatasetManifest& m) {
  std::ostringstream out;
  out << "# generator=" << m.generator_version << "\tseed=" << m.seed << '\n';
  for (const auto& r : m.records) {
    const auto& s = r.spec;
    out << s.utterance_id << '\t' << r.audio_path << '\t' << fixed(s.voice_level_db_spl, 4) << '\t'
        << fixed(s.noise_level_db_spl, 4) << '\t' << to_string(s.noise_kind) << '\t' << s.rir_id
        << '\t' << (s.processed ? 1 : 0) << '\t' << fixed(s.realized_snr_db, 4) << '\t'
        << (r.label ? fixed(*r.label, 4) : std::string("NA")) << '\n';
  }
  return out.str();
}

inline DatasetManifest parse_manifest(std::istream& in) {
  DatasetManifest m;
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) throw ParseError("empty manifest", 1);
  ++lineno;
  {
    const auto g = line.find("generator=");
    const auto s = line.find("\tseed=");
    if (line.rfind("# ", 0) != 0 || g == std::string::npos || s == std::string::npos)
      throw ParseError("manifest header must carry generator and seed", lineno);
    m.generator_version = line.substr(g + 10, s - g - 10);
    try {
      m.seed = std::stoull(line.substr(s + 6));
    } catch (const std::exception&) {
      throw ParseError("bad seed in manifest header", lineno);
    }
  }
  std::map<std::string, bool> seen;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::size_t pos = 0;
    while (true) {
      const auto tab = line.find('\t', pos);
      f.push_back(line.substr(pos, tab - pos));
      if (tab == std::string::npos) break;
      pos = tab + 1;
    }
    if (f.size() != 9) throw ParseError("manifest record needs 9 tab-separated fields", lineno);
    ManifestRecord r;
    r.spec.utterance_id = f[0];
    r.audio_path = f[1];
    auto num = [&](const std::string& s, const char* what) {
      const auto v = parse_double(s);
      if (!v) throw ParseError(std::string("bad ") + what, lineno);
      return *v;
    };
    r.spec.voice_level_db_spl = num(f[2], "voice level");
    r.spec.noise_level_db_spl = num(f[3], "noise level");
    const auto kind = parse_noise_kind(f[4]);
    if (!kind) throw ParseError("unknown noise kind '" + f[4] + "'", lineno);
    r.spec.noise_kind = *kind;
    r.spec.rir_id = f[5];
    if (f[6] != "0" && f[6] != "1") throw ParseError("processed flag must be 0 or 1", lineno);
    r.spec.processed = f[6] == "1";
    r.spec.realized_snr_db = num(f[7], "realized SNR");
    if (f[8] != "NA") {
      const double label = num(f[8], "label");
      if (label < kMinMos || label > kMaxMos) throw ParseError("label outside [1, 5]", lineno);
      r.label = label;
    }
    if (seen[r.spec.utterance_id]) throw ParseError("duplicate utterance id '" + f[0] + "'", lineno);
    seen[r.spec.utterance_id] = true;
    m.records.push_back(std::move(r));
  }
  return m;
}

inline DatasetManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  return parse_manifest(in);
}

/// Validates the invariants and writes atomically.
inline void write_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
  std::map<std::string, bool> seen;
  const auto dir = path.parent_path();
  for (const auto& r : m.records) {
    if (seen[r.spec.utterance_id]) throw DataError("duplicate utterance id " + r.spec.utterance_id);
    seen[r.spec.utterance_id] = true;
    if (!std::filesystem::exists(dir / r.audio_path))
      throw DataError("manifest references missing file " + r.audio_path);
    if (r.label && (*r.label < kMinMos || *r.label > kMaxMos))
      throw DataError("label outside [1, 5] for " + r.spec.utterance_id);
  }
  io::write_file_atomic(path, format_manifest(m));
}

/// External (id, MOS) labels; every value must lie in [1, 5].
inline std::map<std::string, double> read_labels(const std::filesystem::path& path) {
  std::map<std::string, double> labels;
  for (auto& [id, v] : io::read_two_column(path)) {
    if (v < kMinMos || v > kMaxMos) throw DataError("label for '" + id + "' outside [1, 5]");
    if (!labels.emplace(id, v).second) throw DataError("duplicate label id '" + id + "'");
  }
  return labels;
}

// ---------------------------------------------------------------------------

struct RirLibraryEntry {
  RoomImpulseResponse rir;
  double drr_db = 0.0;
};

inline std::vector<RirLibraryEntry> build_rir_library(const SynthConfig& cfg, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0x1217));
  const auto anechoic = static_cast<std::size_t>(std::lround(cfg.anechoic_fraction * static_cast<double>(cfg.rir_count)));
  std::vector<RirLibraryEntry> lib;
  lib.reserve(cfg.rir_count);
  for (std::size_t i = 0; i < cfg.rir_count; ++i) {
    const double distance = rng.uniform(kMinDistance, kMaxDistance);
    const double rt60 = i < anechoic ? 0.0 : rng.uniform(kMinRt60, kMaxRt60);
    auto h = synth_rir(rt60, distance, rng);
    char id[32];
    std::snprintf(id, sizeof(id), "rir_%03zu", i);
    h.id = id;
    const double drr = direct_to_reverberant_db(h);
    lib.push_back({std::move(h), drr});
  }
  return lib;
}

inline std::string format_rir_library(const std::vector<RirLibraryEntry>& lib) {
  std::ostringstream out;
  out << "# id\tkind\trt60_s\tdistance_m\tdrr_db\ttaps\n";
  for (const auto& e : lib)
    out << e.rir.id << '\t' << to_string(e.rir.kind) << '\t' << fixed(e.rir.rt60, 4) << '\t'
        << fixed(e.rir.source_distance, 4) << '\t' << fixed(e.drr_db, 4) << '\t' << e.rir.taps.size() << '\n';
  return out.str();
}

/// Per-utterance degradation chain: normalize, apply the voice level,
/// convolve with the RIR, add noise, and optionally suppress noise + AGC.
struct RenderedUtterance {
  AudioBuffer clean;     ///< leveled reference before the room
  AudioBuffer degraded;
  ConditionSpec spec;
};

inline RenderedUtterance render_utterance(const AudioBuffer& clean_source, const ConditionSpec& spec,
                                          const RoomImpulseResponse& rir, const SynthConfig& cfg,
                                          Rng rng) {
  RenderedUtterance out;
  const AudioBuffer normalized = normalize_level(clean_source, cfg.normalize_dbfs);
  out.clean = scaled(normalized, gain_from_db(spl_to_dbfs(spec.voice_level_db_spl) - spl_to_dbfs(65.0)));
  const AudioBuffer reverberant = convolve_rir(out.clean, rir);
  const AudioBuffer noise = generate_noise(spec.noise_kind, reverberant.size(), rng);
  auto mix = mix_noise(reverberant, noise, spec);
  out.spec = mix.spec;
  out.degraded = spec.processed ? agc(noise_suppress(mix.mixture), cfg.agc_target_dbfs) : std::move(mix.mixture);
  return out;
}

inline std::string utterance_id(std::size_t i) {
  char id[32];
  std::snprintf(id, sizeof(id), "utt_%05zu", i);
  return id;
}

/// Draws every condition up front from one seeded stream, then renders
/// utterances independently (each keyed on its index) and writes audio plus
/// the manifest under `out_dir`, which must already exist.
inline DatasetManifest synthesize_dataset(const SynthConfig& cfg, std::uint64_t seed,
                                          const std::filesystem::path& out_dir) {
  cfg.validate();
  namespace fs = std::filesystem;
  if (!fs::is_directory(out_dir)) throw IoError("output directory does not exist: " + out_dir.string());

  std::vector<fs::path> corpus;
  if (!cfg.clean_list.empty()) {
    std::ifstream in(cfg.clean_list);
    if (!in) throw IoError("cannot open clean list " + cfg.clean_list.string());
    for (std::string line; std::getline(in, line);)
      if (!line.empty() && line[0] != '#') corpus.emplace_back(line);
    if (corpus.empty()) throw DataError("clean list is empty");
  }
  std::map<std::string, double> external;
  if (!cfg.label_file.empty()) external = read_labels(cfg.label_file);

  const auto lib = build_rir_library(cfg, seed);

  Rng rng(derive_seed(seed, 0x5EED));
  DatasetManifest manifest;
  manifest.seed = seed;
  manifest.records.resize(cfg.count);
  std::vector<std::size_t> rir_of(cfg.count);
  for (std::size_t i = 0; i < cfg.count; ++i) {
    auto& s = manifest.records[i].spec;
    s.utterance_id = utterance_id(i);
    s.voice_level_db_spl = rng.normal(cfg.voice_mean_spl, cfg.voice_sd_spl);
    s.noise_level_db_spl = rng.normal(cfg.noise_mean_spl, cfg.noise_sd_spl);
    const double u = rng.uniform();
    s.noise_kind = u < cfg.noise_kind_probs[0]                          ? NoiseKind::kOffice
                   : u < cfg.noise_kind_probs[0] + cfg.noise_kind_probs[1] ? NoiseKind::kHome
                                                                        : NoiseKind::kOther;
    rir_of[i] = static_cast<std::size_t>(rng.uniform_index(lib.size()));
    s.rir_id = lib[rir_of[i]].rir.id;
    manifest.records[i].audio_path = "audio/" + s.utterance_id + ".wav";
  }
  {
    std::vector<std::size_t> order(cfg.count);
    for (std::size_t i = 0; i < cfg.count; ++i) order[i] = i;
    shuffle(std::span(order), rng);
    const auto processed = static_cast<std::size_t>(std::lround(cfg.processed_fraction * static_cast<double>(cfg.count)));
    for (std::size_t k = 0; k < processed; ++k) manifest.records[order[k]].spec.processed = true;
  }

  fs::create_directories(out_dir / "audio");
  if (cfg.write_clean) fs::create_directories(out_dir / "clean");
  std::vector<std::size_t> clipped(cfg.count, 0);
  parallel_for(cfg.count, cfg.jobs, [&](std::size_t i) {
    auto& rec = manifest.records[i];
    Rng urng(derive_seed(seed, 1000 + i));
    AudioBuffer source =
        corpus.empty() ? generate_clean(cfg.duration_s, urng) : io::read_wav(corpus[i % corpus.size()]);
    auto r = render_utterance(source, rec.spec, lib[rir_of[i]].rir, cfg, urng.fork(2));
    rec.spec = r.spec;
    clipped[i] = io::write_wav(out_dir / rec.audio_path, r.degraded);
    if (cfg.write_clean) io::write_wav(out_dir / "clean" / (rec.spec.utterance_id + ".wav"), r.clean);
    if (external.empty()) {
      rec.label = proxy_mos(rec.spec, lib[rir_of[i]].drr_db);
    } else if (auto it = external.find(rec.spec.utterance_id); it != external.end()) {
      rec.label = it->second;
    }
  });

  std::size_t total_clipped = 0, clipped_files = 0;
  for (auto c : clipped) {
    total_clipped += c;
    clipped_files += c > 0;
  }
  if (total_clipped > 0)
    log::info("synth: " + std::to_string(total_clipped) + " samples clipped across " +
              std::to_string(clipped_files) + " files");
  io::write_file_atomic(out_dir / "rirs.tsv", format_rir_library(lib));
  write_manifest(manifest, out_dir / "manifest.tsv");
  return manifest;
}

}  // namespace mosest::audio
