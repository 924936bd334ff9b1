#pragma once

#include <sstream>
#include <string>
#include <vector>

#include "mosest/core/error.hpp"
#include "mosest/core/format.hpp"
#include "mosest/features/dump.hpp"
#include "mosest/features/mel_context.hpp"
#include "mosest/nn/tensor.hpp"

namespace mosest::models {

enum class ModelKind { kCqtCnn, kIvecDnn, kMelDnn };
enum class Aggregation { kMean, kMode, kElm };

inline const char* to_string(ModelKind k) {
  switch (k) {
    case ModelKind::kCqtCnn: return "cqt_cnn";
    case ModelKind::kIvecDnn: return "ivec_dnn";
    case ModelKind::kMelDnn: return "mel_dnn";
  }
  return "?";
}

inline ModelKind parse_model_kind(const std::string& s) {
  if (s == "cqt_cnn") return ModelKind::kCqtCnn;
  if (s == "ivec_dnn") return ModelKind::kIvecDnn;
  if (s == "mel_dnn") return ModelKind::kMelDnn;
  throw ConfigError("unknown model kind '" + s + "' (expected cqt_cnn, ivec_dnn or mel_dnn)");
}

inline const char* to_string(Aggregation a) {
  switch (a) {
    case Aggregation::kMean: return "mean";
    case Aggregation::kMode: return "mode";
    case Aggregation::kElm: return "elm";
  }
  return "?";
}

inline Aggregation parse_aggregation(const std::string& s) {
  if (s == "mean") return Aggregation::kMean;
  if (s == "mode") return Aggregation::kMode;
  if (s == "elm") return Aggregation::kElm;
  throw ConfigError("unknown aggregation '" + s + "' (expected mean, mode or elm)");
}

inline features::FeatureKind feature_kind(ModelKind k) {
  switch (k) {
    case ModelKind::kCqtCnn: return features::FeatureKind::kCqt;
    case ModelKind::kIvecDnn: return features::FeatureKind::kIvector;
    case ModelKind::kMelDnn: return features::FeatureKind::kMel;
  }
  return features::FeatureKind::kMel;
}

struct ConvSpec {
  std::size_t filters = 0;
  std::size_t kh = 0;
  std::size_t kw = 0;

  bool operator==(const ConvSpec&) const = default;
};

/// Architecture and training hyperparameters. Each conv block is a run of
/// convolutions (ReLU after each) followed by 2x2 max pooling and dropout;
/// each hidden dense layer is followed by ReLU and dropout; the output unit
/// is linear.
struct ModelSpec {
  ModelKind kind = ModelKind::kMelDnn;
  /// per-sample input width (DNNs) or map rows/cols (CNN, before input_pool)
  std::size_t input_dim = features::kMelContextDim;
  std::size_t map_rows = 240;
  std::size_t map_cols = 220;
  /// average-pool factor applied to CQT maps before the network (1 = none)
  std::size_t input_pool = 1;
  std::vector<std::vector<ConvSpec>> conv_blocks;
  std::vector<std::size_t> hidden;
  double dropout = 0.5;
  double learning_rate = 4e-4;
  Aggregation aggregation = Aggregation::kMean;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 200;
  std::size_t patience = 10;
  /// mel_dnn: windows drawn per training utterance each epoch (0 = all)
  std::size_t windows_per_utterance = 0;
  std::size_t elm_hidden = 512;
  double elm_lambda = 1e-6;

  bool operator==(const ModelSpec&) const = default;

  /// Per-sample network input shape.
  nn::Shape input_shape() const {
    if (kind == ModelKind::kCqtCnn) return {1, map_rows / input_pool, map_cols / input_pool};
    return {input_dim};
  }

  void validate() const {
    if (kind == ModelKind::kCqtCnn) {
      if (input_pool < 1 || map_rows / input_pool == 0 || map_cols / input_pool == 0)
        throw ConfigError("model: input_pool leaves an empty map");
      if (conv_blocks.empty()) throw ConfigError("model: cqt_cnn needs at least one conv block");
      for (const auto& b : conv_blocks) {
        if (b.empty()) throw ConfigError("model: empty conv block");
        for (const auto& c : b)
          if (!c.filters || !c.kh || !c.kw) throw ConfigError("model: conv sizes must be positive");
      }
    } else {
      if (input_dim == 0) throw ConfigError("model: input_dim must be positive");
      if (!conv_blocks.empty()) throw ConfigError("model: conv blocks are only valid for cqt_cnn");
    }
    for (auto h : hidden)
      if (h == 0) throw ConfigError("model: hidden widths must be positive");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("model: dropout must be in [0, 1)");
    if (!(learning_rate >= 0.0)) throw ConfigError("model: learning rate must be >= 0");
    if (batch_size == 0 || max_epochs == 0) throw ConfigError("model: batch_size and max_epochs must be positive");
    if (elm_hidden == 0 || !(elm_lambda >= 0.0)) throw ConfigError("model: bad ELM settings");
  }
};

inline ModelSpec default_spec(ModelKind kind) {
  ModelSpec s;
  s.kind = kind;
  switch (kind) {
    case ModelKind::kCqtCnn:
      s.input_dim = 240 * 220;
      s.conv_blocks = {{{32, 25, 30}, {32, 25, 30}}, {{64, 3, 3}, {64, 3, 3}}};
      s.hidden = {64};
      s.dropout = 0.2;
      s.learning_rate = 1e-4;
      break;
    case ModelKind::kIvecDnn:
      s.input_dim = 400;
      s.hidden = {200, 100};
      s.dropout = 0.2;
      s.learning_rate = 1e-4;
      break;
    case ModelKind::kMelDnn:
      s.input_dim = features::kMelContextDim;
      s.hidden = {1024, 1024, 1024, 1024};
      s.dropout = 0.5;
      s.learning_rate = 4e-4;
      break;
  }
  return s;
}

// --- text form: one key=value per line -------------------------------------

inline std::string format_widths(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

/// "32@25x30,32@25x30;64@3x3,64@3x3"
inline std::string format_conv_blocks(const std::vector<std::vector<ConvSpec>>& blocks) {
  std::string s;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    if (b) s += ';';
    for (std::size_t i = 0; i < blocks[b].size(); ++i) {
      const auto& c = blocks[b][i];
      s += (i ? "," : "") + std::to_string(c.filters) + "@" + std::to_string(c.kh) + "x" + std::to_string(c.kw);
    }
  }
  return s;
}

namespace detail {

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  if (s.empty()) return out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (s.back() == sep) out.emplace_back();
  return out;
}

inline std::size_t parse_size(const std::string& s, const std::string& key) {
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != s.size() || (!s.empty() && s[0] == '-'))
    throw ConfigError("model: '" + key + "' expects a nonnegative integer, got '" + s + "'");
  return static_cast<std::size_t>(v);
}

inline double parse_real(const std::string& s, const std::string& key) {
  const auto v = parse_double(s);
  if (!v) throw ConfigError("model: '" + key + "' expects a number, got '" + s + "'");
  return *v;
}

}  // namespace detail

inline std::vector<std::size_t> parse_widths(const std::string& s, const std::string& key = "hidden") {
  std::vector<std::size_t> out;
  for (const auto& part : detail::split(s, ',')) out.push_back(detail::parse_size(part, key));
  return out;
}

inline std::vector<std::vector<ConvSpec>> parse_conv_blocks(const std::string& s) {
  std::vector<std::vector<ConvSpec>> blocks;
  for (const auto& block : detail::split(s, ';')) {
    std::vector<ConvSpec> b;
    for (const auto& item : detail::split(block, ',')) {
      const auto at = item.find('@'), x = item.find('x');
      if (at == std::string::npos || x == std::string::npos || x < at)
        throw ConfigError("model: conv layer '" + item + "' is not of the form FILTERS@HxW");
      b.push_back({detail::parse_size(item.substr(0, at), "conv"), detail::parse_size(item.substr(at + 1, x - at - 1), "conv"),
                   detail::parse_size(item.substr(x + 1), "conv")});
    }
    blocks.push_back(std::move(b));
  }
  return blocks;
}

/// Doubles are written with 17 significant digits so parse(format(s)) == s.
inline std::string format_spec(const ModelSpec& s) {
  auto real = [](double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  std::ostringstream o;
  o << "kind=" << to_string(s.kind) << '\n'
    << "input_dim=" << s.input_dim << '\n'
    << "map_rows=" << s.map_rows << '\n'
    << "map_cols=" << s.map_cols << '\n'
    << "input_pool=" << s.input_pool << '\n'
    << "conv=" << format_conv_blocks(s.conv_blocks) << '\n'
    << "hidden=" << format_widths(s.hidden) << '\n'
    << "dropout=" << real(s.dropout) << '\n'
    << "learning_rate=" << real(s.learning_rate) << '\n'
    << "aggregation=" << to_string(s.aggregation) << '\n'
    << "batch_size=" << s.batch_size << '\n'
    << "max_epochs=" << s.max_epochs << '\n'
    << "patience=" << s.patience << '\n'
    << "windows_per_utterance=" << s.windows_per_utterance << '\n'
    << "elm_hidden=" << s.elm_hidden << '\n'
    << "elm_lambda=" << real(s.elm_lambda) << '\n';
  return o.str();
}

/// Applies one key=value override; unknown keys are a config error.
inline void set_spec_field(ModelSpec& s, const std::string& key, const std::string& value) {
  using detail::parse_real;
  using detail::parse_size;
  if (key == "kind") s.kind = parse_model_kind(value);
  else if (key == "input_dim") s.input_dim = parse_size(value, key);
  else if (key == "map_rows") s.map_rows = parse_size(value, key);
  else if (key == "map_cols") s.map_cols = parse_size(value, key);
  else if (key == "input_pool") s.input_pool = parse_size(value, key);
  else if (key == "conv") s.conv_blocks = parse_conv_blocks(value);
  else if (key == "hidden") s.hidden = parse_widths(value);
  else if (key == "dropout") s.dropout = parse_real(value, key);
  else if (key == "learning_rate") s.learning_rate = parse_real(value, key);
  else if (key == "aggregation") s.aggregation = parse_aggregation(value);
  else if (key == "batch_size") s.batch_size = parse_size(value, key);
  else if (key == "max_epochs") s.max_epochs = parse_size(value, key);
  else if (key == "patience") s.patience = parse_size(value, key);
  else if (key == "windows_per_utterance") s.windows_per_utterance = parse_size(value, key);
  else if (key == "elm_hidden") s.elm_hidden = parse_size(value, key);
  else if (key == "elm_lambda") s.elm_lambda = parse_real(value, key);
  else throw ConfigError("model: unknown setting '" + key + "'");
}

inline ModelSpec parse_spec(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  ModelSpec s;
  bool have_kind = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("model spec line without '=': " + line);
    const auto key = line.substr(0, eq);
    if (key == "kind") {
      s = default_spec(parse_model_kind(line.substr(eq + 1)));
      have_kind = true;
    } else {
      set_spec_field(s, key, line.substr(eq + 1));
    }
  }
  if (!have_kind) throw FormatError("model spec has no kind");
  s.validate();
  return s;
}

}  // namespace mosest::models
