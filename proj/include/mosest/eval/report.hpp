#pragma once

#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "mosest/core/format.hpp"
#include "mosest/eval/metrics.hpp"
#include "mosest/io/container.hpp"

namespace mosest::eval {

inline constexpr double kMosMin = 1.0;
inline constexpr double kMosMax = 5.0;

struct Residual {
  std::string utterance_id;
  double label = 0.0;
  double prediction = 0.0;
  double residual() const { return prediction - label; }
};

struct EvalReport {
  std::string model;
  double rho = 0.0;
  double mse = 0.0;
  std::size_t n = 0;
  std::size_t errored = 0;  ///< test utterances without a prediction
  std::vector<Residual> residuals;
};

inline EvalReport report_from_residuals(std::string model, std::vector<Residual> residuals, std::size_t errored = 0) {
  if (residuals.size() < 2) throw DataError("evaluate: " + model + " has fewer than 2 scored test utterances");
  std::vector<double> p, l;
  for (const auto& r : residuals) {
    p.push_back(r.prediction);
    l.push_back(r.label);
  }
  EvalReport rep{std::move(model), pearson(p, l), mse(p, l), residuals.size(), errored, std::move(residuals)};
  return rep;
}

/// Matches predictions to labels over `ids`; predictions are clipped to the
/// MOS range. Ids without a prediction count as errored.
inline EvalReport evaluate(const std::string& model, const std::map<std::string, double>& predictions,
                           const std::map<std::string, double>& labels, const std::vector<std::string>& ids) {
  std::vector<Residual> res;
  std::size_t errored = 0;
  for (const auto& id : ids) {
    const auto l = labels.find(id);
    if (l == labels.end()) throw DataError("evaluate: no label for utterance '" + id + "'");
    const auto p = predictions.find(id);
    if (p == predictions.end() || !std::isfinite(p->second)) {
      ++errored;
      continue;
    }
    res.push_back({id, l->second, std::clamp(p->second, kMosMin, kMosMax)});
  }
  return report_from_residuals(model, std::move(res), errored);
}

inline std::string format_report_csv(const std::vector<EvalReport>& reports) {
  std::ostringstream o;
  o << "model,rho,mse,n\n";
  for (const auto& r : reports) o << r.model << ',' << fixed(r.rho, 6) << ',' << fixed(r.mse, 6) << ',' << r.n << '\n';
  return o.str();
}

inline std::string format_residual_csv(const std::vector<EvalReport>& reports) {
  std::ostringstream o;
  o << "model,utterance_id,label,prediction,residual\n";
  for (const auto& r : reports)
    for (const auto& x : r.residuals)
      o << r.model << ',' << x.utterance_id << ',' << fixed(x.label, 6) << ',' << fixed(x.prediction, 6) << ','
        << fixed(x.residual(), 6) << '\n';
  return o.str();
}

/// Parses a residual CSV back into per-model residual lists (model order kept).
inline std::vector<std::pair<std::string, std::vector<Residual>>> parse_residual_csv(const std::string& text) {
  std::vector<std::pair<std::string, std::vector<Residual>>> out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1 || line.empty()) continue;
    std::vector<std::string> f;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (f.size() != 5) throw ParseError("residual csv: expected 5 fields", lineno);
    const auto label = parse_double(f[2]), pred = parse_double(f[3]);
    if (!label || !pred) throw ParseError("residual csv: bad number", lineno);
    if (out.empty() || out.back().first != f[0]) out.emplace_back(f[0], std::vector<Residual>{});
    out.back().second.push_back({f[1], *label, *pred});
  }
  return out;
}

inline void write_text_atomic(const std::filesystem::path& path, const std::string& text) { io::write_file_atomic(path, text); }

}  // namespace mosest::eval
