#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "mosest/core/error.hpp"
#include "mosest/core/format.hpp"

namespace mosest::io {

/// Reads "id<whitespace>value" rows. Blank lines and lines starting with '#'
/// are skipped; anything else that does not parse raises ParseError with the
/// 1-based line number.
inline std::vector<std::pair<std::string, double>> read_two_column(std::istream& in) {
  std::vector<std::pair<std::string, double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    std::string id, value, extra;
    if (!(ls >> id >> value) || (ls >> extra))
      throw ParseError("expected two columns (id, value)", lineno);
    const auto v = parse_double(value);
    if (!v) throw ParseError("value '" + value + "' is not a finite number", lineno);
    rows.emplace_back(std::move(id), *v);
  }
  return rows;
}

inline std::vector<std::pair<std::string, double>> read_two_column(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return read_two_column(in);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + std::string(e.what()).substr(0, std::string(e.what()).rfind(" (line")), e.line());
  }
}

}  // namespace mosest::io
