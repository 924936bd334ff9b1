#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "mosest/core/format.hpp"
#include "mosest/eval/report.hpp"

namespace mosest::eval {

namespace detail {

struct Frame {
  double w = 480, h = 360, left = 56, right = 16, top = 32, bottom = 48;
  double x0 = 1, x1 = 5, y0 = 1, y1 = 5;

  double px(double x) const { return left + (x - x0) / (x1 - x0) * (w - left - right); }
  double py(double y) const { return h - bottom - (y - y0) / (y1 - y0) * (h - top - bottom); }
};

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

inline void axes(std::ostringstream& o, const Frame& f, const std::string& title, const std::string& xlabel,
                 const std::string& ylabel) {
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << f.w << "\" height=\"" << f.h << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<text x=\"" << f.w / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << escape(title) << "</text>\n"
    << "<line x1=\"" << f.px(f.x0) << "\" y1=\"" << f.py(f.y0) << "\" x2=\"" << f.px(f.x1) << "\" y2=\"" << f.py(f.y0) << "\" stroke=\"black\"/>\n"
    << "<line x1=\"" << f.px(f.x0) << "\" y1=\"" << f.py(f.y0) << "\" x2=\"" << f.px(f.x0) << "\" y2=\"" << f.py(f.y1) << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = f.x0 + (f.x1 - f.x0) * i / 4.0, yv = f.y0 + (f.y1 - f.y0) * i / 4.0;
    o << "<text x=\"" << f.px(xv) << "\" y=\"" << f.py(f.y0) + 16 << "\" text-anchor=\"middle\">" << fixed(xv, 1) << "</text>\n"
      << "<text x=\"" << f.px(f.x0) - 6 << "\" y=\"" << f.py(yv) + 4 << "\" text-anchor=\"end\">" << fixed(yv, 1) << "</text>\n";
  }
  o << "<text x=\"" << f.w / 2 << "\" y=\"" << f.h - 10 << "\" text-anchor=\"middle\">" << escape(xlabel) << "</text>\n"
    << "<text x=\"14\" y=\"" << f.h / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 14 " << f.h / 2 << ")\">"
    << escape(ylabel) << "</text>\n";
}

}  // namespace detail

/// Label (x) against prediction (y) with the identity line.
inline std::string scatter_svg(const EvalReport& r) {
  detail::Frame f;
  std::ostringstream o;
  detail::axes(o, f, r.model + "  rho=" + fixed(r.rho, 3) + "  mse=" + fixed(r.mse, 3), "label MOS", "predicted MOS");
  o << "<line x1=\"" << f.px(1) << "\" y1=\"" << f.py(1) << "\" x2=\"" << f.px(5) << "\" y2=\"" << f.py(5)
    << "\" stroke=\"#999\" stroke-dasharray=\"4 3\"/>\n";
  for (const auto& x : r.residuals)
    o << "<circle cx=\"" << fixed(f.px(std::clamp(x.label, 1.0, 5.0)), 2) << "\" cy=\""
      << fixed(f.py(std::clamp(x.prediction, 1.0, 5.0)), 2) << "\" r=\"2.5\" fill=\"#1f77b4\" fill-opacity=\"0.7\"/>\n";
  o << "</svg>\n";
  return o.str();
}

/// Histogram of MOS values in 0.25-wide bins over [1, 5].
inline std::string histogram_svg(const std::vector<double>& values, const std::string& title) {
  constexpr int kBins = 16;
  std::vector<int> count(kBins, 0);
  for (double v : values) {
    const int b = std::clamp(static_cast<int>(std::floor((v - 1.0) / 0.25)), 0, kBins - 1);
    ++count[static_cast<std::size_t>(b)];
  }
  const int peak = std::max(1, *std::max_element(count.begin(), count.end()));
  detail::Frame f;
  f.y0 = 0;
  f.y1 = peak;
  std::ostringstream o;
  detail::axes(o, f, title, "MOS", "count");
  for (int b = 0; b < kBins; ++b) {
    const double xa = f.px(1.0 + 0.25 * b), xb = f.px(1.25 + 0.25 * b);
    const double top = f.py(count[static_cast<std::size_t>(b)]);
    o << "<rect x=\"" << fixed(xa + 1, 2) << "\" y=\"" << fixed(top, 2) << "\" width=\"" << fixed(xb - xa - 2, 2)
      << "\" height=\"" << fixed(f.py(0) - top, 2) << "\" fill=\"#ff7f0e\"/>\n";
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace mosest::eval
