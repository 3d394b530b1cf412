#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "fnlearn/errors.hpp"

namespace fnlearn::pipeline::svg {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> err;  // optional half-widths, same length as y
  std::string color = "#1f77b4";
  bool dashed = false;
  bool markers = false;
};

struct Panel {
  std::string title;
  std::vector<Series> series;
  bool log_x = false;
  double vline = std::numeric_limits<double>::quiet_NaN();  // e.g. the prompt boundary
};

inline const std::vector<std::string>& palette() {
  static const std::vector<std::string> p = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                             "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
  return p;
}

namespace detail {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

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

/// Draws one panel inside the box (ox, oy, w, h).
inline void draw_panel(std::ostringstream& os, const Panel& p, double ox, double oy, double w, double h) {
  const double left = 48, right = 12, top = 24, bottom = 30;
  const double pw = w - left - right, ph = h - top - bottom;
  auto tx = [&](double x) { return p.log_x ? std::log10(x) : x; };
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = xmin, ymax = -xmin;
  for (const auto& s : p.series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      const double e = s.err.empty() ? 0.0 : s.err[i];
      xmin = std::min(xmin, tx(s.x[i]));
      xmax = std::max(xmax, tx(s.x[i]));
      ymin = std::min(ymin, s.y[i] - e);
      ymax = std::max(ymax, s.y[i] + e);
    }
  if (!std::isfinite(xmin)) xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  if (xmax - xmin < 1e-12) xmin -= 0.5, xmax += 0.5;
  if (ymax - ymin < 1e-12) ymin -= 0.5, ymax += 0.5;
  const double pad = 0.05 * (ymax - ymin);
  ymin -= pad;
  ymax += pad;
  auto px = [&](double x) { return ox + left + (tx(x) - xmin) / (xmax - xmin) * pw; };
  auto py = [&](double y) { return oy + top + (ymax - y) / (ymax - ymin) * ph; };

  os << "<rect x='" << num(ox + left) << "' y='" << num(oy + top) << "' width='" << num(pw) << "' height='"
     << num(ph) << "' fill='none' stroke='#444'/>\n";
  os << "<text x='" << num(ox + left + pw / 2) << "' y='" << num(oy + 16)
     << "' text-anchor='middle' font-size='12'>" << escape(p.title) << "</text>\n";
  for (int k = 0; k <= 4; ++k) {
    const double yv = ymin + (ymax - ymin) * k / 4.0;
    os << "<text x='" << num(ox + left - 4) << "' y='" << num(py(yv) + 3)
       << "' text-anchor='end' font-size='9'>" << tick_label(std::round(yv * 1000) / 1000) << "</text>\n";
  }
  std::vector<double> xt;
  for (const auto& s : p.series) xt.insert(xt.end(), s.x.begin(), s.x.end());
  std::sort(xt.begin(), xt.end());
  xt.erase(std::unique(xt.begin(), xt.end()), xt.end());
  if (xt.size() > 8) {
    std::vector<double> thin;
    for (int k = 0; k <= 4; ++k) thin.push_back(xt[(xt.size() - 1) * k / 4]);
    xt = thin;
  }
  for (double x : xt)
    os << "<text x='" << num(px(x)) << "' y='" << num(oy + top + ph + 14)
       << "' text-anchor='middle' font-size='9'>" << tick_label(x) << "</text>\n";
  if (std::isfinite(p.vline))
    os << "<line x1='" << num(px(p.vline)) << "' y1='" << num(oy + top) << "' x2='" << num(px(p.vline))
       << "' y2='" << num(oy + top + ph) << "' stroke='#999' stroke-dasharray='2,2'/>\n";

  double ly = oy + top + 10;
  for (const auto& s : p.series) {
    if (s.x.empty()) continue;
    os << "<polyline fill='none' stroke='" << s.color << "' stroke-width='1.5'"
       << (s.dashed ? " stroke-dasharray='5,3'" : "") << " points='";
    for (std::size_t i = 0; i < s.x.size(); ++i) os << (i ? " " : "") << num(px(s.x[i])) << ',' << num(py(s.y[i]));
    os << "'/>\n";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (s.markers)
        os << "<circle cx='" << num(px(s.x[i])) << "' cy='" << num(py(s.y[i])) << "' r='2.5' fill='" << s.color
           << "'/>\n";
      if (!s.err.empty())
        os << "<line x1='" << num(px(s.x[i])) << "' y1='" << num(py(s.y[i] - s.err[i])) << "' x2='"
           << num(px(s.x[i])) << "' y2='" << num(py(s.y[i] + s.err[i])) << "' stroke='" << s.color << "'/>\n";
    }
    if (!s.label.empty()) {
      os << "<line x1='" << num(ox + left + 6) << "' y1='" << num(ly) << "' x2='" << num(ox + left + 20) << "' y2='"
         << num(ly) << "' stroke='" << s.color << "' stroke-width='2'" << (s.dashed ? " stroke-dasharray='4,2'" : "")
         << "/>\n";
      os << "<text x='" << num(ox + left + 24) << "' y='" << num(ly + 3) << "' font-size='9'>" << escape(s.label)
         << "</text>\n";
      ly += 11;
    }
  }
}

}  // namespace detail

/// Grid of panels, `cols` per row.
inline std::string render(const std::vector<Panel>& panels, int cols, double panel_w = 320, double panel_h = 220) {
  cols = std::max(1, std::min<int>(cols, static_cast<int>(std::max<std::size_t>(panels.size(), 1))));
  const int rows = static_cast<int>((panels.size() + cols - 1) / cols);
  std::ostringstream os;
  os << "<svg xmlns='http://www.w3.org/2000/svg' width='" << detail::num(cols * panel_w) << "' height='"
     << detail::num(std::max(rows, 1) * panel_h) << "' font-family='sans-serif'>\n";
  os << "<rect width='100%' height='100%' fill='white'/>\n";
  for (std::size_t i = 0; i < panels.size(); ++i)
    detail::draw_panel(os, panels[i], static_cast<double>(i % cols) * panel_w,
                       static_cast<double>(i / cols) * panel_h, panel_w, panel_h);
  os << "</svg>\n";
  return os.str();
}

inline void save(const std::filesystem::path& path, const std::string& doc) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write " + path.string());
  os << doc;
}

}  // namespace fnlearn::pipeline::svg
