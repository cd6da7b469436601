#pragma once

#include <algorithm>
#include <cstdio>
#include <string>
#include <vector>

namespace sam::svg {

struct Series {
  std::string name;
  std::vector<double> x, y;
};

struct PlotOptions {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool invert_x = false;
  bool invert_y = false;
  bool scatter = false;  // markers only, no connecting lines
};

namespace detail {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

inline std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace detail

// Line or scatter chart with axis labels and min/max ticks.
inline std::string render(const std::vector<Series>& series, const PlotOptions& opt) {
  constexpr double W = 640, H = 420, left = 70, right = 20, top = 40, bottom = 60;
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                 "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  bool first = true;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (first) {
        x0 = x1 = s.x[i];
        y0 = y1 = s.y[i];
        first = false;
      }
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  }
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;
  auto px = [&](double x) {
    double t = (x - x0) / (x1 - x0);
    if (opt.invert_x) t = 1 - t;
    return left + t * (W - left - right);
  };
  auto py = [&](double y) {
    double t = (y - y0) / (y1 - y0);
    if (opt.invert_y) t = 1 - t;
    return H - bottom - t * (H - top - bottom);
  };
  using detail::num;
  std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"420\">\n";
  out += "<rect width=\"640\" height=\"420\" fill=\"white\"/>\n";
  out += "<text x=\"320\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" + detail::escape(opt.title) + "</text>\n";
  out += "<line x1=\"" + num(left) + "\" y1=\"" + num(H - bottom) + "\" x2=\"" + num(W - right) + "\" y2=\"" + num(H - bottom) + "\" stroke=\"black\"/>\n";
  out += "<line x1=\"" + num(left) + "\" y1=\"" + num(top) + "\" x2=\"" + num(left) + "\" y2=\"" + num(H - bottom) + "\" stroke=\"black\"/>\n";
  for (double v : {x0, x1}) {
    out += "<text x=\"" + num(px(v)) + "\" y=\"" + num(H - bottom + 16) + "\" text-anchor=\"middle\" font-size=\"11\">" + detail::tick(v) + "</text>\n";
  }
  for (double v : {y0, y1}) {
    out += "<text x=\"" + num(left - 6) + "\" y=\"" + num(py(v) + 4) + "\" text-anchor=\"end\" font-size=\"11\">" + detail::tick(v) + "</text>\n";
  }
  out += "<text x=\"" + num((left + W - right) / 2) + "\" y=\"" + num(H - 16) + "\" text-anchor=\"middle\" font-size=\"13\">" + detail::escape(opt.x_label) + "</text>\n";
  out += "<text x=\"18\" y=\"" + num((top + H - bottom) / 2) + "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 18 " + num((top + H - bottom) / 2) + ")\">" + detail::escape(opt.y_label) + "</text>\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    const std::string color = colors[s % 8];
    const auto& ser = series[s];
    if (!opt.scatter && ser.x.size() > 1) {
      out += "<polyline fill=\"none\" stroke=\"" + color + "\" stroke-width=\"1.5\" points=\"";
      for (std::size_t i = 0; i < ser.x.size(); ++i) out += num(px(ser.x[i])) + "," + num(py(ser.y[i])) + " ";
      out += "\"/>\n";
    } else {
      for (std::size_t i = 0; i < ser.x.size(); ++i) {
        out += "<circle cx=\"" + num(px(ser.x[i])) + "\" cy=\"" + num(py(ser.y[i])) + "\" r=\"4\" fill=\"" + color + "\"/>\n";
      }
    }
    if (!ser.name.empty()) {
      out += "<text x=\"" + num(W - right - 4) + "\" y=\"" + num(top + 14 * (s + 1)) + "\" text-anchor=\"end\" font-size=\"11\" fill=\"" + color + "\">" + detail::escape(ser.name) + "</text>\n";
    }
  }
  out += "</svg>\n";
  return out;
}

}  // namespace sam::svg
