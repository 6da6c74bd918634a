#pragma once

// Minimal deterministic SVG charts. Every plotted value is repeated in a
// comment block (one "series,x,y" line per point) so the file can be read back
// as data. Output depends only on the inputs.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include <fmt/format.h>

namespace bisum::svg {

inline constexpr double kWidth = 640;
inline constexpr double kHeight = 400;
inline constexpr double kLeft = 64, kRight = 24, kTop = 40, kBottom = 56;

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

struct Bar {
  double start = 0;
  double end = 0;
  double value = 0;
};

namespace detail {

inline const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};

inline std::string num(double v) {
  if (v == 0.0) return "0";  // also folds -0
  return fmt::format("{:.6g}", v);
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

// "--" may not appear inside an XML comment.
inline std::string comment_safe(const std::string& s) {
  std::string out = s;
  for (std::size_t p = out.find("--"); p != std::string::npos; p = out.find("--")) out.replace(p, 2, "- ");
  return out;
}

struct Frame {
  double x0, x1, y0, y1;

  double px(double x) const { return kLeft + (x - x0) / (x1 - x0) * (kWidth - kLeft - kRight); }
  double py(double y) const { return kHeight - kBottom - (y - y0) / (y1 - y0) * (kHeight - kTop - kBottom); }
};

inline void widen(double& lo, double& hi) {
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
}

inline std::string header(const std::string& title, const std::string& data) {
  std::string s = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\">\n",
      num(kWidth), num(kHeight));
  s += "<!-- data\n" + data + "-->\n";
  s += fmt::format("<rect x=\"0\" y=\"0\" width=\"{}\" height=\"{}\" fill=\"white\"/>\n", num(kWidth), num(kHeight));
  s += fmt::format("<text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" text-anchor=\"middle\">{}</text>\n",
                   num(kWidth / 2), escape(title));
  return s;
}

inline std::string axes(const Frame& f, const std::string& xlabel, const std::string& ylabel) {
  const double xa = kLeft, xb = kWidth - kRight, ya = kHeight - kBottom, yb = kTop;
  std::string s;
  s += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"black\"/>\n", num(xa), num(ya), num(xb));
  s += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"black\"/>\n", num(xa), num(ya), num(yb));
  constexpr int ticks = 5;
  for (int i = 0; i <= ticks; ++i) {
    const double xv = f.x0 + (f.x1 - f.x0) * i / ticks;
    const double yv = f.y0 + (f.y1 - f.y0) * i / ticks;
    s += fmt::format("<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{}</text>\n",
                     num(f.px(xv)), num(ya + 16), num(xv));
    s += fmt::format("<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{}</text>\n",
                     num(xa - 6), num(f.py(yv) + 4), num(yv));
  }
  s += fmt::format("<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">{}</text>\n",
                   num((xa + xb) / 2), num(kHeight - 16), escape(xlabel));
  s += fmt::format(
      "<text x=\"16\" y=\"{0}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\" "
      "transform=\"rotate(-90 16 {0})\">{1}</text>\n",
      num((ya + yb) / 2), escape(ylabel));
  return s;
}

}  // namespace detail

/// Histogram-style bar chart. With no bars, only the axes are drawn.
inline std::string bar_chart(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                             const std::vector<Bar>& bars) {
  std::string data = "series,x_start,x_end,value\n";
  for (const auto& b : bars)
    data += fmt::format("{},{},{},{}\n", detail::comment_safe(title), detail::num(b.start), detail::num(b.end),
                        detail::num(b.value));
  detail::Frame f{0, 1, 0, 1};
  if (!bars.empty()) {
    f.x0 = bars.front().start;
    f.x1 = bars.front().end;
    f.y1 = 0;
    for (const auto& b : bars) {
      f.x0 = std::min(f.x0, b.start);
      f.x1 = std::max(f.x1, b.end);
      f.y1 = std::max(f.y1, b.value);
    }
    detail::widen(f.x0, f.x1);
    if (!(f.y1 > 0)) f.y1 = 1;
  }
  std::string s = detail::header(title, data);
  s += detail::axes(f, xlabel, ylabel);
  for (const auto& b : bars) {
    const double x = f.px(b.start), w = f.px(b.end) - x, y = f.py(b.value), h = f.py(0) - y;
    s += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\" stroke=\"white\"/>\n",
                     detail::num(x), detail::num(y), detail::num(w), detail::num(h), detail::kPalette[0]);
  }
  s += "</svg>\n";
  return s;
}

/// Line chart with a legend. Non-finite points are skipped.
inline std::string line_chart(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                              const std::vector<Series>& series) {
  std::string data = "series,x,y\n";
  bool any = false;
  detail::Frame f{0, 1, 0, 1};
  for (const auto& sr : series)
    for (std::size_t i = 0; i < std::min(sr.x.size(), sr.y.size()); ++i) {
      data += fmt::format("{},{},{}\n", detail::comment_safe(sr.name), detail::num(sr.x[i]), detail::num(sr.y[i]));
      if (!std::isfinite(sr.x[i]) || !std::isfinite(sr.y[i])) continue;
      if (!any) {
        f = {sr.x[i], sr.x[i], sr.y[i], sr.y[i]};
        any = true;
      }
      f.x0 = std::min(f.x0, sr.x[i]);
      f.x1 = std::max(f.x1, sr.x[i]);
      f.y0 = std::min(f.y0, sr.y[i]);
      f.y1 = std::max(f.y1, sr.y[i]);
    }
  detail::widen(f.x0, f.x1);
  detail::widen(f.y0, f.y1);
  std::string s = detail::header(title, data);
  s += detail::axes(f, xlabel, ylabel);
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& sr = series[k];
    const char* color = detail::kPalette[k % std::size(detail::kPalette)];
    std::string points;
    for (std::size_t i = 0; i < std::min(sr.x.size(), sr.y.size()); ++i) {
      if (!std::isfinite(sr.x[i]) || !std::isfinite(sr.y[i])) continue;
      if (!points.empty()) points += ' ';
      points += detail::num(f.px(sr.x[i])) + "," + detail::num(f.py(sr.y[i]));
    }
    if (!points.empty())
      s += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{}\"/>\n", color, points);
    const double ly = kTop + 14.0 * static_cast<double>(k);
    s += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"10\" height=\"10\" fill=\"{}\"/>\n", detail::num(kWidth - kRight - 150),
                     detail::num(ly), color);
    s += fmt::format("<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\">{}</text>\n",
                     detail::num(kWidth - kRight - 136), detail::num(ly + 9), detail::escape(sr.name));
  }
  s += "</svg>\n";
  return s;
}

}  // namespace bisum::svg
