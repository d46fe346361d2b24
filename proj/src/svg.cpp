#include "ralab/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace ralab {

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f"};

std::string escape(const std::string& s) {
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

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

struct Frame {
  PlotOptions o;
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  static constexpr double kLeft = 70, kRight = 20, kTop = 40, kBottom = 50;

  bool usable(double x, double y) const {
    return std::isfinite(x) && std::isfinite(y) && (!o.log_x || x > 0) && (!o.log_y || y > 0);
  }
  double tx(double x) const { return o.log_x ? std::log10(x) : x; }
  double ty(double y) const { return o.log_y ? std::log10(y) : y; }
  double px(double x) const { return kLeft + (tx(x) - x0) / (x1 - x0) * (o.width - kLeft - kRight); }
  double py(double y) const { return o.height - kBottom - (ty(y) - y0) / (y1 - y0) * (o.height - kTop - kBottom); }

  void fit(const std::vector<PlotSeries>& series) {
    double ax = std::numeric_limits<double>::infinity(), bx = -ax, ay = ax, by = -ax;
    for (const PlotSeries& s : series)
      for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
        if (!usable(s.x[i], s.y[i])) continue;
        ax = std::min(ax, tx(s.x[i]));
        bx = std::max(bx, tx(s.x[i]));
        ay = std::min(ay, ty(s.y[i]));
        by = std::max(by, ty(s.y[i]));
      }
    if (!std::isfinite(ax)) ax = 0, bx = 1, ay = 0, by = 1;
    if (bx - ax < 1e-12) ax -= 0.5, bx += 0.5;
    if (by - ay < 1e-12) ay -= 0.5, by += 0.5;
    const double mx = 0.04 * (bx - ax), my = 0.06 * (by - ay);
    x0 = ax - mx, x1 = bx + mx, y0 = ay - my, y1 = by + my;
  }

  void axes(std::ostringstream& out) const {
    const double w = o.width, h = o.height;
    out << "<rect x=\"0\" y=\"0\" width=\"" << w << "\" height=\"" << h << "\" fill=\"white\"/>\n";
    out << "<text x=\"" << w / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(o.title)
        << "</text>\n";
    out << "<line x1=\"" << kLeft << "\" y1=\"" << h - kBottom << "\" x2=\"" << w - kRight << "\" y2=\"" << h - kBottom
        << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\"" << h - kBottom
        << "\" stroke=\"black\"/>\n";
    for (int t = 0; t <= 4; ++t) {
      const double fx = x0 + (x1 - x0) * t / 4.0, fy = y0 + (y1 - y0) * t / 4.0;
      const double sx = kLeft + (w - kLeft - kRight) * t / 4.0, sy = h - kBottom - (h - kTop - kBottom) * t / 4.0;
      out << "<text x=\"" << sx << "\" y=\"" << h - kBottom + 16 << "\" text-anchor=\"middle\" font-size=\"11\">"
          << num(o.log_x ? std::pow(10.0, fx) : fx) << "</text>\n";
      out << "<text x=\"" << kLeft - 6 << "\" y=\"" << sy + 4 << "\" text-anchor=\"end\" font-size=\"11\">"
          << num(o.log_y ? std::pow(10.0, fy) : fy) << "</text>\n";
    }
    out << "<text x=\"" << w / 2 << "\" y=\"" << h - 12 << "\" text-anchor=\"middle\" font-size=\"13\">"
        << escape(o.x_label) << "</text>\n";
    out << "<text x=\"16\" y=\"" << h / 2 << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 16 "
        << h / 2 << ")\">" << escape(o.y_label) << "</text>\n";
  }

  void legend(std::ostringstream& out, const std::vector<PlotSeries>& series) const {
    for (std::size_t i = 0; i < series.size(); ++i) {
      if (series[i].label.empty()) continue;
      const double y = kTop + 14.0 * static_cast<double>(i);
      out << "<text x=\"" << o.width - kRight - 4 << "\" y=\"" << y << "\" text-anchor=\"end\" font-size=\"11\" fill=\""
          << kPalette[i % 8] << "\">" << escape(series[i].label) << "</text>\n";
    }
  }
};

std::string header(const PlotOptions& o) {
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << o.width << "\" height=\"" << o.height
      << "\" viewBox=\"0 0 " << o.width << ' ' << o.height << "\">\n";
  return out.str();
}

}  // namespace

std::string svg_line_chart(const std::vector<PlotSeries>& series, const PlotOptions& options) {
  Frame f{options};
  f.fit(series);
  std::ostringstream out;
  out << header(options);
  f.axes(out);
  for (std::size_t i = 0; i < series.size(); ++i) {
    const PlotSeries& s = series[i];
    out << "<polyline fill=\"none\" stroke=\"" << kPalette[i % 8] << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t k = 0; k < std::min(s.x.size(), s.y.size()); ++k)
      if (f.usable(s.x[k], s.y[k])) out << num(f.px(s.x[k])) << ',' << num(f.py(s.y[k])) << ' ';
    out << "\"/>\n";
  }
  f.legend(out, series);
  out << "</svg>\n";
  return out.str();
}

std::string svg_scatter(const std::vector<PlotSeries>& series, const PlotOptions& options) {
  Frame f{options};
  f.fit(series);
  std::ostringstream out;
  out << header(options);
  f.axes(out);
  for (std::size_t i = 0; i < series.size(); ++i) {
    const PlotSeries& s = series[i];
    for (std::size_t k = 0; k < std::min(s.x.size(), s.y.size()); ++k)
      if (f.usable(s.x[k], s.y[k]))
        out << "<circle cx=\"" << num(f.px(s.x[k])) << "\" cy=\"" << num(f.py(s.y[k])) << "\" r=\"3\" fill=\""
            << kPalette[i % 8] << "\" fill-opacity=\"0.7\"/>\n";
  }
  f.legend(out, series);
  out << "</svg>\n";
  return out.str();
}

}  // namespace ralab
