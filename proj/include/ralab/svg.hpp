#pragma once

#include <string>
#include <vector>

namespace ralab {

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct PlotOptions {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  bool log_y = false;
  int width = 640;
  int height = 420;
};

// Self-contained SVG documents; non-finite points (and non-positive ones on
// log axes) are skipped.
std::string svg_line_chart(const std::vector<PlotSeries>& series, const PlotOptions& options);
std::string svg_scatter(const std::vector<PlotSeries>& series, const PlotOptions& options);

}  // namespace ralab
