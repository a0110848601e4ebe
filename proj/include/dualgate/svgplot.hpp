#pragma once

// Minimal SVG line/marker plots with optional log axes. Output depends only
// on the input data, so repeated renders are byte-identical.

#include <string>
#include <vector>

namespace dualgate {

struct PlotSeries {
  std::string name;
  std::vector<double> xs;
  std::vector<double> ys;
  bool markers = false;  // draw points instead of a polyline
};

struct Plot {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  bool log_y = false;
  std::vector<PlotSeries> series;
  std::vector<std::string> notes;  // extra legend lines without a swatch
};

/// Non-finite points, and nonpositive points on a log axis, are skipped.
std::string render_svg(const Plot& plot, int width = 720, int height = 480);

}  // namespace dualgate
