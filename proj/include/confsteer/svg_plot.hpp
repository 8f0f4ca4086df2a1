#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace confsteer {

enum class SeriesStyle { line, markers, line_markers, band };

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
  //! Upper edge for SeriesStyle::band; y is the lower edge.
  std::vector<double> y_hi;
  SeriesStyle style = SeriesStyle::line_markers;
};

struct Plot {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
  std::optional<std::pair<double, double>> x_range;
  std::optional<std::pair<double, double>> y_range;
  //! Draw y = x (reliability diagrams).
  bool diagonal = false;
};

/// Minimal deterministic SVG renderer: axes, ticks, legend, series.
std::string render_svg(const Plot &plot);
void write_svg(const std::filesystem::path &path, const Plot &plot);

} // namespace confsteer
