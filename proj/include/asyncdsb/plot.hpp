#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace asyncdsb {

struct PlotSeries {
  std::string label;
  std::vector<double> xs;
  std::vector<double> ys;
  std::string color = "#1f77b4";
  bool dashed = false;
};

struct PlotAxes {
  std::string title;
  std::string x_label = "t";
  std::string y_label;
  // x runs from x_left to x_right; reverse-time plots use 1 -> 0.
  double x_left = 1.0;
  double x_right = 0.0;
  // Fixed y range; when unset the range is [min(0, data), max(data)].
  std::optional<double> y_min;
  std::optional<double> y_max;
};

// Line plot with axes, ticks and a legend. Output is byte-deterministic.
void write_line_plot_svg(const std::filesystem::path& path, const PlotAxes& axes,
                         std::span<const PlotSeries> series);

// Matrix heatmap; NaN cells are drawn blank and labelled "n/a".
void write_heatmap_svg(const std::filesystem::path& path, const std::string& title,
                       const std::vector<std::string>& row_labels,
                       const std::vector<std::string>& col_labels,
                       const std::vector<std::vector<double>>& values,
                       const std::string& row_axis, const std::string& col_axis);

}  // namespace asyncdsb
