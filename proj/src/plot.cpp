#include "asyncdsb/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>

#include "asyncdsb/error.hpp"
#include "text_util.hpp"

namespace asyncdsb {

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 420.0;
constexpr double kLeft = 64.0;
constexpr double kRight = 150.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 52.0;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

}  // namespace

void write_line_plot_svg(const std::filesystem::path& path, const PlotAxes& axes,
                         std::span<const PlotSeries> series) {
  double lo = 0.0;
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto& s : series) {
    if (s.xs.size() != s.ys.size()) throw ValidationError("plot series length mismatch");
    for (double y : s.ys) {
      if (!std::isfinite(y)) continue;
      lo = std::min(lo, y);
      hi = std::max(hi, y);
    }
  }
  if (!std::isfinite(hi)) hi = 1.0;
  const double y0 = axes.y_min.value_or(lo);
  double y1 = axes.y_max.value_or(hi);
  if (!(y1 > y0)) y1 = y0 + 1.0;

  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  const auto sx = [&](double x) { return kLeft + (x - axes.x_left) / (axes.x_right - axes.x_left) * pw; };
  const auto sy = [&](double y) { return kTop + (1.0 - (y - y0) / (y1 - y0)) * ph; };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) + "\" height=\"" +
         num(kHeight) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += "<text x=\"" + num(kLeft + pw / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" +
         escape(axes.title) + "</text>\n";
  svg += "<rect x=\"" + num(kLeft) + "\" y=\"" + num(kTop) + "\" width=\"" + num(pw) +
         "\" height=\"" + num(ph) + "\" fill=\"none\" stroke=\"black\"/>\n";

  for (int k = 0; k <= 5; ++k) {
    const double x = axes.x_left + (axes.x_right - axes.x_left) * k / 5.0;
    const double y = y0 + (y1 - y0) * k / 5.0;
    svg += "<line x1=\"" + num(sx(x)) + "\" y1=\"" + num(kTop + ph) + "\" x2=\"" + num(sx(x)) +
           "\" y2=\"" + num(kTop + ph + 5) + "\" stroke=\"black\"/>\n";
    svg += "<text x=\"" + num(sx(x)) + "\" y=\"" + num(kTop + ph + 18) +
           "\" text-anchor=\"middle\">" + tick(x) + "</text>\n";
    svg += "<line x1=\"" + num(kLeft - 5) + "\" y1=\"" + num(sy(y)) + "\" x2=\"" + num(kLeft) +
           "\" y2=\"" + num(sy(y)) + "\" stroke=\"black\"/>\n";
    svg += "<text x=\"" + num(kLeft - 8) + "\" y=\"" + num(sy(y) + 4) +
           "\" text-anchor=\"end\">" + tick(y) + "</text>\n";
  }
  if (y0 < 0.0 && y1 > 0.0) {
    svg += "<line x1=\"" + num(kLeft) + "\" y1=\"" + num(sy(0.0)) + "\" x2=\"" + num(kLeft + pw) +
           "\" y2=\"" + num(sy(0.0)) + "\" stroke=\"#bbbbbb\"/>\n";
  }
  svg += "<text x=\"" + num(kLeft + pw / 2) + "\" y=\"" + num(kHeight - 12) +
         "\" text-anchor=\"middle\">" + escape(axes.x_label) + "</text>\n";
  svg += "<text x=\"16\" y=\"" + num(kTop + ph / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
         num(kTop + ph / 2) + ")\">" + escape(axes.y_label) + "</text>\n";

  for (std::size_t s = 0; s < series.size(); ++s) {
    const auto& ser = series[s];
    std::string pts;
    for (std::size_t k = 0; k < ser.xs.size(); ++k) {
      if (!std::isfinite(ser.ys[k])) continue;
      const double y = std::clamp(ser.ys[k], y0, y1);
      pts += num(sx(ser.xs[k])) + "," + num(sy(y)) + " ";
    }
    svg += "<polyline fill=\"none\" stroke=\"" + ser.color + "\" stroke-width=\"1.5\"" +
           (ser.dashed ? " stroke-dasharray=\"5,3\"" : "") + " points=\"" + pts + "\"/>\n";
    const double ly = kTop + 14.0 + 18.0 * static_cast<double>(s);
    const double lx = kLeft + pw + 10.0;
    svg += "<line x1=\"" + num(lx) + "\" y1=\"" + num(ly) + "\" x2=\"" + num(lx + 22) + "\" y2=\"" +
           num(ly) + "\" stroke=\"" + ser.color + "\" stroke-width=\"2\"" +
           (ser.dashed ? " stroke-dasharray=\"5,3\"" : "") + "/>\n";
    svg += "<text x=\"" + num(lx + 28) + "\" y=\"" + num(ly + 4) + "\">" + escape(ser.label) +
           "</text>\n";
  }
  svg += "</svg>\n";
  detail::write_text(path, svg);
}

void write_heatmap_svg(const std::filesystem::path& path, const std::string& title,
                       const std::vector<std::string>& row_labels,
                       const std::vector<std::string>& col_labels,
                       const std::vector<std::vector<double>>& values,
                       const std::string& row_axis, const std::string& col_axis) {
  if (values.size() != row_labels.size()) throw ValidationError("heatmap row count mismatch");
  for (const auto& row : values) {
    if (row.size() != col_labels.size()) throw ValidationError("heatmap column count mismatch");
  }
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto& row : values) {
    for (double v : row) {
      if (!std::isfinite(v)) continue;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  const double cell = 56.0;
  const double left = 90.0;
  const double top = 50.0;
  const double width = left + cell * static_cast<double>(col_labels.size()) + 30.0;
  const double height = top + cell * static_cast<double>(row_labels.size()) + 60.0;

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) + "\" height=\"" +
         num(height) + "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += "<text x=\"" + num(width / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" +
         escape(title) + "</text>\n";
  for (std::size_t r = 0; r < row_labels.size(); ++r) {
    const double y = top + cell * static_cast<double>(r);
    svg += "<text x=\"" + num(left - 6) + "\" y=\"" + num(y + cell / 2 + 4) +
           "\" text-anchor=\"end\">" + escape(row_labels[r]) + "</text>\n";
    for (std::size_t c = 0; c < col_labels.size(); ++c) {
      const double x = left + cell * static_cast<double>(c);
      const double v = values[r][c];
      std::string fill = "white";
      std::string label = "n/a";
      if (std::isfinite(v)) {
        const double f = hi > lo ? (v - lo) / (hi - lo) : 0.5;
        // White-to-blue ramp; darker means larger.
        const int red = static_cast<int>(std::lround(255.0 * (1.0 - 0.8 * f)));
        const int green = static_cast<int>(std::lround(255.0 * (1.0 - 0.6 * f)));
        char buf[16];
        std::snprintf(buf, sizeof buf, "#%02x%02xff", red, green);
        fill = buf;
        label = tick(v);
      }
      svg += "<rect x=\"" + num(x) + "\" y=\"" + num(y) + "\" width=\"" + num(cell) +
             "\" height=\"" + num(cell) + "\" fill=\"" + fill + "\" stroke=\"#888888\"/>\n";
      svg += "<text x=\"" + num(x + cell / 2) + "\" y=\"" + num(y + cell / 2 + 4) +
             "\" text-anchor=\"middle\">" + label + "</text>\n";
    }
  }
  const double bottom = top + cell * static_cast<double>(row_labels.size());
  for (std::size_t c = 0; c < col_labels.size(); ++c) {
    svg += "<text x=\"" + num(left + cell * (static_cast<double>(c) + 0.5)) + "\" y=\"" +
           num(bottom + 16) + "\" text-anchor=\"middle\">" + escape(col_labels[c]) + "</text>\n";
  }
  svg += "<text x=\"" + num(left + cell * static_cast<double>(col_labels.size()) / 2) + "\" y=\"" +
         num(bottom + 40) + "\" text-anchor=\"middle\">" + escape(col_axis) + "</text>\n";
  svg += "<text x=\"14\" y=\"" + num(top + (bottom - top) / 2) +
         "\" text-anchor=\"middle\" transform=\"rotate(-90 14 " + num(top + (bottom - top) / 2) +
         ")\">" + escape(row_axis) + "</text>\n";
  svg += "</svg>\n";
  detail::write_text(path, svg);
}

}  // namespace asyncdsb
