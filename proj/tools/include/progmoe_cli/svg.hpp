#pragma once

#include <Eigen/Dense>

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace progmoe::cli {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

/// One <polyline data-name="..."> per series, on shared axes.
std::string line_plot_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                          const std::vector<Series>& series);

/// Rows x columns of coloured cells; NaN cells are drawn grey.
std::string heatmap_svg(const std::string& title, const std::vector<std::string>& row_labels,
                        const std::vector<std::string>& col_labels, const Eigen::MatrixXd& values);

enum class CsvKind { Trajectory, Gate, ErrorMap };

/// Guesses the CSV kind from its header line.
CsvKind detect_csv_kind(const std::string& header_line);

/// Reads one of the engine's CSV exports and renders it.
std::string render_csv(std::istream& in, CsvKind kind);

/// Polyline name and pixel points, in document order. Used to compare plots
/// structurally rather than byte by byte.
std::vector<std::pair<std::string, std::vector<std::pair<double, double>>>> parse_polylines(const std::string& svg);

}  // namespace progmoe::cli
