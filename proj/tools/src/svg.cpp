#include "progmoe_cli/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <regex>
#include <sstream>

#include "progmoe/artifacts.hpp"
#include "progmoe/csv.hpp"
#include "progmoe/error.hpp"

namespace progmoe::cli {

namespace {

constexpr double kWidth = 720.0;
constexpr double kHeight = 420.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 150.0;  // legend
constexpr double kTop = 40.0;
constexpr double kBottom = 50.0;

const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                          "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

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

std::string header(const std::string& title) {
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
     << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\" font-family=\"sans-serif\" font-size=\"11\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << escape(title)
     << "</text>\n";
  return os.str();
}

}  // namespace

std::string line_plot_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                          const std::vector<Series>& series) {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series) {
    for (double v : s.x) { x0 = std::min(x0, v); x1 = std::max(x1, v); }
    for (double v : s.y) { y0 = std::min(y0, v); y1 = std::max(y1, v); }
  }
  if (!std::isfinite(x0)) { x0 = 0; x1 = 1; y0 = 0; y1 = 1; }
  if (x1 <= x0) x1 = x0 + 1.0;
  if (y1 <= y0) { y0 -= 0.5; y1 += 0.5; }
  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return kTop + (1.0 - (y - y0) / (y1 - y0)) * ph; };

  std::ostringstream os;
  os << header(title);
  os << "<g stroke=\"black\" fill=\"none\">\n"
     << "<line x1=\"" << kLeft << "\" y1=\"" << kTop + ph << "\" x2=\"" << kLeft + pw << "\" y2=\"" << kTop + ph << "\"/>\n"
     << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\"" << kTop + ph << "\"/>\n"
     << "</g>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = x0 + (x1 - x0) * i / 4.0;
    const double yv = y0 + (y1 - y0) * i / 4.0;
    os << "<text x=\"" << num(px(xv)) << "\" y=\"" << num(kTop + ph + 16) << "\" text-anchor=\"middle\">" << num(xv)
       << "</text>\n";
    os << "<text x=\"" << num(kLeft - 6) << "\" y=\"" << num(py(yv) + 4) << "\" text-anchor=\"end\">" << num(yv)
       << "</text>\n";
  }
  os << "<text x=\"" << num(kLeft + pw / 2) << "\" y=\"" << num(kHeight - 10) << "\" text-anchor=\"middle\">"
     << escape(x_label) << "</text>\n";
  os << "<text x=\"16\" y=\"" << num(kTop + ph / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
     << num(kTop + ph / 2) << ")\">" << escape(y_label) << "</text>\n";

  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    const char* colour = kPalette[i % 10];
    os << "<polyline data-name=\"" << escape(s.name) << "\" fill=\"none\" stroke=\"" << colour
       << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t k = 0; k < s.x.size() && k < s.y.size(); ++k) {
      os << (k ? " " : "") << num(px(s.x[k])) << "," << num(py(s.y[k]));
    }
    os << "\"/>\n";
    const double ly = kTop + 14.0 * static_cast<double>(i);
    os << "<line x1=\"" << num(kWidth - kRight + 10) << "\" y1=\"" << num(ly) << "\" x2=\"" << num(kWidth - kRight + 30)
       << "\" y2=\"" << num(ly) << "\" stroke=\"" << colour << "\" stroke-width=\"2\"/>\n"
       << "<text x=\"" << num(kWidth - kRight + 34) << "\" y=\"" << num(ly + 4) << "\">" << escape(s.name)
       << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::string heatmap_svg(const std::string& title, const std::vector<std::string>& rows,
                        const std::vector<std::string>& cols, const Eigen::MatrixXd& values) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    const double v = values.data()[i];
    if (std::isfinite(v)) { lo = std::min(lo, v); hi = std::max(hi, v); }
  }
  if (!std::isfinite(lo)) { lo = 0.0; hi = 1.0; }
  if (hi <= lo) hi = lo + 1.0;
  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  const double cw = pw / std::max<double>(1.0, static_cast<double>(cols.size()));
  const double ch = ph / std::max<double>(1.0, static_cast<double>(rows.size()));

  std::ostringstream os;
  os << header(title);
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
      const double v = values(r, c);
      std::string fill = "#cccccc";
      if (std::isfinite(v)) {
        const double u = (v - lo) / (hi - lo);
        char buf[16];
        std::snprintf(buf, sizeof buf, "#%02x%02x%02x", 255, static_cast<int>(255 * (1 - u)), static_cast<int>(255 * (1 - u)));
        fill = buf;
      }
      os << "<rect data-row=\"" << r << "\" data-col=\"" << c << "\" data-value=\""
         << (std::isfinite(v) ? csv::format_double(v) : std::string("nan")) << "\" x=\""
         << num(kLeft + cw * static_cast<double>(c)) << "\" y=\"" << num(kTop + ch * static_cast<double>(r))
         << "\" width=\"" << num(cw) << "\" height=\"" << num(ch) << "\" fill=\"" << fill << "\"/>\n";
    }
  }
  for (std::size_t r = 0; r < rows.size(); ++r) {
    os << "<text x=\"" << num(kLeft - 6) << "\" y=\"" << num(kTop + ch * (static_cast<double>(r) + 0.5) + 4)
       << "\" text-anchor=\"end\">" << escape(rows[r]) << "</text>\n";
  }
  for (std::size_t c = 0; c < cols.size(); ++c) {
    os << "<text x=\"" << num(kLeft + cw * (static_cast<double>(c) + 0.5)) << "\" y=\"" << num(kTop + ph + 16)
       << "\" text-anchor=\"middle\">" << escape(cols[c]) << "</text>\n";
  }
  os << "<text x=\"" << num(kWidth - kRight + 10) << "\" y=\"" << num(kTop + 4) << "\">max " << num(hi) << "</text>\n"
     << "<text x=\"" << num(kWidth - kRight + 10) << "\" y=\"" << num(kTop + 20) << "\">min " << num(lo) << "</text>\n"
     << "</svg>\n";
  return os.str();
}

CsvKind detect_csv_kind(const std::string& header_line) {
  const auto fields = csv::split_line(header_line);
  if (fields == std::vector<std::string>{"t", "beta_M", "beta_S", "beta_L"}) return CsvKind::Gate;
  if (fields == std::vector<std::string>{"bin_lo", "bin_hi", "region", "mse", "count"}) return CsvKind::ErrorMap;
  if (fields.size() >= 2 && fields[0] == "t") return CsvKind::Trajectory;
  throw Error(ErrorKind::ParseError, "cannot tell which CSV this is from its header");
}

std::string render_csv(std::istream& in, CsvKind kind) {
  switch (kind) {
    case CsvKind::Trajectory: {
      const TrajectoryTable t = read_trajectory_csv(in);
      std::vector<Series> s;
      for (std::size_t c = 0; c < t.region_names.size(); ++c) {
        Series one{t.region_names[c], t.times, {}};
        for (Eigen::Index k = 0; k < t.states.rows(); ++k) one.y.push_back(t.states(k, static_cast<Eigen::Index>(c)));
        s.push_back(std::move(one));
      }
      return line_plot_svg("Regional trajectory", "pseudo-time", "c(t)", s);
    }
    case CsvKind::Gate: {
      const GateTable g = read_gate_csv(in);
      std::vector<Series> s;
      const char* names[] = {"beta_M", "beta_S", "beta_L"};
      for (int j = 0; j < 3; ++j) {
        Series one{names[j], g.times, {}};
        for (Eigen::Index k = 0; k < g.gate.rows(); ++k) one.y.push_back(g.gate(k, j));
        s.push_back(std::move(one));
      }
      return line_plot_svg("Gate weights", "pseudo-time", "beta", s);
    }
    case CsvKind::ErrorMap: {
      const ErrorMapTable e = read_error_map_csv(in);
      std::vector<std::string> rows;
      for (const auto& [lo, hi] : e.map.bins) rows.push_back("[" + num(lo) + ", " + num(hi) + ")");
      return heatmap_svg("Regional error by stage", rows, e.region_names, e.map.mse);
    }
  }
  return {};
}

std::vector<std::pair<std::string, std::vector<std::pair<double, double>>>> parse_polylines(const std::string& svg) {
  static const std::regex line_re(R"re(<polyline data-name="([^"]*)"[^>]*points="([^"]*)")re");
  std::vector<std::pair<std::string, std::vector<std::pair<double, double>>>> out;
  for (auto it = std::sregex_iterator(svg.begin(), svg.end(), line_re); it != std::sregex_iterator(); ++it) {
    std::vector<std::pair<double, double>> pts;
    std::istringstream ps((*it)[2].str());
    std::string pair;
    while (ps >> pair) {
      const auto comma = pair.find(',');
      pts.emplace_back(std::stod(pair.substr(0, comma)), std::stod(pair.substr(comma + 1)));
    }
    out.emplace_back((*it)[1].str(), std::move(pts));
  }
  return out;
}

}  // namespace progmoe::cli
