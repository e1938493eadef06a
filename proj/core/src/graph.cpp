#include "progmoe/graph.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "progmoe/csv.hpp"
#include "progmoe/error.hpp"

namespace progmoe {

namespace {

constexpr double kAsymmetryTolerance = 1e-6;

}  // namespace

Connectome Connectome::from_adjacency(std::vector<std::string> region_names, Eigen::MatrixXd adjacency) {
  if (adjacency.rows() != adjacency.cols()) {
    throw Error(ErrorKind::NonSquare, "adjacency is " + std::to_string(adjacency.rows()) + "x" +
                                          std::to_string(adjacency.cols()));
  }
  const Eigen::Index n = adjacency.rows();
  if (n < 2) throw Error(ErrorKind::InvalidConnectome, "need at least 2 regions");
  if (static_cast<Eigen::Index>(region_names.size()) != n) {
    throw Error(ErrorKind::NonSquare, std::to_string(region_names.size()) + " region names for " +
                                          std::to_string(n) + " rows");
  }
  std::set<std::string> seen;
  for (const auto& name : region_names) {
    if (!seen.insert(name).second) throw Error(ErrorKind::DuplicateRegionName, "region '" + name + "' repeated");
  }
  if (!adjacency.allFinite()) throw Error(ErrorKind::NonFiniteInput, "adjacency has non-finite entries");
  for (Eigen::Index u = 0; u < n; ++u) {
    for (Eigen::Index v = 0; v < n; ++v) {
      if (adjacency(u, v) < 0.0) {
        throw Error(ErrorKind::NegativeWeight, "A[" + std::to_string(u) + "][" + std::to_string(v) + "] < 0");
      }
    }
    if (adjacency(u, u) != 0.0) {
      throw Error(ErrorKind::InvalidConnectome, "nonzero diagonal at region " + std::to_string(u));
    }
  }
  const double asym = (adjacency - adjacency.transpose()).cwiseAbs().maxCoeff();
  if (asym > kAsymmetryTolerance) {
    std::ostringstream os;
    os << "max |A - A^T| = " << asym << " exceeds " << kAsymmetryTolerance;
    throw Error(ErrorKind::AsymmetryTooLarge, os.str());
  }
  Connectome g;
  g.adjacency_ = 0.5 * (adjacency + adjacency.transpose());
  g.region_names_ = std::move(region_names);
  return g;
}

std::size_t Connectome::edge_count() const {
  std::size_t e = 0;
  for (Eigen::Index u = 0; u < n(); ++u)
    for (Eigen::Index v = u + 1; v < n(); ++v)
      if (adjacency_(u, v) != 0.0) ++e;
  return e;
}

GraphOperators build_operators(const Connectome& g) {
  GraphOperators ops;
  const Eigen::Index n = g.n();
  ops.adjacency = g.adjacency();
  ops.degree = Eigen::MatrixXd::Zero(n, n);
  ops.degree.diagonal() = ops.adjacency.rowwise().sum();
  ops.laplacian = ops.degree - ops.adjacency;

  for (Eigen::Index u = 0; u < n; ++u)
    for (Eigen::Index v = u + 1; v < n; ++v)
      if (ops.adjacency(u, v) != 0.0) ops.edges.push_back({u, v, ops.adjacency(u, v)});

  const auto e = static_cast<Eigen::Index>(ops.edges.size());
  ops.incidence = Eigen::MatrixXd::Zero(n, e);
  ops.edge_weights.resize(e);
  for (Eigen::Index j = 0; j < e; ++j) {
    const Edge& edge = ops.edges[static_cast<std::size_t>(j)];
    ops.incidence(edge.u, j) = 1.0;
    ops.incidence(edge.v, j) = -1.0;
    ops.edge_weights[j] = edge.weight;
  }
  return ops;
}

Connectome read_connectome(std::istream& in) {
  std::string line;
  if (!csv::next_line(in, line)) throw Error(ErrorKind::ParseError, "connectome: empty input");
  auto names = csv::split_line(line);
  const auto n = static_cast<Eigen::Index>(names.size());
  std::vector<std::vector<double>> rows;
  while (csv::next_line(in, line)) {
    const auto fields = csv::split_line(line);
    std::vector<double> row;
    row.reserve(fields.size());
    for (const auto& f : fields) row.push_back(csv::parse_double(f, "connectome row " + std::to_string(rows.size() + 1)));
    rows.push_back(std::move(row));
  }
  if (static_cast<Eigen::Index>(rows.size()) != n) {
    throw Error(ErrorKind::NonSquare, std::to_string(rows.size()) + " data rows for " + std::to_string(n) + " names");
  }
  Eigen::MatrixXd a(n, n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto& row = rows[static_cast<std::size_t>(r)];
    if (static_cast<Eigen::Index>(row.size()) != n) {
      throw Error(ErrorKind::NonSquare, "row " + std::to_string(r) + " has " + std::to_string(row.size()) +
                                            " values, expected " + std::to_string(n));
    }
    for (Eigen::Index c = 0; c < n; ++c) a(r, c) = row[static_cast<std::size_t>(c)];
  }
  return Connectome::from_adjacency(std::move(names), std::move(a));
}

Connectome load_connectome(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open connectome '" + path.string() + "'");
  return read_connectome(in);
}

void write_connectome(std::ostream& out, const Connectome& g) {
  const auto& names = g.region_names();
  for (std::size_t i = 0; i < names.size(); ++i) out << (i ? "," : "") << names[i];
  out << '\n';
  for (Eigen::Index r = 0; r < g.n(); ++r) {
    for (Eigen::Index c = 0; c < g.n(); ++c) out << (c ? "," : "") << csv::format_double(g.adjacency()(r, c));
    out << '\n';
  }
}

namespace {

std::vector<std::string> default_names(Eigen::Index n) {
  std::vector<std::string> names;
  for (Eigen::Index i = 0; i < n; ++i) names.push_back("region_" + std::to_string(i));
  return names;
}

}  // namespace

Connectome ring_graph(Eigen::Index n, double weight) {
  if (n < 3) throw Error(ErrorKind::InvalidConnectome, "ring graph needs n >= 3");
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index u = 0; u < n; ++u) {
    const Eigen::Index v = (u + 1) % n;
    a(u, v) = weight;
    a(v, u) = weight;
  }
  return Connectome::from_adjacency(default_names(n), std::move(a));
}

Connectome path_graph(Eigen::Index n, double weight) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index u = 0; u + 1 < n; ++u) {
    a(u, u + 1) = weight;
    a(u + 1, u) = weight;
  }
  return Connectome::from_adjacency(default_names(n), std::move(a));
}

}  // namespace progmoe
