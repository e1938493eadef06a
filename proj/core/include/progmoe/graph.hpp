#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace progmoe {

/// Weighted undirected graph over brain regions.
/// Invariants: symmetric, zero diagonal, nonnegative weights, n >= 2,
/// unique region names. Only constructible through validated factories.
class Connectome {
 public:
  /// Validates and, when the asymmetry is at most 1e-6, symmetrizes (A + A^T) / 2.
  static Connectome from_adjacency(std::vector<std::string> region_names, Eigen::MatrixXd adjacency);

  Eigen::Index n() const { return adjacency_.rows(); }
  const std::vector<std::string>& region_names() const { return region_names_; }
  const Eigen::MatrixXd& adjacency() const { return adjacency_; }
  /// Number of nonzero upper-triangular entries.
  std::size_t edge_count() const;

 private:
  Connectome() = default;
  std::vector<std::string> region_names_;
  Eigen::MatrixXd adjacency_;
};

struct Edge {
  Eigen::Index u = 0;  // u < v
  Eigen::Index v = 0;
  double weight = 0.0;
};

/// Discrete differential operators of a Connectome.
/// Edges are ordered by (u, v) ascending over the upper triangle; column j of
/// the incidence matrix carries +1 at u and -1 at v.
struct GraphOperators {
  Eigen::MatrixXd adjacency;
  Eigen::MatrixXd degree;
  Eigen::MatrixXd laplacian;
  Eigen::MatrixXd incidence;
  Eigen::VectorXd edge_weights;
  std::vector<Edge> edges;

  Eigen::Index n() const { return laplacian.rows(); }
};

GraphOperators build_operators(const Connectome& g);

Connectome read_connectome(std::istream& in);
Connectome load_connectome(const std::filesystem::path& path);
void write_connectome(std::ostream& out, const Connectome& g);

/// Cycle 0-1-...-(n-1)-0 with uniform weight.
Connectome ring_graph(Eigen::Index n, double weight = 1.0);
/// Path 0-1-...-(n-1) with uniform weight.
Connectome path_graph(Eigen::Index n, double weight = 1.0);

}  // namespace progmoe
