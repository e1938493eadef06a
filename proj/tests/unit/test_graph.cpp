#include <gtest/gtest.h>

#include <sstream>

#include <Eigen/Eigenvalues>

#include "progmoe/error.hpp"
#include "progmoe/graph.hpp"
#include "test_support.hpp"

namespace progmoe {
namespace {

using testing::random_connectome;

ErrorKind kind_of(const std::string& csv_text) {
  std::istringstream in(csv_text);
  try {
    read_connectome(in);
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error for:\n" << csv_text;
  return ErrorKind::IoError;
}

TEST(Connectome, SmallestGraph) {
  std::istringstream in("a,b\n0,1\n1,0\n");
  const Connectome g = read_connectome(in);
  EXPECT_EQ(g.n(), 2);
  EXPECT_EQ(g.edge_count(), 1u);
  const GraphOperators ops = build_operators(g);
  Eigen::MatrixXd expected(2, 2);
  expected << 1, -1, -1, 1;
  EXPECT_EQ(ops.laplacian, expected);
}

TEST(Connectome, PathGraphDegrees) {
  std::istringstream in("x,y,z\n0,1,0\n1,0,1\n0,1,0\n");
  const Connectome g = read_connectome(in);
  EXPECT_EQ(g.edge_count(), 2u);
  const GraphOperators ops = build_operators(g);
  EXPECT_EQ(ops.degree.diagonal(), Eigen::Vector3d(1, 2, 1));
  Eigen::Matrix3d l;
  l << 1, -1, 0, -1, 2, -1, 0, -1, 1;
  EXPECT_EQ(ops.laplacian, l);
}

TEST(Connectome, RejectsMalformedFiles) {
  EXPECT_EQ(kind_of("a,b\n0,1\n0.5,0\n"), ErrorKind::AsymmetryTooLarge);
  EXPECT_EQ(kind_of("a,b\n0,-1\n-1,0\n"), ErrorKind::NegativeWeight);
  EXPECT_EQ(kind_of("a,a\n0,1\n1,0\n"), ErrorKind::DuplicateRegionName);
  EXPECT_EQ(kind_of("a,b,c\n0,1,0\n1,0,1\n"), ErrorKind::NonSquare);
  EXPECT_EQ(kind_of("a,b\n0,1,2\n1,0,3\n"), ErrorKind::NonSquare);
}

TEST(Connectome, SymmetrizesTinyAsymmetry) {
  Eigen::MatrixXd a(2, 2);
  a << 0, 1.0, 1.0 + 5e-7, 0;
  const Connectome g = Connectome::from_adjacency({"a", "b"}, a);
  EXPECT_EQ(g.adjacency()(0, 1), g.adjacency()(1, 0));
  EXPECT_DOUBLE_EQ(g.adjacency()(0, 1), 1.0 + 2.5e-7);
}

TEST(Connectome, CsvRoundTrip) {
  std::mt19937_64 rng(4);
  const Connectome g = random_connectome(7, rng);
  std::stringstream io;
  write_connectome(io, g);
  const Connectome back = read_connectome(io);
  EXPECT_EQ(back.region_names(), g.region_names());
  EXPECT_EQ(back.adjacency(), g.adjacency());
}

TEST(Operators, IncidenceReconstructsLaplacian) {
  std::mt19937_64 rng(11);
  const Connectome g = random_connectome(6, rng, 0.7);
  const GraphOperators ops = build_operators(g);
  const Eigen::MatrixXd product = ops.incidence * ops.edge_weights.asDiagonal() * ops.incidence.transpose();
  EXPECT_LE((product - ops.laplacian).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Operators, EdgeOrderAndOrientation) {
  const GraphOperators ops = build_operators(ring_graph(4));
  ASSERT_EQ(ops.edges.size(), 4u);
  const std::vector<std::pair<Eigen::Index, Eigen::Index>> expected{{0, 1}, {0, 3}, {1, 2}, {2, 3}};
  for (std::size_t j = 0; j < expected.size(); ++j) {
    EXPECT_EQ(ops.edges[j].u, expected[j].first);
    EXPECT_EQ(ops.edges[j].v, expected[j].second);
    const auto col = static_cast<Eigen::Index>(j);
    EXPECT_EQ(ops.incidence(expected[j].first, col), 1.0);
    EXPECT_EQ(ops.incidence(expected[j].second, col), -1.0);
    EXPECT_EQ(ops.incidence.col(col).cwiseAbs().sum(), 2.0);
  }
}

class RandomGraphs : public ::testing::TestWithParam<int> {};

TEST_P(RandomGraphs, LaplacianInvariants) {
  std::mt19937_64 rng(static_cast<std::uint64_t>(GetParam()));
  std::uniform_int_distribution<int> size(2, 16);
  const Eigen::Index n = size(rng);
  const GraphOperators ops = build_operators(random_connectome(n, rng));

  EXPECT_LE(ops.laplacian.rowwise().sum().cwiseAbs().maxCoeff(), 1e-12 * static_cast<double>(n));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(ops.laplacian);
  EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-9);

  const Eigen::VectorXd c = testing::random_matrix(n, 1, rng);
  const double mass = (ops.laplacian * c).sum();
  EXPECT_LE(std::abs(mass), 1e-10 * static_cast<double>(n) * c.cwiseAbs().maxCoeff());

  double quad = 0.0;
  for (std::size_t j = 0; j < ops.edges.size(); ++j) {
    const auto& e = ops.edges[j];
    quad += e.weight * (c[e.u] - c[e.v]) * (c[e.u] - c[e.v]);
  }
  EXPECT_NEAR(c.dot(ops.laplacian * c), quad, 1e-10);
}

INSTANTIATE_TEST_SUITE_P(Seeds, RandomGraphs, ::testing::Range(0, 25));

}  // namespace
}  // namespace progmoe
