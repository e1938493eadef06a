#include <gtest/gtest.h>

#include "progmoe/error.hpp"
#include "progmoe/mechanistic.hpp"
#include "progmoe/reparam.hpp"
#include "test_support.hpp"

namespace progmoe {
namespace {

// Straight-line reimplementation: loops over the adjacency directly.
Eigen::VectorXd reference_rhs(double k, double alpha, const Eigen::VectorXd& v, const Eigen::MatrixXd& a,
                              const Eigen::VectorXd& c) {
  const Eigen::Index n = c.size();
  Eigen::VectorXd out(n);
  for (Eigen::Index u = 0; u < n; ++u) {
    double flow = 0.0;
    for (Eigen::Index w = 0; w < n; ++w) flow += a(u, w) * (c[u] - c[w]);
    out[u] = -k * flow + alpha * c[u] * (v[u] - c[u]);
  }
  return out;
}

TEST(MechanisticParams, ReparameterizationRoundTrip) {
  const auto p = MechanisticParams::from_values(0.37, 1.9);
  EXPECT_NEAR(p.k(), 0.37, 1e-14);
  EXPECT_NEAR(p.alpha(), 1.9, 1e-14);
  EXPECT_TRUE(p.v_fixed());
  EXPECT_EQ(p.v(3), Eigen::VectorXd::Ones(3));
  const auto q = MechanisticParams::from_values(0.1, 0.2, Eigen::Vector3d(0.5, 0.9, 0.99));
  EXPECT_NEAR(q.v(3)[1], 0.9, 1e-14);
}

TEST(MechanisticParams, ValuesStayInRangeForAnyRaw) {
  MechanisticParams p;
  for (double raw : {-800.0, -30.0, 0.0, 30.0, 800.0}) {
    p.k_raw = p.alpha_raw = raw;
    p.v_raw = Eigen::VectorXd::Constant(2, raw);
    EXPECT_GE(p.k(), 0.0);
    EXPECT_GE(p.alpha(), 0.0);
    EXPECT_GE(p.v(2).minCoeff(), 0.0);
    EXPECT_LE(p.v(2).maxCoeff(), 1.0);
  }
}

TEST(EvalFM, LogisticMidpoint) {
  const GraphOperators ops = build_operators(ring_graph(4));
  const auto p = MechanisticParams::from_values(0.0, 1.0);
  const Eigen::VectorXd d = eval_f_M(p, ops, Eigen::VectorXd::Constant(4, 0.5), 0.0);
  EXPECT_LE((d - Eigen::VectorXd::Constant(4, 0.25)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(EvalFM, TwoNodeDiffusion) {
  const GraphOperators ops = build_operators(path_graph(2));
  const auto p = MechanisticParams::from_values(1.0, 0.0);
  const Eigen::VectorXd d = eval_f_M(p, ops, Eigen::Vector2d(1, 0), 0.0);
  EXPECT_NEAR(d[0], -1.0, 1e-15);
  EXPECT_NEAR(d[1], 1.0, 1e-15);
}

TEST(EvalFM, MatchesLoopImplementation) {
  const GraphOperators ops = build_operators(path_graph(3));
  const auto p = MechanisticParams::from_values(0.3, 0.7);
  const Eigen::Vector3d c(0.9, 0.1, 0.0);
  const Eigen::VectorXd got = eval_f_M(p, ops, c, 2.5);
  const Eigen::VectorXd want = reference_rhs(0.3, 0.7, Eigen::Vector3d::Ones(), ops.adjacency, c);
  EXPECT_LE((got - want).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(EvalFM, RandomGraphsMatchLoopWithLearnedCapacity) {
  std::mt19937_64 rng(2);
  for (int rep = 0; rep < 10; ++rep) {
    const Connectome g = testing::random_connectome(6, rng);
    const GraphOperators ops = build_operators(g);
    const Eigen::VectorXd v = (testing::random_matrix(6, 1, rng).array().abs().min(1.5) * 0.3 + 0.5).matrix();
    const auto p = MechanisticParams::from_values(0.2 + 0.1 * rep, 0.4, v);
    const Eigen::VectorXd c = testing::random_matrix(6, 1, rng).cwiseAbs();
    EXPECT_LE((eval_f_M(p, ops, c, 0.0) - reference_rhs(p.k(), p.alpha(), p.v(6), ops.adjacency, c)).cwiseAbs().maxCoeff(),
              1e-12);
  }
}

TEST(EvalFM, MassNeutralWithoutReaction) {
  std::mt19937_64 rng(3);
  const GraphOperators ops = build_operators(testing::random_connectome(9, rng));
  const auto p = MechanisticParams::from_values(0.8, 0.0);
  const Eigen::VectorXd c = testing::random_matrix(9, 1, rng);
  EXPECT_LE(std::abs(eval_f_M(p, ops, c, 0.0).sum()), 1e-10 * 9);
}

TEST(EvalFM, FixedPointsWithoutDiffusion) {
  const GraphOperators ops = build_operators(ring_graph(5));
  const Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(5, 0.5, 0.9);
  const auto p = MechanisticParams::from_values(0.0, 2.0, v);
  EXPECT_EQ(eval_f_M(p, ops, Eigen::VectorXd::Zero(5), 0.0), Eigen::VectorXd::Zero(5));
  EXPECT_EQ(eval_f_M(p, ops, p.v(5), 0.0), Eigen::VectorXd::Zero(5));
}

TEST(EvalFM, InputErrors) {
  const GraphOperators ops = build_operators(ring_graph(4));
  const auto p = MechanisticParams::from_values(0.1, 0.1);
  try {
    eval_f_M(p, ops, Eigen::VectorXd::Zero(3), 0.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DimensionMismatch);
  }
  Eigen::VectorXd bad = Eigen::VectorXd::Zero(4);
  bad[2] = std::numeric_limits<double>::quiet_NaN();
  try {
    eval_f_M(p, ops, bad, 0.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NonFiniteInput);
  }
}

TEST(GradFM, LinearJacobianRow) {
  const GraphOperators ops = build_operators(ring_graph(5));
  const auto p = MechanisticParams::from_values(0.6, 0.0);
  const Eigen::VectorXd c = Eigen::VectorXd::LinSpaced(5, 0.1, 0.5);
  for (Eigen::Index u = 0; u < 5; ++u) {
    const MechanisticGrad g = grad_f_M(p, ops, c, 0.0, Eigen::VectorXd::Unit(5, u));
    // L is symmetric, so row u of -kL equals column u.
    EXPECT_LE((g.c - (-0.6 * ops.laplacian.row(u).transpose())).cwiseAbs().maxCoeff(), 1e-15);
  }
}

TEST(GradFM, ZeroUpstreamGivesZero) {
  const GraphOperators ops = build_operators(ring_graph(3));
  const auto p = MechanisticParams::from_values(0.2, 0.3, Eigen::Vector3d(0.7, 0.8, 0.9));
  const MechanisticGrad g = grad_f_M(p, ops, Eigen::Vector3d(0.2, 0.4, 0.1), 0.0, Eigen::Vector3d::Zero());
  EXPECT_EQ(g.k_raw, 0.0);
  EXPECT_EQ(g.alpha_raw, 0.0);
  EXPECT_EQ(g.v_raw, Eigen::Vector3d::Zero());
  EXPECT_EQ(g.c, Eigen::Vector3d::Zero());
}

TEST(GradFM, KRawClosedFormNearZeroDiffusion) {
  const GraphOperators ops = build_operators(path_graph(4));
  auto p = MechanisticParams::from_values(0.1, 0.5);
  p.k_raw = -30.0;  // k ~ 1e-13
  const Eigen::Vector4d c(0.9, 0.3, 0.2, 0.05);
  const Eigen::Vector4d up(0.3, -1.0, 0.5, 2.0);
  const MechanisticGrad g = grad_f_M(p, ops, c, 0.0, up);
  const double expected = reparam::sigmoid(p.k_raw) * (-(up.asDiagonal() * ops.laplacian * c).sum());
  EXPECT_NEAR(g.k_raw, expected, 1e-14);
}

TEST(GradFM, MatchesCentralDifferences) {
  std::mt19937_64 rng(17);
  const GraphOperators ops = build_operators(testing::random_connectome(5, rng, 0.8));
  for (bool learn_v : {false, true}) {
    MechanisticParams p = learn_v ? MechanisticParams::from_values(0.3, 0.9, Eigen::VectorXd::Constant(5, 0.8))
                                  : MechanisticParams::from_values(0.3, 0.9);
    if (learn_v) p.v_raw += 0.3 * testing::random_matrix(5, 1, rng);
    const Eigen::VectorXd c = testing::random_matrix(5, 1, rng).cwiseAbs() * 0.5;
    const Eigen::VectorXd up = testing::random_matrix(5, 1, rng);
    const MechanisticGrad g = grad_f_M(p, ops, c, 0.0, up);
    const double h = 1e-5;
    auto objective = [&](const MechanisticParams& q, const Eigen::VectorXd& cc) {
      return up.dot(eval_f_M(q, ops, cc, 0.0));
    };
    auto rel = [](double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8}); };

    MechanisticParams a = p, b = p;
    a.k_raw += h;
    b.k_raw -= h;
    EXPECT_LE(rel(g.k_raw, (objective(a, c) - objective(b, c)) / (2 * h)), 1e-5);
    a = p;
    b = p;
    a.alpha_raw += h;
    b.alpha_raw -= h;
    EXPECT_LE(rel(g.alpha_raw, (objective(a, c) - objective(b, c)) / (2 * h)), 1e-5);
    for (Eigen::Index u = 0; u < 5; ++u) {
      Eigen::VectorXd cp = c, cm = c;
      cp[u] += h;
      cm[u] -= h;
      EXPECT_LE(rel(g.c[u], (objective(p, cp) - objective(p, cm)) / (2 * h)), 1e-5);
      if (learn_v) {
        a = p;
        b = p;
        a.v_raw[u] += h;
        b.v_raw[u] -= h;
        EXPECT_LE(rel(g.v_raw[u], (objective(a, c) - objective(b, c)) / (2 * h)), 1e-5);
      }
    }
  }
}

}  // namespace
}  // namespace progmoe
