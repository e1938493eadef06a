#include <gtest/gtest.h>

#include "progmoe/error.hpp"
#include "progmoe/local_expert.hpp"
#include "test_support.hpp"

namespace progmoe {
namespace {

ad::ParamStore randomized(const LocalExpertConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ad::ParamStore p;
  add_local_params(p, cfg, rng);
  for (auto& e : p.entries()) p.value(e.name) += 0.4 * testing::random_matrix(e.value.rows(), e.value.cols(), rng);
  return p;
}

TEST(LocalExpert, ZeroLastLayerIsZeroMap) {
  const LocalExpertConfig cfg;
  std::mt19937_64 rng(1);
  ad::ParamStore p;
  add_local_params(p, cfg, rng);
  EXPECT_EQ(eval_f_L(p, cfg, Eigen::VectorXd::LinSpaced(6, 0, 1), 0.5), Eigen::VectorXd::Zero(6));
}

TEST(LocalExpert, DefaultShape) {
  const LocalExpertConfig cfg;
  EXPECT_EQ(cfg.hidden_widths, (std::vector<int>{32, 32}));
  EXPECT_EQ(cfg.activation, nn::Activation::Tanh);
  EXPECT_FALSE(cfg.time_input);
  EXPECT_EQ(cfg.stack().input, 1);
  EXPECT_EQ(cfg.stack().output, 1);
}

TEST(LocalExpert, EqualInputsGiveEqualOutputs) {
  const LocalExpertConfig cfg;
  const ad::ParamStore p = randomized(cfg, 2);
  Eigen::VectorXd c(5);
  c << 0.4, 0.1, 0.9, 0.4, 0.7;
  const Eigen::VectorXd out = eval_f_L(p, cfg, c, 0.0);
  EXPECT_EQ(out[0], out[3]);
  EXPECT_NE(out[0], out[1]);
}

TEST(LocalExpert, PerturbationStaysLocal) {
  for (auto act : {nn::Activation::Tanh, nn::Activation::Softplus}) {
    LocalExpertConfig cfg;
    cfg.activation = act;
    const ad::ParamStore p = randomized(cfg, 3);
    const Eigen::Vector4d c(0.2, 0.5, 0.3, 0.8);
    Eigen::Vector4d d = c;
    d[2] += 0.05;
    const Eigen::VectorXd a = eval_f_L(p, cfg, c, 0.0);
    const Eigen::VectorXd b = eval_f_L(p, cfg, d, 0.0);
    for (int u = 0; u < 4; ++u) {
      if (u == 2) {
        EXPECT_NE(a[u], b[u]);
      } else {
        EXPECT_EQ(a[u], b[u]);
      }
    }
  }
}

TEST(LocalExpert, JacobianIsDiagonal) {
  LocalExpertConfig cfg;
  cfg.time_input = true;
  const ad::ParamStore p = randomized(cfg, 4);
  const Eigen::VectorXd c = Eigen::VectorXd::LinSpaced(5, 0.1, 0.9);
  const double h = 1e-6;
  for (Eigen::Index v = 0; v < 5; ++v) {
    Eigen::VectorXd cp = c, cm = c;
    cp[v] += h;
    cm[v] -= h;
    const Eigen::VectorXd col = (eval_f_L(p, cfg, cp, 0.3) - eval_f_L(p, cfg, cm, 0.3)) / (2 * h);
    for (Eigen::Index u = 0; u < 5; ++u) {
      if (u != v) EXPECT_LT(std::abs(col[u]), 1e-10);
    }
    EXPECT_GT(std::abs(col[v]), 0.0);
  }
}

TEST(LocalExpert, PermutationEquivariant) {
  const LocalExpertConfig cfg;
  const ad::ParamStore p = randomized(cfg, 5);
  const Eigen::VectorXd c = Eigen::VectorXd::LinSpaced(6, 0.0, 1.0);
  Eigen::PermutationMatrix<Eigen::Dynamic> perm(6);
  perm.indices() << 4, 2, 0, 5, 1, 3;
  // vectorized products may round differently per row position
  const Eigen::VectorXd diff = eval_f_L(p, cfg, perm * c, 0.0) - perm * eval_f_L(p, cfg, c, 0.0);
  EXPECT_LE(diff.cwiseAbs().maxCoeff(), 1e-14);
}

TEST(LocalExpert, TimeInputOnlyWhenEnabled) {
  LocalExpertConfig cfg;
  const Eigen::VectorXd c = Eigen::VectorXd::Constant(3, 0.4);
  const ad::ParamStore p = randomized(cfg, 6);
  EXPECT_EQ(eval_f_L(p, cfg, c, 0.0), eval_f_L(p, cfg, c, 1.0));
  cfg.time_input = true;
  const ad::ParamStore pt = randomized(cfg, 6);
  EXPECT_NE(eval_f_L(pt, cfg, c, 0.0), eval_f_L(pt, cfg, c, 1.0));
}

TEST(LocalExpert, RejectsNonFinite) {
  const LocalExpertConfig cfg;
  const ad::ParamStore p = randomized(cfg, 7);
  try {
    eval_f_L(p, cfg, Eigen::Vector2d(0.1, std::numeric_limits<double>::infinity()), 0.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NonFiniteInput);
  }
}

}  // namespace
}  // namespace progmoe
