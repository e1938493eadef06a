#include <gtest/gtest.h>

#include <Eigen/SVD>

#include "progmoe/error.hpp"
#include "progmoe/ignd.hpp"
#include "test_support.hpp"

namespace progmoe {
namespace {

using testing::random_matrix;

IgndConfig small_config(int latent = 2) {
  IgndConfig cfg;
  cfg.latent_dim = latent;
  cfg.encoder_layers = {6};
  cfg.prop_hidden = 5;
  cfg.message_dim = 4;
  cfg.decoder_hidden = 6;
  return cfg;
}

/// Parameters with every layer, including the zero-initialized readout, randomized.
ad::ParamStore random_params(const IgndConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ad::ParamStore store;
  add_ignd_params(store, cfg, rng);
  for (auto& e : store.entries()) store.value(e.name) += 0.5 * random_matrix(e.value.rows(), e.value.cols(), rng);
  return store;
}

Eigen::MatrixXd permutation(const std::vector<int>& order) {
  const auto n = static_cast<Eigen::Index>(order.size());
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) p(i, order[static_cast<std::size_t>(i)]) = 1.0;
  return p;
}

TEST(IgndConfig, LatentDimBounds) {
  IgndConfig cfg = small_config();
  EXPECT_NO_THROW(cfg.validate(2));
  cfg.latent_dim = 3;
  EXPECT_THROW(cfg.validate(2), Error);
  cfg.latent_dim = 0;
  EXPECT_THROW(cfg.validate(5), Error);
}

TEST(Encode, ZeroInputWithZeroFinalLayerGivesConstantRows) {
  const IgndConfig cfg = small_config();
  ad::ParamStore p = random_params(cfg, 3);
  const nn::DenseStack enc = cfg.encoder_stack();
  p.value(enc.weight_name(enc.layer_count() - 1)).setZero();
  std::mt19937_64 rng(1);
  for (int rep = 0; rep < 3; ++rep) {
    const GraphOperators ops = build_operators(testing::random_connectome(5, rng));
    const LatentState s = encode(p, cfg, ops, Eigen::VectorXd::Zero(5), 0.3);
    for (Eigen::Index u = 1; u < 5; ++u) EXPECT_EQ(s.h.row(u), s.h.row(0));
  }
}

TEST(Encode, PermutationEquivariant) {
  const IgndConfig cfg = small_config(3);
  const ad::ParamStore p = random_params(cfg, 7);
  std::mt19937_64 rng(2);
  const Eigen::MatrixXd a = testing::random_adjacency(6, rng, 0.6);
  const Eigen::VectorXd c = random_matrix(6, 1, rng).cwiseAbs();
  const Eigen::MatrixXd perm = permutation({3, 0, 5, 1, 4, 2});
  const auto names = testing::region_names(6);
  const GraphOperators ops = build_operators(Connectome::from_adjacency(names, a));
  const GraphOperators pops = build_operators(Connectome::from_adjacency(names, perm * a * perm.transpose()));

  const LatentState s = encode(p, cfg, ops, c, 0.5);
  const LatentState ps = encode(p, cfg, pops, perm * c, 0.5);
  EXPECT_LE((ps.h - perm * s.h).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((ps.a_hat - perm * s.a_hat * perm.transpose()).cwiseAbs().maxCoeff(), 1e-12);

  const Eigen::VectorXd f = eval_f_S(p, cfg, ops, c, 0.5);
  const Eigen::VectorXd pf = eval_f_S(p, cfg, pops, perm * c, 0.5);
  EXPECT_LE((pf - perm * f).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Encode, HandComputedPathGraph) {
  IgndConfig cfg;
  cfg.latent_dim = 2;
  cfg.encoder_layers = {};  // one dense layer
  cfg.prop_hidden = 1;
  cfg.message_dim = 1;
  cfg.decoder_hidden = 1;
  std::mt19937_64 rng(0);
  ad::ParamStore p;
  add_ignd_params(p, cfg, rng);
  // phi([cu, cv]) = 1.5 tanh(0.7 cu - 0.4 cv + 0.1) - 0.2
  p.value("ignd.prop.W0") << 0.7, -0.4;
  p.value("ignd.prop.b0") << 0.1;
  p.value("ignd.prop.W1") << 1.5;
  p.value("ignd.prop.b1") << -0.2;
  // h_u = [cu, m_u] W + b
  p.value("ignd.enc.W0") << 0.9, -0.3, 0.5, 1.2;
  p.value("ignd.enc.b0") << 0.05, -0.1;

  Eigen::MatrixXd a(3, 3);
  a << 0, 2.0, 0, 2.0, 0, 0.5, 0, 0.5, 0;
  const GraphOperators ops = build_operators(Connectome::from_adjacency({"x", "y", "z"}, a));
  const Eigen::Vector3d c(0.8, 0.3, 0.1);

  auto phi = [](double cu, double cv) { return 1.5 * std::tanh(0.7 * cu - 0.4 * cv + 0.1) - 0.2; };
  Eigen::MatrixXd expected(3, 2);
  for (int u = 0; u < 3; ++u) {
    double m = 0.0;
    for (int v = 0; v < 3; ++v) {
      if (a(u, v) > 0) m += a(u, v) * phi(c[u], c[v]);
    }
    expected(u, 0) = 0.9 * c[u] + 0.5 * m + 0.05;
    expected(u, 1) = -0.3 * c[u] + 1.2 * m - 0.1;
  }
  const LatentState s = encode(p, cfg, ops, c, 0.0);
  EXPECT_LE((s.h - expected).cwiseAbs().maxCoeff(), 1e-12);

  Eigen::MatrixXd aff = (expected * expected.transpose()).unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
  for (int u = 0; u < 3; ++u) aff.row(u) /= aff.row(u).sum();
  EXPECT_LE((s.a_hat - aff).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Encode, RefinedAdjacencyIsRowStochasticWithRankBound) {
  const IgndConfig cfg = small_config(2);
  const ad::ParamStore p = random_params(cfg, 5);
  std::mt19937_64 rng(9);
  const GraphOperators ops = build_operators(testing::random_connectome(7, rng));
  const LatentState s = encode(p, cfg, ops, random_matrix(7, 1, rng).cwiseAbs(), 0.2);
  EXPECT_LE((s.a_hat.rowwise().sum() - Eigen::VectorXd::Ones(7)).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_GE(s.a_hat.minCoeff(), 0.0);
  EXPECT_LE(s.a_hat.maxCoeff(), 1.0);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(s.h * s.h.transpose());
  const Eigen::VectorXd sv = svd.singularValues();
  for (Eigen::Index i = cfg.latent_dim; i < sv.size(); ++i) EXPECT_LE(sv[i], 1e-10 * sv[0]);
}

TEST(Encode, RefinedAdjacencyDependsOnState) {
  const IgndConfig cfg = small_config(2);
  const ad::ParamStore p = random_params(cfg, 6);
  const GraphOperators ops = build_operators(ring_graph(5));
  const Eigen::VectorXd c1 = Eigen::VectorXd::LinSpaced(5, 0.1, 0.5);
  Eigen::VectorXd c2 = c1;
  c2[2] += 0.2;
  const LatentState s1 = encode(p, cfg, ops, c1, 0.4);
  const LatentState s2 = encode(p, cfg, ops, c2, 0.4);
  EXPECT_GT((s1.a_hat - s2.a_hat).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Encode, MaskKeepsAnatomicalSupport) {
  IgndConfig cfg = small_config(2);
  cfg.mask_to_support = true;
  const ad::ParamStore p = random_params(cfg, 8);
  const GraphOperators ops = build_operators(ring_graph(6));
  const LatentState s = encode(p, cfg, ops, Eigen::VectorXd::LinSpaced(6, 0.1, 0.6), 0.0);
  for (Eigen::Index u = 0; u < 6; ++u) {
    for (Eigen::Index v = 0; v < 6; ++v) {
      if (ops.adjacency(u, v) == 0.0) EXPECT_EQ(s.a_hat(u, v), 0.0);
    }
  }
  EXPECT_LE((s.a_hat.rowwise().sum() - Eigen::VectorXd::Ones(6)).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Encode, TimeEncodingChangesOutputOnlyWhenEnabled) {
  IgndConfig cfg = small_config(2);
  const ad::ParamStore p = random_params(cfg, 4);
  const GraphOperators ops = build_operators(ring_graph(4));
  const Eigen::VectorXd c = Eigen::VectorXd::LinSpaced(4, 0.2, 0.5);
  EXPECT_EQ(eval_f_S(p, cfg, ops, c, 0.1), eval_f_S(p, cfg, ops, c, 0.9));
  cfg.time_encoding = TimeEncoding::ScalarAppend;
  const ad::ParamStore pt = random_params(cfg, 4);
  EXPECT_NE(eval_f_S(pt, cfg, ops, c, 0.1), eval_f_S(pt, cfg, ops, c, 0.9));
}

TEST(EvalFS, ZeroReadoutIsZeroMap) {
  const IgndConfig cfg = small_config();
  std::mt19937_64 rng(3);
  ad::ParamStore p;
  add_ignd_params(p, cfg, rng);
  for (int rep = 0; rep < 4; ++rep) {
    const GraphOperators ops = build_operators(testing::random_connectome(5, rng));
    EXPECT_EQ(eval_f_S(p, cfg, ops, random_matrix(5, 1, rng), 0.5), Eigen::VectorXd::Zero(5));
  }
}

TEST(EvalFS, Deterministic) {
  const IgndConfig cfg = small_config();
  const GraphOperators ops = build_operators(ring_graph(5));
  const Eigen::VectorXd c = Eigen::VectorXd::LinSpaced(5, 0.0, 1.0);
  EXPECT_EQ(eval_f_S(random_params(cfg, 11), cfg, ops, c, 0.3), eval_f_S(random_params(cfg, 11), cfg, ops, c, 0.3));
}

TEST(EvalFS, InputErrors) {
  const IgndConfig cfg = small_config();
  const ad::ParamStore p = random_params(cfg, 1);
  const GraphOperators ops = build_operators(ring_graph(4));
  EXPECT_THROW(eval_f_S(p, cfg, ops, Eigen::VectorXd::Zero(3), 0.0), Error);
  EXPECT_THROW(eval_f_S(p, cfg, ops, Eigen::VectorXd::Constant(4, std::nan("")), 0.0), Error);
}

TEST(EvalFS, GradientMatchesFiniteDifferences) {
  const IgndConfig cfg = small_config(2);
  ad::ParamStore p = random_params(cfg, 12);
  std::mt19937_64 rng(12);
  const GraphOperators ops = build_operators(testing::random_connectome(5, rng, 0.7));
  const MessageGraph graph = MessageGraph::from(ops);
  const Eigen::VectorXd c = random_matrix(5, 1, rng).cwiseAbs();
  const Eigen::VectorXd w = random_matrix(5, 1, rng);

  ad::Tape tape;
  const nn::Binding bound = nn::bind(tape, p);
  const ad::Var cv = tape.variable(c);
  const ad::Var out = ignd_forward(cfg, bound, graph, cv, 0.4).dcdt;
  p.zero_grad();
  tape.backward(ad::dot(out, tape.constant(w)));
  const Eigen::MatrixXd grad_c = tape.grad(cv);

  auto objective = [&] { return w.dot(eval_f_S(p, cfg, ops, c, 0.4)); };
  const auto numeric = testing::central_differences(p, objective);
  for (std::size_t i = 0; i < p.size(); ++i) {
    EXPECT_LE(testing::max_relative_error(p.entry(i).grad, numeric[i]), 1e-4) << p.entry(i).name;
  }
  for (Eigen::Index u = 0; u < 5; ++u) {
    Eigen::VectorXd cp = c, cm = c;
    cp[u] += 1e-5;
    cm[u] -= 1e-5;
    const double fd = (w.dot(eval_f_S(p, cfg, ops, cp, 0.4)) - w.dot(eval_f_S(p, cfg, ops, cm, 0.4))) / 2e-5;
    EXPECT_LE(std::abs(fd - grad_c(u, 0)) / std::max({std::abs(fd), std::abs(grad_c(u, 0)), 1e-6}), 1e-4);
  }
}

}  // namespace
}  // namespace progmoe
