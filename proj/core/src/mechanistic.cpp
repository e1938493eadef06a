#include "progmoe/mechanistic.hpp"

#include "progmoe/error.hpp"
#include "progmoe/reparam.hpp"

namespace progmoe {

namespace {

void check_inputs(const GraphOperators& ops, const Eigen::VectorXd& c) {
  if (c.size() != ops.n()) {
    throw Error(ErrorKind::DimensionMismatch,
                "state has " + std::to_string(c.size()) + " entries for " + std::to_string(ops.n()) + " regions");
  }
  if (!c.allFinite()) throw Error(ErrorKind::NonFiniteInput, "state contains NaN or Inf");
}

}  // namespace

MechanisticParams MechanisticParams::from_values(double k, double alpha) {
  MechanisticParams p;
  p.k_raw = reparam::softplus_inverse(k);
  p.alpha_raw = reparam::softplus_inverse(alpha);
  return p;
}

MechanisticParams MechanisticParams::from_values(double k, double alpha, const Eigen::VectorXd& v) {
  MechanisticParams p = from_values(k, alpha);
  p.v_raw = v.unaryExpr([](double x) { return reparam::logit(x); });
  return p;
}

double MechanisticParams::k() const { return reparam::softplus(k_raw); }
double MechanisticParams::alpha() const { return reparam::softplus(alpha_raw); }

Eigen::VectorXd MechanisticParams::v(Eigen::Index n) const {
  if (v_fixed()) return Eigen::VectorXd::Ones(n);
  if (v_raw.size() != n) throw Error(ErrorKind::DimensionMismatch, "carrying-capacity vector has wrong length");
  return v_raw.unaryExpr([](double x) { return reparam::sigmoid(x); });
}

Eigen::VectorXd eval_f_M(const MechanisticParams& params, const GraphOperators& ops, const Eigen::VectorXd& c,
                         double /*t*/) {
  check_inputs(ops, c);
  const Eigen::VectorXd v = params.v(ops.n());
  return -params.k() * (ops.laplacian * c) + params.alpha() * c.cwiseProduct(v - c);
}

MechanisticGrad grad_f_M(const MechanisticParams& params, const GraphOperators& ops, const Eigen::VectorXd& c,
                         double /*t*/, const Eigen::VectorXd& upstream) {
  check_inputs(ops, c);
  if (upstream.size() != c.size()) throw Error(ErrorKind::DimensionMismatch, "upstream length mismatch");
  const Eigen::VectorXd v = params.v(ops.n());
  const double k = params.k();
  const double alpha = params.alpha();
  const Eigen::VectorXd lc = ops.laplacian * c;

  MechanisticGrad g;
  g.k_raw = reparam::sigmoid(params.k_raw) * -upstream.dot(lc);
  g.alpha_raw = reparam::sigmoid(params.alpha_raw) * upstream.dot(c.cwiseProduct(v - c));
  if (!params.v_fixed()) {
    const Eigen::VectorXd dv = v.cwiseProduct(Eigen::VectorXd::Ones(v.size()) - v);
    g.v_raw = alpha * upstream.cwiseProduct(c).cwiseProduct(dv);
  }
  // d/dc [alpha c (v - c)] = alpha (v - 2c); L is symmetric but keep the transpose explicit.
  g.c = -k * (ops.laplacian.transpose() * upstream) + alpha * upstream.cwiseProduct(v - 2.0 * c);
  return g;
}

ad::Var f_M(ad::Var k, ad::Var alpha, ad::Var v, ad::Var laplacian, ad::Var c) {
  ad::Var diffusion = ad::scale(ad::matmul(laplacian, c), k);
  ad::Var reaction = ad::scale(ad::hadamard(c, ad::sub(v, c)), alpha);
  return ad::sub(reaction, diffusion);
}

}  // namespace progmoe
