#pragma once

#include <Eigen/Dense>

#include "progmoe/autodiff.hpp"
#include "progmoe/graph.hpp"

namespace progmoe {

/// Homogeneous network diffusion plus logistic reaction:
///   dc/dt = -k L c + alpha c .* (v - c)
/// k and alpha are softplus images of raw internals; v is either fixed at 1
/// or the sigmoid image of a raw per-region vector.
struct MechanisticParams {
  double k_raw = 0.0;
  double alpha_raw = 0.0;
  /// Empty when the carrying capacity is fixed at 1.
  Eigen::VectorXd v_raw;

  static MechanisticParams from_values(double k, double alpha);
  static MechanisticParams from_values(double k, double alpha, const Eigen::VectorXd& v);

  double k() const;
  double alpha() const;
  bool v_fixed() const { return v_raw.size() == 0; }
  Eigen::VectorXd v(Eigen::Index n) const;
};

Eigen::VectorXd eval_f_M(const MechanisticParams& params, const GraphOperators& ops, const Eigen::VectorXd& c,
                         double t);

/// Vector-Jacobian products of eval_f_M with respect to the raw internals and c.
struct MechanisticGrad {
  double k_raw = 0.0;
  double alpha_raw = 0.0;
  Eigen::VectorXd v_raw;  // empty when v is fixed
  Eigen::VectorXd c;
};

MechanisticGrad grad_f_M(const MechanisticParams& params, const GraphOperators& ops, const Eigen::VectorXd& c,
                         double t, const Eigen::VectorXd& upstream);

/// Tape form used inside the differentiable integrator. `k` and `alpha` are
/// 1 x 1 nodes holding the constrained values, `v` an n x 1 node.
ad::Var f_M(ad::Var k, ad::Var alpha, ad::Var v, ad::Var laplacian, ad::Var c);

}  // namespace progmoe
