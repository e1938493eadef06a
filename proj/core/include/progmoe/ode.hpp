#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>

#include "progmoe/error.hpp"

namespace progmoe {

/// Number of fixed steps covering [0, horizon]; throws unless horizon / step is an integer.
inline int grid_steps(double horizon, double step) {
  if (!(step > 0.0) || !(horizon > 0.0)) {
    throw Error(ErrorKind::InvalidConfig, "time horizon and step must be positive");
  }
  const double ratio = horizon / step;
  const double rounded = std::round(ratio);
  if (std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio)) {
    throw Error(ErrorKind::InvalidConfig, "horizon / step must be an integer");
  }
  return static_cast<int>(rounded);
}

/// One classic Runge-Kutta 4 step given the first stage k1 = f(x, t).
/// Works for any State with +, and scalar * (Eigen vectors and ad::Var).
template <class State, class Rhs>
State rk4_step(Rhs&& f, const State& x, const State& k1, double t, double h) {
  const State x2 = x + (0.5 * h) * k1;
  const State k2 = f(x2, t + 0.5 * h);
  const State x3 = x + (0.5 * h) * k2;
  const State k3 = f(x3, t + 0.5 * h);
  const State x4 = x + h * k3;
  const State k4 = f(x4, t + h);
  const State incr = k1 + 2.0 * k2 + 2.0 * k3 + k4;
  return x + (h / 6.0) * incr;
}

/// Integrates dx/dt = f(x, t) on the grid 0, h, ..., horizon. Row k of the
/// result is x(k h). Throws NonFiniteState at the first divergent step.
template <class Rhs>
Eigen::MatrixXd rk4_integrate(Rhs&& f, const Eigen::VectorXd& x0, double horizon, double step) {
  const int steps = grid_steps(horizon, step);
  Eigen::MatrixXd states(steps + 1, x0.size());
  Eigen::VectorXd x = x0;
  states.row(0) = x.transpose();
  for (int k = 0; k < steps; ++k) {
    const double t = k * step;
    const Eigen::VectorXd k1 = f(x, t);
    x = rk4_step<Eigen::VectorXd>(f, x, k1, t, step);
    if (!x.allFinite()) {
      throw Error(ErrorKind::NonFiniteState, "state became non-finite at step " + std::to_string(k + 1));
    }
    states.row(k + 1) = x.transpose();
  }
  return states;
}

}  // namespace progmoe
