#pragma once

// Stage-aware mixture of experts:
//   dc/dt = beta_1(t) f_M + beta_2(t) f_S + beta_3(t) f_L,  beta(t) on the simplex,
// integrated with fixed-step RK4 on [0, T].

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <vector>

#include "progmoe/autodiff.hpp"
#include "progmoe/graph.hpp"
#include "progmoe/ignd.hpp"
#include "progmoe/local_expert.hpp"
#include "progmoe/mechanistic.hpp"
#include "progmoe/nn.hpp"

namespace progmoe {

enum class GateMode {
  Temporal,     // beta depends on t through the gate network
  Constant,     // only the output bias is trained: beta is time-independent
  Mechanistic,  // beta fixed at [1, 0, 0]; neural experts are not evaluated
};

GateMode parse_gate_mode(const std::string& name);
std::string to_string(GateMode mode);

/// Gate network t/T -> tanh(hidden) -> 3 logits -> softmax. The output layer
/// starts at zero weights with bias `init_bias`.
struct GateConfig {
  int hidden = 16;
  Eigen::Vector3d init_bias{2.0, 0.0, 0.0};
  GateMode mode = GateMode::Temporal;

  nn::DenseStack stack() const { return {"gate", 1, {hidden}, 3}; }
};

struct ModelConfig {
  double horizon = 12.0;
  double step = 0.1;
  double k_init = 0.1;
  double alpha_init = 0.5;
  bool learn_v = false;
  double v_init = 0.99;  // only used with learn_v
  double c0_base = 0.05;
  double c0_seed = 0.2;
  std::vector<Eigen::Index> seed_regions{0};
  bool enable_ignd = true;
  bool enable_local = true;
  IgndConfig ignd;
  LocalExpertConfig local;
  GateConfig gate;

  int grid_steps() const;
  void validate(Eigen::Index n) const;
};

/// All learnable state of the mixture, in one ParamStore with namespaces
/// "mech.*", "c0_raw", "gate.*", "ignd.*" and "local.*".
class MoeModel {
 public:
  static MoeModel create(const ModelConfig& config, Eigen::Index n, std::uint64_t seed);
  /// Rebuilds a model around existing parameter values (checkpoint load).
  static MoeModel from_params(const ModelConfig& config, Eigen::Index n, ad::ParamStore params);

  const ModelConfig& config() const { return config_; }
  Eigen::Index n() const { return n_; }
  ad::ParamStore& params() { return params_; }
  const ad::ParamStore& params() const { return params_; }

  MechanisticParams mechanistic() const;
  void set_mechanistic(const MechanisticParams& p);
  Eigen::VectorXd c0() const;
  void set_c0(const Eigen::VectorXd& c0);

  /// Trainable flags implied by the config (gate mode, disabled experts).
  void apply_default_trainability();

 private:
  ModelConfig config_;
  Eigen::Index n_ = 0;
  ad::ParamStore params_;
};

/// Tape nodes for one forward pass over a model.
struct ModelBinding {
  const MoeModel* model = nullptr;
  const GraphOperators* ops = nullptr;
  MessageGraph graph;
  nn::Binding params;
  ad::Var k;
  ad::Var alpha;
  ad::Var v;
  ad::Var c0;
  ad::Var laplacian;
};

/// With `differentiable`, parameters become leaves that receive gradients.
ModelBinding bind_model(ad::Tape& tape, MoeModel& model, const GraphOperators& ops, bool differentiable);
ModelBinding bind_model_constant(ad::Tape& tape, const MoeModel& model, const GraphOperators& ops);

struct RhsNodes {
  ad::Var dcdt;
  std::array<ad::Var, 3> experts;  // unweighted f_M, f_S, f_L
  ad::Var beta;                    // 1 x 3
};

ad::Var gate_nodes(const ModelBinding& b, double t);
RhsNodes rhs_nodes(const ModelBinding& b, ad::Var c, double t);

struct TapeTrajectory {
  std::vector<ad::Var> states;
  /// Right-hand side at every grid point (t_k, c_k); the RK4 first stages plus the end point.
  std::vector<RhsNodes> grid_terms;
  double step = 0.0;
  double horizon = 0.0;
};

TapeTrajectory integrate_nodes(const ModelBinding& b);

struct Trajectory {
  std::vector<double> times;
  Eigen::MatrixXd states;  // grid_len x n
  /// Optional per grid point: 3 x n weighted contributions beta_j f_j.
  std::vector<Eigen::MatrixXd> contributions;
  double step = 0.0;
  double horizon = 0.0;

  Eigen::Index n() const { return states.cols(); }
  std::size_t size() const { return times.size(); }
};

Eigen::Vector3d eval_gate(const MoeModel& model, double t);

struct RhsResult {
  Eigen::VectorXd dcdt;
  Eigen::MatrixXd per_expert;  // 3 x n weighted terms; rows sum to dcdt
};

RhsResult eval_rhs(const MoeModel& model, const GraphOperators& ops, const Eigen::VectorXd& c, double t);

Trajectory integrate(const MoeModel& model, const GraphOperators& ops, bool record_contributions = false);

/// Grid index k and weight w with t = (k + w) h, 0 <= w <= 1; w == 0 exactly on grid points.
struct InterpolationWeights {
  std::size_t index = 0;
  double weight = 0.0;
};
InterpolationWeights interpolation_weights(double t, double step, double horizon, std::size_t grid_len);

/// Linear interpolation between adjacent grid states. Throws OutOfWindow outside [0, T].
Eigen::VectorXd predict_at(const Trajectory& traj, double t);
ad::Var predict_node(const TapeTrajectory& traj, double t);

}  // namespace progmoe
