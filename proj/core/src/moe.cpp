#include "progmoe/moe.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "progmoe/error.hpp"
#include "progmoe/ode.hpp"
#include "progmoe/reparam.hpp"

namespace progmoe {

GateMode parse_gate_mode(const std::string& name) {
  if (name == "temporal") return GateMode::Temporal;
  if (name == "constant") return GateMode::Constant;
  if (name == "mechanistic") return GateMode::Mechanistic;
  throw Error(ErrorKind::InvalidConfig, "unknown gate mode '" + name + "' (expected temporal|constant|mechanistic)");
}

std::string to_string(GateMode mode) {
  switch (mode) {
    case GateMode::Temporal: return "temporal";
    case GateMode::Constant: return "constant";
    case GateMode::Mechanistic: return "mechanistic";
  }
  return "temporal";
}

int ModelConfig::grid_steps() const { return progmoe::grid_steps(horizon, step); }

void ModelConfig::validate(Eigen::Index n) const {
  grid_steps();
  if (k_init < 0.0 || alpha_init < 0.0) throw Error(ErrorKind::InvalidConfig, "k_init and alpha_init must be >= 0");
  if (!(c0_base > 0.0 && c0_base < 1.0) || !(c0_base + c0_seed > 0.0 && c0_base + c0_seed < 1.0)) {
    throw Error(ErrorKind::InvalidConfig, "initial concentrations must lie strictly inside (0, 1)");
  }
  if (learn_v && !(v_init > 0.0 && v_init < 1.0)) {
    throw Error(ErrorKind::InvalidConfig, "v_init must lie in (0, 1) when v is learned");
  }
  for (Eigen::Index r : seed_regions) {
    if (r < 0 || r >= n) throw Error(ErrorKind::InvalidConfig, "seed region " + std::to_string(r) + " out of range");
  }
  if (gate.hidden < 1) throw Error(ErrorKind::InvalidConfig, "gate hidden width must be positive");
  if (enable_ignd) ignd.validate(n);
}

// ------------------------------------------------------------------ MoeModel

MoeModel MoeModel::create(const ModelConfig& config, Eigen::Index n, std::uint64_t seed) {
  config.validate(n);
  std::mt19937_64 rng(seed);
  ad::ParamStore p;
  p.add("mech.k_raw", ad::Matrix::Constant(1, 1, reparam::softplus_inverse(std::max(config.k_init, 1e-12))));
  p.add("mech.alpha_raw", ad::Matrix::Constant(1, 1, reparam::softplus_inverse(std::max(config.alpha_init, 1e-12))));
  if (config.learn_v) p.add("mech.v_raw", ad::Matrix::Constant(n, 1, reparam::logit(config.v_init)));

  ad::Matrix c0 = ad::Matrix::Constant(n, 1, config.c0_base);
  for (Eigen::Index r : config.seed_regions) c0(r, 0) = config.c0_base + config.c0_seed;
  p.add("c0_raw", c0.unaryExpr([](double x) { return reparam::logit(x); }));

  nn::add_params(p, config.gate.stack(), rng, true);
  p.value(config.gate.stack().bias_name(1)) = config.gate.init_bias.transpose();

  if (config.enable_ignd) add_ignd_params(p, config.ignd, rng);
  if (config.enable_local) add_local_params(p, config.local, rng);

  MoeModel m;
  m.config_ = config;
  m.n_ = n;
  m.params_ = std::move(p);
  m.apply_default_trainability();
  return m;
}

MoeModel MoeModel::from_params(const ModelConfig& config, Eigen::Index n, ad::ParamStore params) {
  // Validate the layout against a freshly built model of the same config.
  MoeModel reference = create(config, n, 0);
  const auto& want = reference.params();
  if (want.size() != params.size()) {
    throw Error(ErrorKind::ParseError, "checkpoint has " + std::to_string(params.size()) + " parameters, expected " +
                                           std::to_string(want.size()));
  }
  for (std::size_t i = 0; i < want.size(); ++i) {
    const auto& e = want.entry(i);
    if (!params.contains(e.name)) throw Error(ErrorKind::ParseError, "checkpoint lacks parameter '" + e.name + "'");
    const auto& got = params.value(e.name);
    if (got.rows() != e.value.rows() || got.cols() != e.value.cols()) {
      throw Error(ErrorKind::ParseError, "parameter '" + e.name + "' has the wrong shape");
    }
    reference.params_.value(e.name) = got;
  }
  return reference;
}

MechanisticParams MoeModel::mechanistic() const {
  MechanisticParams m;
  m.k_raw = params_.value("mech.k_raw")(0, 0);
  m.alpha_raw = params_.value("mech.alpha_raw")(0, 0);
  if (config_.learn_v) m.v_raw = params_.value("mech.v_raw").col(0);
  return m;
}

void MoeModel::set_mechanistic(const MechanisticParams& m) {
  params_.value("mech.k_raw")(0, 0) = m.k_raw;
  params_.value("mech.alpha_raw")(0, 0) = m.alpha_raw;
  if (config_.learn_v) {
    if (m.v_fixed()) throw Error(ErrorKind::InvalidConfig, "model learns v but the parameters fix it");
    params_.value("mech.v_raw").col(0) = m.v_raw;
  }
}

Eigen::VectorXd MoeModel::c0() const {
  return params_.value("c0_raw").col(0).unaryExpr([](double x) { return reparam::sigmoid(x); });
}

void MoeModel::set_c0(const Eigen::VectorXd& c0) {
  if (c0.size() != n_) throw Error(ErrorKind::DimensionMismatch, "c0 length mismatch");
  params_.value("c0_raw").col(0) = c0.unaryExpr([](double x) { return reparam::logit(x); });
}

void MoeModel::apply_default_trainability() {
  for (std::size_t i = 0; i < params_.size(); ++i) params_.entry(i).trainable = true;
  const auto gate = config_.gate.stack();
  switch (config_.gate.mode) {
    case GateMode::Temporal:
      break;
    case GateMode::Constant:
      params_.set_trainable(gate.weight_name(0), false);
      params_.set_trainable(gate.bias_name(0), false);
      params_.set_trainable(gate.weight_name(1), false);
      break;
    case GateMode::Mechanistic:
      params_.set_trainable_prefix("gate.", false);
      params_.set_trainable_prefix("ignd.", false);
      params_.set_trainable_prefix("local.", false);
      break;
  }
}

// ------------------------------------------------------------------ binding

namespace {

ModelBinding finish_binding(ad::Tape& tape, const MoeModel& model, const GraphOperators& ops, nn::Binding params) {
  if (ops.n() != model.n()) {
    throw Error(ErrorKind::DimensionMismatch, "model has " + std::to_string(model.n()) + " regions, graph has " +
                                                  std::to_string(ops.n()));
  }
  ModelBinding b;
  b.model = &model;
  b.ops = &ops;
  b.graph = MessageGraph::from(ops);
  b.params = std::move(params);
  b.k = ad::softplus(b.params["mech.k_raw"]);
  b.alpha = ad::softplus(b.params["mech.alpha_raw"]);
  b.v = model.config().learn_v ? ad::sigmoid(b.params["mech.v_raw"]) : tape.constant(ad::Matrix::Ones(model.n(), 1));
  b.c0 = ad::sigmoid(b.params["c0_raw"]);
  b.laplacian = tape.constant(ops.laplacian);
  return b;
}

bool neural_active(const ModelConfig& cfg) { return cfg.gate.mode != GateMode::Mechanistic; }

}  // namespace

ModelBinding bind_model(ad::Tape& tape, MoeModel& model, const GraphOperators& ops, bool differentiable) {
  nn::Binding params = differentiable ? nn::bind(tape, model.params()) : nn::bind_constants(tape, model.params());
  return finish_binding(tape, model, ops, std::move(params));
}

ModelBinding bind_model_constant(ad::Tape& tape, const MoeModel& model, const GraphOperators& ops) {
  return finish_binding(tape, model, ops, nn::bind_constants(tape, model.params()));
}

ad::Var gate_nodes(const ModelBinding& b, double t) {
  const ModelConfig& cfg = b.model->config();
  ad::Tape& tape = *b.c0.tape();
  if (cfg.gate.mode == GateMode::Mechanistic) {
    ad::Matrix fixed(1, 3);
    fixed << 1.0, 0.0, 0.0;
    return tape.constant(fixed);
  }
  ad::Var tau = tape.constant(t / cfg.horizon);
  return ad::softmax(nn::forward(cfg.gate.stack(), b.params, tau));
}

RhsNodes rhs_nodes(const ModelBinding& b, ad::Var c, double t) {
  const ModelConfig& cfg = b.model->config();
  ad::Tape& tape = *c.tape();
  const double tau = t / cfg.horizon;
  RhsNodes out;
  out.beta = gate_nodes(b, t);
  out.experts[0] = f_M(b.k, b.alpha, b.v, b.laplacian, c);
  const bool neural = neural_active(cfg);
  out.experts[1] = neural && cfg.enable_ignd ? ignd_forward(cfg.ignd, b.params, b.graph, c, tau).dcdt
                                             : tape.constant(ad::Matrix::Zero(c.rows(), 1));
  out.experts[2] = neural && cfg.enable_local ? local_forward(cfg.local, b.params, c, tau)
                                              : tape.constant(ad::Matrix::Zero(c.rows(), 1));
  if (!neural) {
    out.dcdt = out.experts[0];
    return out;
  }
  std::vector<ad::Var> terms;
  terms.push_back(ad::scale(out.experts[0], ad::element(out.beta, 0, 0)));
  if (cfg.enable_ignd) terms.push_back(ad::scale(out.experts[1], ad::element(out.beta, 0, 1)));
  if (cfg.enable_local) terms.push_back(ad::scale(out.experts[2], ad::element(out.beta, 0, 2)));
  out.dcdt = ad::sum(terms);
  return out;
}

TapeTrajectory integrate_nodes(const ModelBinding& b) {
  const ModelConfig& cfg = b.model->config();
  const int steps = cfg.grid_steps();
  TapeTrajectory traj;
  traj.step = cfg.step;
  traj.horizon = cfg.horizon;
  traj.states.reserve(static_cast<std::size_t>(steps) + 1);
  traj.grid_terms.reserve(static_cast<std::size_t>(steps) + 1);
  traj.states.push_back(b.c0);
  auto f = [&b](const ad::Var& x, double t) { return rhs_nodes(b, x, t).dcdt; };
  for (int k = 0; k < steps; ++k) {
    const double t = k * cfg.step;
    const ad::Var& x = traj.states.back();
    traj.grid_terms.push_back(rhs_nodes(b, x, t));
    ad::Var next = rk4_step<ad::Var>(f, x, traj.grid_terms.back().dcdt, t, cfg.step);
    if (!next.value().allFinite()) {
      throw Error(ErrorKind::NonFiniteState, "state became non-finite at step " + std::to_string(k + 1) + " (t=" +
                                                 std::to_string((k + 1) * cfg.step) + ")");
    }
    traj.states.push_back(next);
  }
  traj.grid_terms.push_back(rhs_nodes(b, traj.states.back(), steps * cfg.step));
  return traj;
}

// ------------------------------------------------------------- plain forms

Eigen::Vector3d eval_gate(const MoeModel& model, double t) {
  if (!std::isfinite(t)) throw Error(ErrorKind::NonFiniteInput, "gate time is not finite");
  ad::Tape tape;
  const nn::Binding params = nn::bind_constants(tape, model.params());
  const ModelConfig& cfg = model.config();
  if (cfg.gate.mode == GateMode::Mechanistic) return {1.0, 0.0, 0.0};
  ad::Var beta = ad::softmax(nn::forward(cfg.gate.stack(), params, tape.constant(t / cfg.horizon)));
  return beta.value().row(0).transpose();
}

RhsResult eval_rhs(const MoeModel& model, const GraphOperators& ops, const Eigen::VectorXd& c, double t) {
  if (c.size() != model.n()) throw Error(ErrorKind::DimensionMismatch, "state length mismatch");
  if (!c.allFinite()) throw Error(ErrorKind::NonFiniteInput, "state contains NaN or Inf");
  ad::Tape tape;
  const ModelBinding b = bind_model_constant(tape, model, ops);
  const RhsNodes nodes = rhs_nodes(b, tape.constant(c), t);
  RhsResult r;
  r.dcdt = nodes.dcdt.value().col(0);
  r.per_expert.resize(3, model.n());
  for (int j = 0; j < 3; ++j) r.per_expert.row(j) = nodes.beta.value()(0, j) * nodes.experts[j].value().col(0).transpose();
  return r;
}

Trajectory integrate(const MoeModel& model, const GraphOperators& ops, bool record_contributions) {
  ad::Tape tape;
  const ModelBinding b = bind_model_constant(tape, model, ops);
  const TapeTrajectory nodes = integrate_nodes(b);
  Trajectory traj;
  traj.step = nodes.step;
  traj.horizon = nodes.horizon;
  traj.states.resize(static_cast<Eigen::Index>(nodes.states.size()), model.n());
  for (std::size_t k = 0; k < nodes.states.size(); ++k) {
    traj.times.push_back(static_cast<double>(k) * nodes.step);
    traj.states.row(static_cast<Eigen::Index>(k)) = nodes.states[k].value().col(0).transpose();
    if (record_contributions) {
      const RhsNodes& g = nodes.grid_terms[k];
      Eigen::MatrixXd contrib(3, model.n());
      for (int j = 0; j < 3; ++j) contrib.row(j) = g.beta.value()(0, j) * g.experts[j].value().col(0).transpose();
      traj.contributions.push_back(std::move(contrib));
    }
  }
  return traj;
}

InterpolationWeights interpolation_weights(double t, double step, double horizon, std::size_t grid_len) {
  if (!std::isfinite(t) || t < -1e-12 || t > horizon + 1e-9) {
    std::ostringstream os;
    os << "time " << t << " outside [0, " << horizon << "]";
    throw Error(ErrorKind::OutOfWindow, os.str());
  }
  const double u = std::clamp(t, 0.0, horizon) / step;
  const double nearest = std::round(u);
  InterpolationWeights w;
  if (std::abs(u - nearest) <= 1e-9) {
    w.index = std::min(static_cast<std::size_t>(nearest), grid_len - 1);
    w.weight = 0.0;
    return w;
  }
  w.index = std::min(static_cast<std::size_t>(std::floor(u)), grid_len - 2);
  w.weight = u - static_cast<double>(w.index);
  return w;
}

Eigen::VectorXd predict_at(const Trajectory& traj, double t) {
  const auto w = interpolation_weights(t, traj.step, traj.horizon, traj.size());
  const auto k = static_cast<Eigen::Index>(w.index);
  if (w.weight == 0.0) return traj.states.row(k).transpose();
  return ((1.0 - w.weight) * traj.states.row(k) + w.weight * traj.states.row(k + 1)).transpose();
}

ad::Var predict_node(const TapeTrajectory& traj, double t) {
  const auto w = interpolation_weights(t, traj.step, traj.horizon, traj.states.size());
  if (w.weight == 0.0) return traj.states[w.index];
  return ad::add(ad::scale(traj.states[w.index], 1.0 - w.weight), ad::scale(traj.states[w.index + 1], w.weight));
}

}  // namespace progmoe
