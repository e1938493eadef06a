#include "progmoe/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <tuple>

#include "progmoe/error.hpp"

namespace progmoe {

OrthoPoints parse_ortho_points(const std::string& name) {
  if (name == "observations") return OrthoPoints::Observations;
  if (name == "grid") return OrthoPoints::Grid;
  throw Error(ErrorKind::InvalidConfig, "unknown ortho point set '" + name + "' (expected observations|grid)");
}

std::string to_string(OrthoPoints p) { return p == OrthoPoints::Observations ? "observations" : "grid"; }

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorKind::InvalidConfig, what); };
  if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0)) fail("lambda1 and lambda2 must be >= 0");
  if (!(learning_rate > 0.0)) fail("learning_rate must be > 0");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    fail("Adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) fail("adam_eps must be > 0");
  if (inner_epochs < 1 || max_outer_iters < 1) fail("inner_epochs and max_outer_iters must be >= 1");
  if (!(convergence_tol >= 0.0)) fail("convergence_tol must be >= 0");
  if (patience < 1) fail("patience must be >= 1");
  if (val_size < 0 || test_size < 0) fail("split sizes must be >= 0");
  if (threads < 1) fail("threads must be >= 1");
  if (error_map_bins < 1) fail("error_map_bins must be >= 1");
}

// ------------------------------------------------------------------ losses

std::vector<PlacedSubject> pair_placements(const std::vector<Placement>& placements, const Cohort& cohort) {
  std::map<std::string, const Subject*> by_id;
  for (const auto& s : cohort) by_id[s.id] = &s;
  std::vector<PlacedSubject> out;
  out.reserve(placements.size());
  for (const auto& p : placements) {
    auto it = by_id.find(p.subject_id);
    if (it == by_id.end()) throw Error(ErrorKind::InvalidSubject, "placement for unknown subject '" + p.subject_id + "'");
    out.push_back({it->second, p.t0});
  }
  return out;
}

double frobenius(const std::vector<Eigen::VectorXd>& outputs) {
  double total = 0.0;
  for (const auto& f : outputs) total += f.squaredNorm();
  return std::sqrt(total);
}

ad::Var frobenius_node(const std::vector<ad::Var>& outputs) {
  std::vector<ad::Var> squares;
  squares.reserve(outputs.size());
  for (const auto& f : outputs) squares.push_back(ad::dot(f, f));
  return ad::sqrt(ad::sum(squares));
}

double ortho_penalty(const std::vector<std::array<Eigen::VectorXd, 3>>& outputs) {
  if (outputs.empty()) return 0.0;
  std::array<Eigen::VectorXd, 3> mean;
  for (int p = 0; p < 3; ++p) {
    mean[p] = Eigen::VectorXd::Zero(outputs.front()[p].size());
    for (const auto& o : outputs) mean[p] += o[p];
    mean[p] /= static_cast<double>(outputs.size());
  }
  double total = 0.0;
  for (const auto& o : outputs) {
    for (int p = 0; p < 3; ++p) {
      for (int q = p + 1; q < 3; ++q) {
        const double d = (o[p] - mean[p]).dot(o[q] - mean[q]);
        total += 2.0 * d * d;
      }
    }
  }
  return total;
}

ad::Var ortho_penalty_node(const std::vector<std::array<ad::Var, 3>>& outputs) {
  if (outputs.empty()) throw Error(ErrorKind::ShapeMismatch, "ortho penalty needs at least one point");
  const double inv = 1.0 / static_cast<double>(outputs.size());
  std::array<ad::Var, 3> mean;
  for (int p = 0; p < 3; ++p) {
    std::vector<ad::Var> column;
    for (const auto& o : outputs) column.push_back(o[p]);
    mean[p] = ad::scale(ad::sum(column), inv);
  }
  std::vector<ad::Var> terms;
  for (const auto& o : outputs) {
    std::array<ad::Var, 3> centred;
    for (int p = 0; p < 3; ++p) centred[p] = ad::sub(o[p], mean[p]);
    for (int p = 0; p < 3; ++p) {
      for (int q = p + 1; q < 3; ++q) {
        const ad::Var d = ad::dot(centred[p], centred[q]);
        terms.push_back(ad::scale(ad::hadamard(d, d), 2.0));  // p != q counts both orders
      }
    }
  }
  return ad::sum(terms);
}

LossNodes loss_nodes(const ModelBinding& b, const TapeTrajectory& traj, const std::vector<PlacedSubject>& placed,
                     const TrainConfig& cfg) {
  ad::Tape& tape = *b.c0.tape();
  const ModelConfig& mcfg = b.model->config();
  LossNodes out;

  std::vector<ad::Var> residuals;
  std::vector<double> obs_times;
  for (const auto& p : placed) {
    const Subject& s = *p.subject;
    for (std::size_t k = 0; k < s.scans(); ++k) {
      const double t = p.t0 + s.gaps[k];
      const ad::Var obs = tape.constant(s.observations.row(static_cast<Eigen::Index>(k)).transpose());
      const ad::Var diff = ad::sub(predict_node(traj, t), obs);
      residuals.push_back(ad::dot(diff, diff));
      obs_times.push_back(t);
    }
  }
  out.traj = residuals.empty() ? tape.constant(0.0) : ad::sum(residuals);

  const bool neural = mcfg.gate.mode != GateMode::Mechanistic;
  if (neural) {
    std::vector<ad::Var> f_s, f_l;
    for (const auto& g : traj.grid_terms) {
      f_s.push_back(g.experts[1]);
      f_l.push_back(g.experts[2]);
    }
    out.norm = ad::add(frobenius_node(f_s), frobenius_node(f_l));

    std::vector<std::array<ad::Var, 3>> points;
    if (cfg.ortho_points == OrthoPoints::Grid) {
      for (const auto& g : traj.grid_terms) points.push_back(g.experts);
    } else {
      for (double t : obs_times) points.push_back(rhs_nodes(b, predict_node(traj, t), t).experts);
    }
    out.ortho = points.empty() ? tape.constant(0.0) : ortho_penalty_node(points);
  } else {
    out.norm = tape.constant(0.0);
    out.ortho = tape.constant(0.0);
  }

  out.total = ad::add(ad::add(out.traj, ad::scale(out.norm, cfg.lambda1)), ad::scale(out.ortho, cfg.lambda2));
  return out;
}

LossValues evaluate_loss(const MoeModel& model, const GraphOperators& ops, const std::vector<Placement>& placements,
                         const Cohort& cohort, const TrainConfig& cfg) {
  ad::Tape tape;
  const ModelBinding b = bind_model_constant(tape, model, ops);
  const TapeTrajectory traj = integrate_nodes(b);
  const LossNodes n = loss_nodes(b, traj, pair_placements(placements, cohort), cfg);
  return {n.total.scalar(), n.traj.scalar(), n.norm.scalar(), n.ortho.scalar()};
}

double loss_traj(const Trajectory& traj, const std::vector<Placement>& placements, const Cohort& cohort) {
  double total = 0.0;
  for (const auto& p : pair_placements(placements, cohort)) total += placement_sse(traj, *p.subject, p.t0);
  return total;
}

// --------------------------------------------------------------- optimizer

void Adam::step(ad::ParamStore& params) {
  if (m_.empty()) {
    for (const auto& e : params.entries()) {
      m_.push_back(ad::Matrix::Zero(e.value.rows(), e.value.cols()));
      v_.push_back(ad::Matrix::Zero(e.value.rows(), e.value.cols()));
    }
  }
  if (m_.size() != params.size()) throw Error(ErrorKind::ShapeMismatch, "Adam: parameter layout changed");
  for (const auto& e : params.entries()) {
    if (e.trainable && !e.grad.allFinite()) throw Error(ErrorKind::Diverged, "non-finite gradient for '" + e.name + "'");
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, t_);
  const double c2 = 1.0 - std::pow(beta2_, t_);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& e = params.entry(i);
    if (!e.trainable) continue;
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * e.grad;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * e.grad.cwiseProduct(e.grad);
    e.value.array() -= lr_ * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
  }
}

// ----------------------------------------------------------------- fitting

Split split_cohort(std::size_t count, int val_size, int test_size, std::uint64_t seed) {
  const auto held = static_cast<std::size_t>(val_size) + static_cast<std::size_t>(test_size);
  if (held + 1 > count) {
    throw Error(ErrorKind::InvalidConfig, "split sizes " + std::to_string(val_size) + "+" + std::to_string(test_size) +
                                              " leave no training subjects out of " + std::to_string(count));
  }
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed ^ 0x5eed5eedULL);
  // Fisher-Yates with explicit draws so the split does not depend on the library's shuffle.
  for (std::size_t i = count; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(order[i - 1], order[j]);
  }
  Split s;
  const auto test_n = static_cast<std::size_t>(test_size);
  const auto val_n = static_cast<std::size_t>(val_size);
  s.test.assign(order.begin(), order.begin() + static_cast<long>(test_n));
  s.val.assign(order.begin() + static_cast<long>(test_n), order.begin() + static_cast<long>(test_n + val_n));
  s.train.assign(order.begin() + static_cast<long>(test_n + val_n), order.end());
  for (auto* part : {&s.train, &s.val, &s.test}) std::sort(part->begin(), part->end());
  return s;
}

Eigen::MatrixXd gate_curve(const MoeModel& model, std::vector<double>* times) {
  const int steps = model.config().grid_steps();
  Eigen::MatrixXd out(steps + 1, 3);
  if (times) times->clear();
  for (int k = 0; k <= steps; ++k) {
    const double t = k * model.config().step;
    out.row(k) = eval_gate(model, t).transpose();
    if (times) times->push_back(t);
  }
  return out;
}

namespace {

Cohort subset(const Cohort& cohort, const std::vector<std::size_t>& idx) {
  Cohort out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(cohort[i]);
  return out;
}

Trajectory integrate_or_diverge(const MoeModel& model, const GraphOperators& ops) {
  try {
    return integrate(model, ops);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::NonFiniteState) throw Error(ErrorKind::Diverged, e.what());
    throw;
  }
}

double placement_total(const std::vector<Placement>& placements) {
  double total = 0.0;
  for (const auto& p : placements) total += p.sse;
  return total;
}

std::vector<Placement> align_all_or_throw(const Trajectory& traj, const Cohort& cohort, int threads) {
  CohortAlignment a = align_cohort(traj, cohort, threads);
  if (!a.failures.empty()) throw Error(a.failures.front().kind, a.failures.front().message);
  return std::move(a.placements);
}

}  // namespace

FitResult fit(const Cohort& cohort, const Connectome& connectome, const ModelConfig& model_cfg,
              const TrainConfig& cfg, const FitObserver& observer) {
  cfg.validate();
  if (cohort.size() < 3) throw Error(ErrorKind::InvalidConfig, "fit needs at least 3 subjects");
  const Eigen::Index n = connectome.n();
  model_cfg.validate(n);
  for (const auto& s : cohort) s.validate(n);
  const GraphOperators ops = build_operators(connectome);
  const int threads = cfg.effective_threads();

  const Split split = split_cohort(cohort.size(), cfg.val_size, cfg.test_size, cfg.seed);
  const Cohort train = subset(cohort, split.train);
  Cohort val, test;
  FitReport report;
  for (auto i : split.train) report.train_ids.push_back(cohort[i].id);
  // Held-out subjects that cannot fit the window are reported and skipped.
  for (auto [idx, out, ids] : {std::tuple{&split.val, &val, &report.val_ids}, std::tuple{&split.test, &test, &report.test_ids}}) {
    for (auto i : *idx) {
      ids->push_back(cohort[i].id);
      if (cohort[i].gaps.back() > model_cfg.horizon + 1e-12) {
        report.failures.push_back({i, cohort[i].id, ErrorKind::InfeasibleWindow, "subject spans more than the horizon"});
      } else {
        out->push_back(cohort[i]);
      }
    }
  }

  MoeModel model = MoeModel::create(model_cfg, n, cfg.seed);
  if (cfg.freeze_mechanistic) model.params().set_trainable_prefix("mech.", false);

  // Step 1: place training subjects on the mechanistic prior.
  ModelConfig prior_cfg = model_cfg;
  prior_cfg.gate.mode = GateMode::Mechanistic;
  prior_cfg.enable_ignd = false;
  prior_cfg.enable_local = false;
  const MoeModel prior = MoeModel::create(prior_cfg, n, cfg.seed);
  std::vector<Placement> placements = align_all_or_throw(integrate_or_diverge(prior, ops), train, threads);

  Adam adam(cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
  ad::Vector best_params = model.params().flatten();
  std::vector<Placement> best_placements = placements;
  double best_metric = std::numeric_limits<double>::infinity();
  double previous = std::numeric_limits<double>::quiet_NaN();
  int stable = 0;

  for (int outer = 0; outer < cfg.max_outer_iters; ++outer) {
    OuterRecord rec;
    rec.iteration = outer;
    const std::vector<PlacedSubject> placed = pair_placements(placements, train);
    Trajectory current;
    for (int epoch = 0; epoch < cfg.inner_epochs; ++epoch) {
      EpochRecord er;
      {
        ad::Tape tape;
        const ModelBinding b = bind_model(tape, model, ops, true);
        TapeTrajectory tt;
        try {
          tt = integrate_nodes(b);
        } catch (const Error& e) {
          if (e.kind() == ErrorKind::NonFiniteState) throw Error(ErrorKind::Diverged, e.what());
          throw;
        }
        const LossNodes loss = loss_nodes(b, tt, placed, cfg);
        er.train = {loss.total.scalar(), loss.traj.scalar(), loss.norm.scalar(), loss.ortho.scalar()};
        if (!std::isfinite(er.train.total)) {
          throw Error(ErrorKind::Diverged, "loss became non-finite at outer " + std::to_string(outer) + ", epoch " +
                                               std::to_string(epoch));
        }
        model.params().zero_grad();
        tape.backward(loss.total);
      }
      adam.step(model.params());

      current = integrate_or_diverge(model, ops);
      if (!val.empty()) {
        er.val_traj = placement_total(align_all_or_throw(current, val, threads));
      } else {
        er.val_traj = loss_traj(current, placements, train);
      }
      if (er.val_traj < best_metric) {
        best_metric = er.val_traj;
        best_params = model.params().flatten();
        best_placements = placements;
        report.best_outer = outer;
        report.best_epoch = epoch;
      }
      rec.epochs.push_back(er);
    }
    rec.first_epoch_train_traj = rec.epochs.front().train.traj;
    rec.val_traj = rec.epochs.back().val_traj;

    // Step 3: re-place training subjects on the updated trajectory.
    placements = align_all_or_throw(current, train, threads);
    rec.aligned_train_traj = placement_total(placements);
    report.history.push_back(rec);
    if (observer) observer(rec);

    if (std::isfinite(previous)) {
      const double rel = std::abs(rec.val_traj - previous) / std::max(std::abs(previous), 1e-300);
      stable = rel < cfg.convergence_tol ? stable + 1 : 0;
    }
    previous = rec.val_traj;
    if (stable >= cfg.patience) {
      report.converged = true;
      break;
    }
  }

  model.params().unflatten(best_params);
  report.best_val_traj = best_metric;
  report.train_placements = best_placements;

  const Trajectory final_traj = integrate_or_diverge(model, ops);
  const CohortAlignment val_a = align_cohort(final_traj, val, threads);
  const CohortAlignment test_a = align_cohort(final_traj, test, threads);
  report.val_placements = val_a.placements;
  report.test_placements = test_a.placements;
  for (const auto* a : {&val_a, &test_a}) {
    for (const auto& f : a->failures) report.failures.push_back(f);
  }

  const PlacedScans scans = collect_scans(final_traj, report.test_placements, test);
  report.test_sse = sse(scans.pred, scans.obs);
  report.test_pearson = mean_pearson(scans.pred, scans.obs);
  report.test_scans = static_cast<std::size_t>(scans.pred.rows());

  const MechanisticParams mech = model.mechanistic();
  report.k = mech.k();
  report.alpha = mech.alpha();
  report.gate = gate_curve(model, &report.gate_times);

  std::vector<Placement> all = report.train_placements;
  all.insert(all.end(), report.val_placements.begin(), report.val_placements.end());
  all.insert(all.end(), report.test_placements.begin(), report.test_placements.end());
  report.error_map = regional_error_map(final_traj, all, cohort, cfg.error_map_bins);

  return {std::move(model), std::move(report)};
}

}  // namespace progmoe
