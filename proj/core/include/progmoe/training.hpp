#pragma once

// Loss terms, the Adam optimizer and the alternating fit loop:
//   temporal initialization -> (trajectory epochs -> re-alignment)* -> test evaluation.

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "progmoe/alignment.hpp"
#include "progmoe/autodiff.hpp"
#include "progmoe/graph.hpp"
#include "progmoe/metrics.hpp"
#include "progmoe/moe.hpp"

namespace progmoe {

/// Where the orthogonality penalty samples the experts.
enum class OrthoPoints {
  Observations,  // pseudo-times of the placed training scans, on the predicted state
  Grid,          // every integration grid point
};

OrthoPoints parse_ortho_points(const std::string& name);
std::string to_string(OrthoPoints p);

struct TrainConfig {
  double lambda1 = 1e-2;
  double lambda2 = 1e-3;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int inner_epochs = 20;
  int max_outer_iters = 50;
  double convergence_tol = 1e-4;
  int patience = 5;  // consecutive outer iterations below tolerance
  std::uint64_t seed = 0;
  int val_size = 35;
  int test_size = 35;
  OrthoPoints ortho_points = OrthoPoints::Observations;
  bool freeze_mechanistic = false;
  int threads = 1;
  bool deterministic = true;
  int error_map_bins = 4;

  void validate() const;
  int effective_threads() const { return deterministic ? 1 : threads; }
};

// ------------------------------------------------------------------ losses

/// Pairs each placement with its subject (matched by id).
struct PlacedSubject {
  const Subject* subject = nullptr;
  double t0 = 0.0;
};
std::vector<PlacedSubject> pair_placements(const std::vector<Placement>& placements, const Cohort& cohort);

struct LossNodes {
  ad::Var total;
  ad::Var traj;
  ad::Var norm;
  ad::Var ortho;
};

struct LossValues {
  double total = 0.0;
  double traj = 0.0;
  double norm = 0.0;
  double ortho = 0.0;
};

/// L = L_traj + lambda1 L_norm + lambda2 L_ortho on a tape trajectory.
LossNodes loss_nodes(const ModelBinding& b, const TapeTrajectory& traj, const std::vector<PlacedSubject>& placed,
                     const TrainConfig& cfg);

/// Forward-only evaluation of the same terms.
LossValues evaluate_loss(const MoeModel& model, const GraphOperators& ops, const std::vector<Placement>& placements,
                         const Cohort& cohort, const TrainConfig& cfg);

/// Sum of squared residuals of all placed scans against a dense trajectory.
double loss_traj(const Trajectory& traj, const std::vector<Placement>& placements, const Cohort& cohort);

/// sqrt of the sum of squares over a stack of expert outputs.
double frobenius(const std::vector<Eigen::VectorXd>& outputs);
ad::Var frobenius_node(const std::vector<ad::Var>& outputs);

/// sum_t sum_{p != q} (f~_p(t) . f~_q(t))^2 with f~ centred by the mean over points.
double ortho_penalty(const std::vector<std::array<Eigen::VectorXd, 3>>& outputs);
ad::Var ortho_penalty_node(const std::vector<std::array<ad::Var, 3>>& outputs);

// --------------------------------------------------------------- optimizer

/// Adam over the trainable entries of a ParamStore.
class Adam {
 public:
  Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  /// Throws Diverged when a trainable gradient is not finite; parameters are untouched then.
  void step(ad::ParamStore& params);
  int steps() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  int t_ = 0;
  std::vector<ad::Matrix> m_, v_;
};

// ----------------------------------------------------------------- fitting

struct EpochRecord {
  LossValues train;  // before the optimizer step
  double val_traj = 0.0;
};

struct OuterRecord {
  int iteration = 0;
  std::vector<EpochRecord> epochs;
  double first_epoch_train_traj = 0.0;
  /// Training L_traj after re-alignment at the end of the iteration.
  double aligned_train_traj = 0.0;
  double val_traj = 0.0;
};

struct FitReport {
  std::vector<OuterRecord> history;
  bool converged = false;
  int best_outer = -1;
  int best_epoch = -1;
  double best_val_traj = 0.0;

  std::vector<std::string> train_ids;
  std::vector<std::string> val_ids;
  std::vector<std::string> test_ids;
  std::vector<Placement> train_placements;
  std::vector<Placement> val_placements;
  std::vector<Placement> test_placements;
  std::vector<AlignmentFailure> failures;

  double test_sse = 0.0;
  PearsonSummary test_pearson;
  std::size_t test_scans = 0;

  double k = 0.0;
  double alpha = 0.0;
  std::vector<double> gate_times;
  Eigen::MatrixXd gate;  // grid_len x 3
  ErrorMap error_map;
};

struct FitResult {
  MoeModel model;
  FitReport report;
};

using FitObserver = std::function<void(const OuterRecord&)>;

/// Deterministic random split: test ids first, then validation, rest training.
struct Split {
  std::vector<std::size_t> train, val, test;
};
Split split_cohort(std::size_t count, int val_size, int test_size, std::uint64_t seed);

FitResult fit(const Cohort& cohort, const Connectome& connectome, const ModelConfig& model_cfg,
              const TrainConfig& train_cfg, const FitObserver& observer = {});

/// Gate weights on the integration grid (grid_len x 3).
Eigen::MatrixXd gate_curve(const MoeModel& model, std::vector<double>* times = nullptr);

}  // namespace progmoe
