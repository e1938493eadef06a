#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "progmoe/alignment.hpp"

namespace progmoe {

struct GmmOptions {
  int max_iterations = 500;
  double tolerance = 1e-8;  // on the mean log-likelihood per sample
  double variance_floor = 1e-6;
  std::uint64_t seed = 0;  // k-means++ seeding
};

/// Two-component fit of one region. The component with the smaller mean is negative.
struct GmmCutoff {
  double mu_neg = 0.0;
  double sigma_neg = 0.0;
  double mu_pos = 0.0;
  double sigma_pos = 0.0;
  double weight_neg = 0.0;
  double cutoff = 0.0;  // mu_neg + sigma_neg
  int iterations = 0;
  bool converged = false;
  /// EM collapsed; cutoff is the single-Gaussian mu + sigma.
  bool degenerate = false;
};

/// Needs at least 20 finite samples. The samples are sorted first, so the
/// result does not depend on their order.
GmmCutoff fit_gmm_cutoff(std::vector<double> values, const GmmOptions& options = {});

/// One fit per column of `samples` (rows = observations).
std::vector<GmmCutoff> fit_gmm_cutoffs(const Eigen::MatrixXd& samples, const GmmOptions& options = {});

struct PositivitySummary {
  std::string subject_id;
  /// Per scan, the number of regions above their cutoff.
  std::vector<int> positive_regions;
  bool any_positive = false;
};

std::vector<PositivitySummary> positivity_summary(const Cohort& cohort, const std::vector<GmmCutoff>& cutoffs);

}  // namespace progmoe
