#pragma once

#include <Eigen/Dense>

#include <utility>
#include <vector>

#include "progmoe/alignment.hpp"
#include "progmoe/moe.hpp"

namespace progmoe {

/// Sum over all entries of (pred - obs)^2.
double sse(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& obs);

struct PearsonSummary {
  double mean = 0.0;  // NaN when every row was skipped
  std::size_t used = 0;
  std::size_t skipped = 0;
};

/// Per-row Pearson r across regions (population moments), averaged over rows.
/// Rows where either side has zero variance are skipped and counted.
PearsonSummary mean_pearson(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& obs);

/// Predictions and observations of every placed scan, one row per scan.
struct PlacedScans {
  Eigen::MatrixXd pred;
  Eigen::MatrixXd obs;
  std::vector<double> times;
};

/// Matches placements to subjects by id; subjects without a placement are ignored.
PlacedScans collect_scans(const Trajectory& traj, const std::vector<Placement>& placements, const Cohort& cohort);

struct ErrorMap {
  std::vector<std::pair<double, double>> bins;  // [lo, hi); the last bin also holds T
  Eigen::MatrixXd mse;                          // bins x regions; NaN for empty bins
  std::vector<std::size_t> counts;
};

/// Mean squared residual per region inside equal-width pseudo-time bins over [0, T].
ErrorMap regional_error_map(const Trajectory& traj, const std::vector<Placement>& placements, const Cohort& cohort,
                            int bins);

}  // namespace progmoe
