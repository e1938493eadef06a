#pragma once

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <vector>

#include "progmoe/error.hpp"
#include "progmoe/moe.hpp"

namespace progmoe {

/// One participant: scans at known offsets from baseline, unknown baseline time.
struct Subject {
  std::string id;
  std::vector<double> gaps;       // gaps[0] == 0, strictly increasing
  Eigen::MatrixXd observations;   // scans x regions, values in [0, 1]

  std::size_t scans() const { return gaps.size(); }
  /// Throws InvalidSubject when an invariant is violated.
  void validate(Eigen::Index n) const;
};

using Cohort = std::vector<Subject>;

struct Placement {
  std::string subject_id;
  double t0 = 0.0;
  double sse = 0.0;
};

/// Sum of squared residuals of `s` placed with baseline at t0.
double placement_sse(const Trajectory& traj, const Subject& s, double t0);

/// Golden-section minimization on [lo, hi] until the bracket is narrower than `tol`.
/// Returns the abscissa of the best point evaluated.
double golden_section_minimize(const std::function<double(double)>& f, double lo, double hi, double tol);

/// Global grid scan at resolution h/2 over [0, T - gaps.back()], then golden
/// refinement around the best grid point. Ties go to the smallest t0.
Placement align_subject(const Trajectory& traj, const Subject& s);

struct AlignmentFailure {
  std::size_t index = 0;
  std::string subject_id;
  ErrorKind kind = ErrorKind::InvalidSubject;
  std::string message;
};

struct CohortAlignment {
  /// Successful placements, in input order.
  std::vector<Placement> placements;
  std::vector<AlignmentFailure> failures;
};

/// Aligns every subject independently. With threads > 1 subjects are split
/// into contiguous blocks; results are written by index, so the output is
/// identical to the sequential run.
CohortAlignment align_cohort(const Trajectory& traj, const Cohort& cohort, int threads = 1);

}  // namespace progmoe
