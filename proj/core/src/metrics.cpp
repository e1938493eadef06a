#include "progmoe/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace progmoe {

double sse(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& obs) {
  if (pred.rows() != obs.rows() || pred.cols() != obs.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "sse: prediction and observation shapes differ");
  }
  return (pred - obs).squaredNorm();
}

PearsonSummary mean_pearson(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& obs) {
  if (pred.rows() != obs.rows() || pred.cols() != obs.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "mean_pearson: prediction and observation shapes differ");
  }
  PearsonSummary out;
  double total = 0.0;
  for (Eigen::Index r = 0; r < pred.rows(); ++r) {
    const Eigen::RowVectorXd x = pred.row(r).array() - pred.row(r).mean();
    const Eigen::RowVectorXd y = obs.row(r).array() - obs.row(r).mean();
    const double vx = x.squaredNorm();
    const double vy = y.squaredNorm();
    if (vx <= 1e-300 || vy <= 1e-300) {
      ++out.skipped;
      continue;
    }
    total += std::clamp(x.dot(y) / std::sqrt(vx * vy), -1.0, 1.0);
    ++out.used;
  }
  out.mean = out.used > 0 ? total / static_cast<double>(out.used) : std::numeric_limits<double>::quiet_NaN();
  return out;
}

PlacedScans collect_scans(const Trajectory& traj, const std::vector<Placement>& placements, const Cohort& cohort) {
  std::map<std::string, const Subject*> by_id;
  for (const auto& s : cohort) by_id[s.id] = &s;
  std::size_t rows = 0;
  for (const auto& p : placements) {
    auto it = by_id.find(p.subject_id);
    if (it != by_id.end()) rows += it->second->scans();
  }
  PlacedScans out;
  out.pred.resize(static_cast<Eigen::Index>(rows), traj.n());
  out.obs.resize(static_cast<Eigen::Index>(rows), traj.n());
  Eigen::Index row = 0;
  for (const auto& p : placements) {
    auto it = by_id.find(p.subject_id);
    if (it == by_id.end()) continue;
    const Subject& s = *it->second;
    for (std::size_t k = 0; k < s.scans(); ++k) {
      const double t = p.t0 + s.gaps[k];
      out.pred.row(row) = predict_at(traj, t).transpose();
      out.obs.row(row) = s.observations.row(static_cast<Eigen::Index>(k));
      out.times.push_back(t);
      ++row;
    }
  }
  return out;
}

ErrorMap regional_error_map(const Trajectory& traj, const std::vector<Placement>& placements, const Cohort& cohort,
                            int bins) {
  if (bins < 1) throw Error(ErrorKind::InvalidConfig, "error map needs at least one bin");
  const PlacedScans scans = collect_scans(traj, placements, cohort);
  const double width = traj.horizon / bins;
  ErrorMap map;
  for (int b = 0; b < bins; ++b) map.bins.emplace_back(b * width, b + 1 == bins ? traj.horizon : (b + 1) * width);
  Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(bins, traj.n());
  map.counts.assign(static_cast<std::size_t>(bins), 0);
  for (Eigen::Index r = 0; r < scans.pred.rows(); ++r) {
    const double t = scans.times[static_cast<std::size_t>(r)];
    const int b = std::clamp(static_cast<int>(std::floor(t / width)), 0, bins - 1);
    sums.row(b) += (scans.pred.row(r) - scans.obs.row(r)).array().square().matrix();
    ++map.counts[static_cast<std::size_t>(b)];
  }
  map.mse.resize(bins, traj.n());
  for (int b = 0; b < bins; ++b) {
    const auto count = map.counts[static_cast<std::size_t>(b)];
    if (count == 0) {
      map.mse.row(b).setConstant(std::numeric_limits<double>::quiet_NaN());
    } else {
      map.mse.row(b) = sums.row(b) / static_cast<double>(count);
    }
  }
  return map;
}

}  // namespace progmoe
