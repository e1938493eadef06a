#include "progmoe/alignment.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <thread>

namespace progmoe {

void Subject::validate(Eigen::Index n) const {
  auto fail = [this](const std::string& what) { throw Error(ErrorKind::InvalidSubject, "subject '" + id + "': " + what); };
  if (gaps.empty()) fail("no scans");
  if (gaps.front() != 0.0) fail("gaps[0] must be 0");
  for (std::size_t s = 1; s < gaps.size(); ++s) {
    if (!(gaps[s] > gaps[s - 1])) fail("gaps must be strictly increasing");
  }
  if (observations.rows() != static_cast<Eigen::Index>(gaps.size())) fail("one observation row per gap required");
  if (observations.cols() != n) {
    fail("observations have " + std::to_string(observations.cols()) + " regions, expected " + std::to_string(n));
  }
  if (!observations.allFinite()) fail("non-finite observation");
  if (observations.minCoeff() < 0.0 || observations.maxCoeff() > 1.0) fail("observations must lie in [0, 1]");
}

double placement_sse(const Trajectory& traj, const Subject& s, double t0) {
  double total = 0.0;
  for (std::size_t k = 0; k < s.gaps.size(); ++k) {
    const Eigen::VectorXd pred = predict_at(traj, t0 + s.gaps[k]);
    total += (s.observations.row(static_cast<Eigen::Index>(k)).transpose() - pred).squaredNorm();
  }
  return total;
}

double golden_section_minimize(const std::function<double(double)>& f, double lo, double hi, double tol) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo;
  double b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c);
  double fd = f(d);
  while (b - a > tol) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  const double mid = 0.5 * (a + b);
  const double fm = f(mid);
  if (fm <= fc && fm <= fd) return mid;
  return fc <= fd ? c : d;
}

Placement align_subject(const Trajectory& traj, const Subject& s) {
  s.validate(traj.n());
  const double latest = traj.horizon - s.gaps.back();
  if (latest < -1e-12) {
    std::ostringstream os;
    os << "subject '" << s.id << "' spans " << s.gaps.back() << " > horizon " << traj.horizon;
    throw Error(ErrorKind::InfeasibleWindow, os.str());
  }
  const double t_max = std::max(latest, 0.0);
  const double res = 0.5 * traj.step;
  auto objective = [&](double t0) { return placement_sse(traj, s, t0); };

  const auto count = static_cast<long>(std::floor(t_max / res + 1e-9));
  double best_t = 0.0;
  double best_sse = objective(0.0);
  for (long i = 1; i <= count; ++i) {
    const double t0 = std::min(static_cast<double>(i) * res, t_max);
    const double v = objective(t0);
    if (v < best_sse) {
      best_sse = v;
      best_t = t0;
    }
  }
  if (t_max - static_cast<double>(count) * res > 1e-12) {
    const double v = objective(t_max);
    if (v < best_sse) {
      best_sse = v;
      best_t = t_max;
    }
  }

  const double lo = std::max(0.0, best_t - res);
  const double hi = std::min(t_max, best_t + res);
  if (hi > lo) {
    const double refined = golden_section_minimize(objective, lo, hi, 1e-4);
    const double v = objective(refined);
    // Only accept a strict improvement so the result never loses to a grid point.
    if (v < best_sse) {
      best_sse = v;
      best_t = refined;
    }
  }
  return {s.id, best_t, best_sse};
}

CohortAlignment align_cohort(const Trajectory& traj, const Cohort& cohort, int threads) {
  const std::size_t count = cohort.size();
  std::vector<std::optional<Placement>> placed(count);
  std::vector<std::optional<AlignmentFailure>> failed(count);

  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      try {
        placed[i] = align_subject(traj, cohort[i]);
      } catch (const Error& e) {
        failed[i] = AlignmentFailure{i, cohort[i].id, e.kind(), e.what()};
      }
    }
  };

  const std::size_t workers = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), 1, std::max<std::size_t>(count, 1));
  if (workers == 1) {
    work(0, count);
  } else {
    std::vector<std::thread> pool;
    const std::size_t block = (count + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t begin = w * block;
      const std::size_t end = std::min(count, begin + block);
      if (begin < end) pool.emplace_back(work, begin, end);
    }
    for (auto& t : pool) t.join();
  }

  CohortAlignment out;
  for (std::size_t i = 0; i < count; ++i) {
    if (placed[i]) out.placements.push_back(*placed[i]);
    if (failed[i]) out.failures.push_back(*failed[i]);
  }
  return out;
}

}  // namespace progmoe
