#include "progmoe/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "progmoe/error.hpp"

namespace progmoe {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

double log_normal(double x, double mu, double var) {
  const double d = x - mu;
  return -0.5 * (kLog2Pi + std::log(var) + d * d / var);
}

GmmCutoff single_gaussian(const std::vector<double>& x) {
  const double n = static_cast<double>(x.size());
  const double mu = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double var = 0.0;
  for (double v : x) var += (v - mu) * (v - mu);
  const double sigma = std::sqrt(var / n);
  GmmCutoff g;
  g.mu_neg = g.mu_pos = mu;
  g.sigma_neg = g.sigma_pos = sigma;
  g.weight_neg = 1.0;
  g.cutoff = mu + sigma;
  g.degenerate = true;
  return g;
}

}  // namespace

GmmCutoff fit_gmm_cutoff(std::vector<double> x, const GmmOptions& opt) {
  if (x.size() < 20) throw Error(ErrorKind::InvalidConfig, "GMM cutoff needs at least 20 samples");
  for (double v : x) {
    if (!std::isfinite(v)) throw Error(ErrorKind::NonFiniteInput, "GMM sample is not finite");
  }
  std::sort(x.begin(), x.end());
  const std::size_t n = x.size();
  if (x.front() == x.back()) return single_gaussian(x);

  // k-means++ seeding: one uniform centre, the second drawn proportionally to D^2.
  std::mt19937_64 rng(opt.seed);
  const double c1 = x[std::uniform_int_distribution<std::size_t>(0, n - 1)(rng)];
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = (x[i] - c1) * (x[i] - c1);
  std::discrete_distribution<std::size_t> pick(d2.begin(), d2.end());
  const double c2 = x[pick(rng)];

  double mu[2] = {std::min(c1, c2), std::max(c1, c2)};
  double total_var = 0.0;
  {
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
    for (double v : x) total_var += (v - mean) * (v - mean);
    total_var /= static_cast<double>(n);
  }
  double var[2] = {std::max(total_var, opt.variance_floor), std::max(total_var, opt.variance_floor)};
  double w[2] = {0.5, 0.5};

  std::vector<double> r(n);  // responsibility of component 0
  double previous = -std::numeric_limits<double>::infinity();
  GmmCutoff g;
  for (int it = 1; it <= opt.max_iterations; ++it) {
    double ll = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double a = std::log(w[0]) + log_normal(x[i], mu[0], var[0]);
      const double b = std::log(w[1]) + log_normal(x[i], mu[1], var[1]);
      const double m = std::max(a, b);
      const double lse = m + std::log(std::exp(a - m) + std::exp(b - m));
      r[i] = std::exp(a - lse);
      ll += lse;
    }
    ll /= static_cast<double>(n);

    double n0 = 0.0, s0 = 0.0, s1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      n0 += r[i];
      s0 += r[i] * x[i];
      s1 += (1.0 - r[i]) * x[i];
    }
    const double n1 = static_cast<double>(n) - n0;
    if (n0 < 1e-8 * static_cast<double>(n) || n1 < 1e-8 * static_cast<double>(n)) return single_gaussian(x);
    mu[0] = s0 / n0;
    mu[1] = s1 / n1;
    double v0 = 0.0, v1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      v0 += r[i] * (x[i] - mu[0]) * (x[i] - mu[0]);
      v1 += (1.0 - r[i]) * (x[i] - mu[1]) * (x[i] - mu[1]);
    }
    var[0] = std::max(v0 / n0, opt.variance_floor);
    var[1] = std::max(v1 / n1, opt.variance_floor);
    w[0] = n0 / static_cast<double>(n);
    w[1] = n1 / static_cast<double>(n);

    g.iterations = it;
    if (std::abs(ll - previous) < opt.tolerance) {
      g.converged = true;
      break;
    }
    previous = ll;
  }

  const int neg = mu[0] <= mu[1] ? 0 : 1;
  const int pos = 1 - neg;
  if (!(mu[neg] < mu[pos])) return single_gaussian(x);
  g.mu_neg = mu[neg];
  g.sigma_neg = std::sqrt(var[neg]);
  g.mu_pos = mu[pos];
  g.sigma_pos = std::sqrt(var[pos]);
  g.weight_neg = w[neg];
  g.cutoff = g.mu_neg + g.sigma_neg;
  return g;
}

std::vector<GmmCutoff> fit_gmm_cutoffs(const Eigen::MatrixXd& samples, const GmmOptions& options) {
  std::vector<GmmCutoff> out;
  for (Eigen::Index c = 0; c < samples.cols(); ++c) {
    std::vector<double> column(samples.col(c).data(), samples.col(c).data() + samples.rows());
    out.push_back(fit_gmm_cutoff(std::move(column), options));
  }
  return out;
}

std::vector<PositivitySummary> positivity_summary(const Cohort& cohort, const std::vector<GmmCutoff>& cutoffs) {
  std::vector<PositivitySummary> out;
  for (const auto& s : cohort) {
    if (static_cast<std::size_t>(s.observations.cols()) != cutoffs.size()) {
      throw Error(ErrorKind::DimensionMismatch, "subject '" + s.id + "' region count differs from the cutoffs");
    }
    PositivitySummary p;
    p.subject_id = s.id;
    for (Eigen::Index k = 0; k < s.observations.rows(); ++k) {
      int count = 0;
      for (Eigen::Index c = 0; c < s.observations.cols(); ++c) {
        if (s.observations(k, c) > cutoffs[static_cast<std::size_t>(c)].cutoff) ++count;
      }
      p.positive_regions.push_back(count);
      p.any_positive = p.any_positive || count > 0;
    }
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace progmoe
