#include "pvsizing/lognormal_sum.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "pvsizing/errors.hpp"

namespace pvsizing {

double LognormalParams::mean() const { return std::exp(log_mean + 0.5 * log_var); }

double LognormalParams::second_moment() const {
  return std::exp(2.0 * log_mean + 2.0 * log_var);
}

double LognormalParams::variance() const {
  return std::expm1(log_var) * std::exp(2.0 * log_mean + log_var);
}

double LognormalParams::log_pdf(double x) const {
  if (!(x > 0.0)) return -std::numeric_limits<double>::infinity();
  const double lx = std::log(x);
  const double z = lx - log_mean;
  return -lx - 0.5 * std::log(2.0 * std::numbers::pi * log_var) -
         z * z / (2.0 * log_var);
}

LognormalParams LognormalParams::from_moments(double mean, double second_moment) {
  if (!(mean > 0.0)) throw NumericalError("lognormal moment match needs mean > 0");
  // ratio >= 1 by Jensen; rounding may push it a hair below.
  const double ratio = std::max(second_moment / (mean * mean), 1.0);
  LognormalParams p;
  p.log_var = std::log(ratio);
  p.log_mean = std::log(mean) - 0.5 * p.log_var;
  return p;
}

LognormalParams sum_two_correlated(const LognormalParams& x,
                                   const LognormalParams& y, double log_cov) {
  const double m = x.mean() + y.mean();
  const double cross = std::exp(x.log_mean + y.log_mean +
                                0.5 * (x.log_var + y.log_var) + log_cov);
  const double m2 = x.second_moment() + y.second_moment() + 2.0 * cross;
  return LognormalParams::from_moments(m, m2);
}

LognormalParams lognormal_sum_approx(std::span<const LognormalTerm> terms,
                                     const Eigen::MatrixXd& log_cov) {
  if (terms.empty()) throw InputError("lognormal_sum_approx needs at least one term");
  const auto n = static_cast<Eigen::Index>(terms.size());
  if (log_cov.rows() != n || log_cov.cols() != n) {
    throw InputError("lognormal_sum_approx: covariance has wrong shape");
  }
  std::vector<double> weights;
  std::vector<double> means;
  weights.reserve(terms.size());
  means.reserve(terms.size());
  for (const auto& t : terms) {
    if (!(t.weight > 0.0)) throw InputError("lognormal term weights must be positive");
    weights.push_back(t.weight);
    means.push_back(t.log_mean);
  }
  return LognormalChainSum(std::move(weights), log_cov).approx(means);
}

LognormalChainSum::LognormalChainSum(std::vector<double> weights,
                                     const Eigen::MatrixXd& log_cov)
    : weights_(std::move(weights)),
      log_var_(log_cov.diagonal()),
      exp_cov_(log_cov.array().exp().matrix()) {}

LognormalParams LognormalChainSum::approx(std::span<const double> log_means) const {
  const std::size_t n = weights_.size();
  // Exact first moments of each weighted term.
  Eigen::VectorXd term_mean(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    term_mean[i] = weights_[i] * std::exp(log_means[i] + 0.5 * log_var_[i]);
  }

  LognormalParams partial;
  partial.log_mean = std::log(weights_[0]) + log_means[0];
  partial.log_var = log_var_[0];
  for (std::size_t k = 1; k < n; ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    LognormalParams next;
    next.log_mean = std::log(weights_[k]) + log_means[k];
    next.log_var = log_var_[kk];
    // E[S_{k-1} T_k] from the exact pairwise cross moments; the implied
    // log-covariance makes the two-variable match reproduce it.
    const double cross =
        term_mean[kk] * term_mean.head(kk).dot(exp_cov_.col(kk).head(kk));
    const double log_cov = std::log(cross) - std::log(partial.mean()) -
                           std::log(term_mean[kk]);
    partial = sum_two_correlated(partial, next, log_cov);
  }
  return partial;
}

ArChainMoments ar_chain_moments(int n, double mu, double phi, double sigma) {
  ArChainMoments m;
  m.mean_offset.resize(n);
  m.start_gain.resize(n);
  m.cov.resize(n, n);
  Eigen::VectorXd var(n);
  double mean = 0.0, gain = 1.0, v = 0.0;
  for (int i = 0; i < n; ++i) {
    mean = mu + phi * mean;
    gain *= phi;
    v = phi * phi * v + sigma * sigma;
    m.mean_offset[i] = mean;
    m.start_gain[i] = gain;
    var[i] = v;
  }
  for (int i = 0; i < n; ++i) {
    double c = var[i];
    for (int j = i; j < n; ++j) {
      m.cov(i, j) = c;
      m.cov(j, i) = c;
      c *= phi;
    }
  }
  return m;
}

}  // namespace pvsizing
