#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

namespace pvsizing {

/// ln X ~ Normal(log_mean, log_var).
struct LognormalParams {
  double log_mean = 0.0;
  double log_var = 0.0;

  double mean() const;
  double variance() const;
  double second_moment() const;
  /// ln f(x); -inf for x <= 0. Requires log_var > 0.
  double log_pdf(double x) const;
  /// Lognormal with the given first two moments.
  static LognormalParams from_moments(double mean, double second_moment);
};

/// One weighted summand w·e^{L}, L ~ Normal(log_mean, log_var).
struct LognormalTerm {
  double weight = 1.0;
  double log_mean = 0.0;
  double log_var = 0.0;
};

/// Moment-matched lognormal for X + Y where (ln X, ln Y) are jointly normal
/// with covariance `log_cov`.
LognormalParams sum_two_correlated(const LognormalParams& x,
                                   const LognormalParams& y, double log_cov);

/// Approximates Σ w_i e^{L_i} by folding the terms left to right: every
/// partial sum is replaced by the lognormal matching its first two moments,
/// then combined with the next term as a pair of correlated lognormals.
/// `log_cov(i, j)` is Cov(L_i, L_j); its diagonal must equal the log_var's.
LognormalParams lognormal_sum_approx(std::span<const LognormalTerm> terms,
                                     const Eigen::MatrixXd& log_cov);

/// Reusable form of `lognormal_sum_approx` for a fixed covariance structure
/// and weights where only the log-means change between calls (the AR chain
/// conditioned on different starting values).
class LognormalChainSum {
 public:
  LognormalChainSum(std::vector<double> weights, const Eigen::MatrixXd& log_cov);

  LognormalParams approx(std::span<const double> log_means) const;
  std::size_t size() const { return weights_.size(); }

 private:
  std::vector<double> weights_;
  Eigen::VectorXd log_var_;
  Eigen::MatrixXd exp_cov_;  // e^{Cov(L_i, L_j)}
};

/// Log-means, covariance of an AR(1) chain L_i = mu + phi L_{i-1} + sigma·z_i,
/// i = 0..n-1, conditioned on a known L_{-1}.
struct ArChainMoments {
  Eigen::VectorXd mean_offset;  // E[L_i] when L_{-1} = 0
  Eigen::VectorXd start_gain;   // dE[L_i]/dL_{-1} = phi^{i+1}
  Eigen::MatrixXd cov;
};
ArChainMoments ar_chain_moments(int n, double mu, double phi, double sigma);

}  // namespace pvsizing
