#pragma once

#include <span>
#include <string>
#include <vector>

namespace pvsizing {

/// Truncated Fourier series with a one-year period:
///   f(t) = mean + Σ_k a_k cos(2πkt/P) + b_k sin(2πkt/P).
struct PeriodicFit {
  double period = 365.0;
  double mean = 0.0;
  std::vector<double> cos_coef;
  std::vector<double> sin_coef;

  int order() const { return static_cast<int>(cos_coef.size()); }
  double operator()(double t) const;
};

/// Least-squares Fourier fit. Throws FitError when there are fewer than
/// 2·(2·order+1) points, the span is shorter than one period, or the design
/// is rank deficient.
PeriodicFit fit_periodic(std::span<const double> t, std::span<const double> y,
                         int order);

/// ε_t = mu + phi ε_{t-1} + theta ζ_{t-1} + ζ_t,  ζ_t ~ N(0, sigma²).
struct ArmaParams {
  double mu = 0.0;
  double phi = 0.0;
  double theta = 0.0;
  double sigma = 0.0;
};

struct ArmaFit {
  ArmaParams params;
  std::string structure;  // "arma11", "ar1", "ma1" or "white"
  double bic = 0.0;
  std::vector<double> innovations;  // ζ̂_t from the final filter
};

/// Two-stage Hannan-Rissanen fit: a long AR regression supplies innovation
/// estimates, then ε_t is regressed on (1, ε_{t-1}, ζ̂_{t-1}); two refinement
/// passes re-filter ζ̂ with the current estimate. Nested submodels (AR(1),
/// MA(1), white noise) are fitted on the same rows and the lowest BIC wins,
/// which keeps the near-cancelling φ ≈ -θ ridge out of white-noise fits.
/// Throws FitError on too little data or a non-stationary estimate.
ArmaFit fit_arma11(std::span<const double> series);

/// ln δ_i = mu + phi ln δ_{i-1} + ζ_i,  ζ_i ~ N(0, sigma²).
struct LogArParams {
  double mu = 0.0;
  double phi = 0.0;
  double sigma = 0.0;

  double stationary_mean() const { return mu / (1.0 - phi); }
};

/// OLS of ln δ_i on ln δ_{i-1}, pairs taken inside each chain only.
/// Constant regressors give phi = 0 with mu the mean and sigma the spread of
/// the responses. Throws FitError on < 10 pairs, non-positive δ, or |phi| >= 1.
LogArParams fit_log_ar(const std::vector<std::vector<double>>& chains);

}  // namespace pvsizing
