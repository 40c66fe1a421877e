#include "pvsizing/time_series.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include <Eigen/Dense>

#include "pvsizing/errors.hpp"

namespace pvsizing {

namespace {

struct OlsResult {
  Eigen::VectorXd beta;
  Eigen::VectorXd residuals;
  double rss = 0.0;
  Eigen::Index rank = 0;
};

OlsResult ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  qr.setThreshold(1e-12);
  OlsResult r;
  r.rank = qr.rank();
  r.beta = qr.solve(y);
  r.residuals = y - x * r.beta;
  r.rss = r.residuals.squaredNorm();
  return r;
}

}  // namespace

double PeriodicFit::operator()(double t) const {
  // Reduce the phase first so f(t) == f(t + period) bit for bit.
  const double phase = std::fmod(t, period);
  const double w = 2.0 * std::numbers::pi * (phase < 0 ? phase + period : phase) / period;
  double v = mean;
  for (std::size_t k = 0; k < cos_coef.size(); ++k) {
    const double a = w * static_cast<double>(k + 1);
    v += cos_coef[k] * std::cos(a) + sin_coef[k] * std::sin(a);
  }
  return v;
}

PeriodicFit fit_periodic(std::span<const double> t, std::span<const double> y,
                         int order) {
  constexpr double kPeriod = 365.0;
  if (order < 0) throw FitError("fit_periodic: order must be >= 0");
  if (t.size() != y.size()) throw FitError("fit_periodic: t and y differ in length");
  const auto cols = 2 * order + 1;
  if (t.size() < static_cast<std::size_t>(2 * cols)) {
    throw FitError("fit_periodic: need at least " + std::to_string(2 * cols) +
                   " points for order " + std::to_string(order));
  }
  const auto [lo, hi] = std::minmax_element(t.begin(), t.end());
  if (*hi - *lo < kPeriod - 1.0) {
    throw FitError("fit_periodic: observations must span at least one year");
  }

  const auto n = static_cast<Eigen::Index>(t.size());
  Eigen::MatrixXd design(n, cols);
  Eigen::VectorXd rhs(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double phase = std::fmod(t[i], kPeriod);
    const double w = 2.0 * std::numbers::pi * (phase < 0 ? phase + kPeriod : phase) / kPeriod;
    design(i, 0) = 1.0;
    for (int k = 0; k < order; ++k) {
      design(i, 1 + 2 * k) = std::cos(w * (k + 1));
      design(i, 2 + 2 * k) = std::sin(w * (k + 1));
    }
    rhs[i] = y[i];
  }
  const auto fit = ols(design, rhs);
  if (fit.rank < cols) {
    throw FitError("fit_periodic: rank-deficient design (rank " +
                   std::to_string(fit.rank) + " < " + std::to_string(cols) + ")");
  }
  PeriodicFit out;
  out.period = kPeriod;
  out.mean = fit.beta[0];
  for (int k = 0; k < order; ++k) {
    out.cos_coef.push_back(fit.beta[1 + 2 * k]);
    out.sin_coef.push_back(fit.beta[2 + 2 * k]);
  }
  return out;
}

namespace {

struct Candidate {
  std::string name;
  ArmaParams params;
  double rss = 0.0;
  int k = 0;
};

// Innovations of a fitted ARMA(1,1) by the recursion, started at the mean.
std::vector<double> filter_innovations(std::span<const double> e, const ArmaParams& p) {
  std::vector<double> z(e.size(), 0.0);
  const double stationary = (std::abs(1.0 - p.phi) > 1e-12) ? p.mu / (1.0 - p.phi) : 0.0;
  double prev_e = stationary, prev_z = 0.0;
  for (std::size_t t = 0; t < e.size(); ++t) {
    z[t] = e[t] - p.mu - p.phi * prev_e - p.theta * prev_z;
    prev_e = e[t];
    prev_z = z[t];
  }
  return z;
}

}  // namespace

ArmaFit fit_arma11(std::span<const double> series) {
  const auto n = static_cast<Eigen::Index>(series.size());
  if (n < 50) {
    throw FitError("fit_arma11: need at least 50 observations, got " + std::to_string(n));
  }
  const double mean = std::accumulate(series.begin(), series.end(), 0.0) / n;
  double var = 0.0;
  for (double v : series) var += (v - mean) * (v - mean);
  var /= n;

  ArmaFit out;
  if (var <= 1e-24 * (1.0 + mean * mean)) {
    out.params = {mean, 0.0, 0.0, 0.0};
    out.structure = "white";
    out.innovations.assign(series.size(), 0.0);
    return out;
  }

  // Stage 1: long autoregression for innovation estimates.
  const auto m = std::min<Eigen::Index>(
      n / 5, static_cast<Eigen::Index>(std::ceil(10.0 * std::log10(static_cast<double>(n)))));
  const Eigen::Index rows1 = n - m;
  Eigen::MatrixXd x1(rows1, m + 1);
  Eigen::VectorXd y1(rows1);
  for (Eigen::Index t = m; t < n; ++t) {
    x1(t - m, 0) = 1.0;
    for (Eigen::Index j = 1; j <= m; ++j) x1(t - m, j) = series[t - j];
    y1[t - m] = series[t];
  }
  const auto long_ar = ols(x1, y1);
  std::vector<double> z(series.size(), 0.0);
  for (Eigen::Index t = m; t < n; ++t) z[t] = long_ar.residuals[t - m];

  // Stage 2 on the common rows t = m+1 .. n-1.
  const Eigen::Index first = m + 1;
  const Eigen::Index rows = n - first;
  Eigen::VectorXd y(rows);
  for (Eigen::Index t = first; t < n; ++t) y[t - first] = series[t];

  auto regress = [&](bool use_e, bool use_z, const std::vector<double>& innov) {
    const int k = 1 + (use_e ? 1 : 0) + (use_z ? 1 : 0);
    Eigen::MatrixXd x(rows, k);
    for (Eigen::Index t = first; t < n; ++t) {
      int c = 0;
      x(t - first, c++) = 1.0;
      if (use_e) x(t - first, c++) = series[t - 1];
      if (use_z) x(t - first, c++) = innov[t - 1];
    }
    const auto r = ols(x, y);
    Candidate cand;
    cand.k = k;
    cand.rss = r.rss;
    int c = 0;
    cand.params.mu = r.beta[c++];
    if (use_e) cand.params.phi = r.beta[c++];
    if (use_z) cand.params.theta = r.beta[c++];
    return cand;
  };

  auto refine = [&](bool use_e, Candidate cand) {
    for (int pass = 0; pass < 2; ++pass) {
      if (std::abs(cand.params.theta) >= 1.0 || std::abs(cand.params.phi) >= 1.0) break;
      const auto innov = filter_innovations(series, cand.params);
      auto next = regress(use_e, true, innov);
      if (std::abs(next.params.theta) >= 1.0 || std::abs(next.params.phi) >= 1.0) break;
      cand = next;
    }
    return cand;
  };

  std::vector<Candidate> cands;
  {
    auto white = regress(false, false, z);
    white.name = "white";
    cands.push_back(white);
    auto ar1 = regress(true, false, z);
    ar1.name = "ar1";
    cands.push_back(ar1);
    auto ma1 = refine(false, regress(false, true, z));
    ma1.name = "ma1";
    cands.push_back(ma1);
    auto arma = refine(true, regress(true, true, z));
    arma.name = "arma11";
    cands.push_back(arma);
  }

  const double log_rows = std::log(static_cast<double>(rows));
  const Candidate* best = nullptr;
  double best_bic = 0.0;
  std::ostringstream diag;
  for (const auto& c : cands) {
    const double bic = rows * std::log(std::max(c.rss, 1e-300) / rows) + c.k * log_rows;
    diag << " " << c.name << "(phi=" << c.params.phi << ", theta=" << c.params.theta
         << ", bic=" << bic << ")";
    if (std::abs(c.params.phi) >= 1.0 || std::abs(c.params.theta) >= 1.0) continue;
    if (!best || bic < best_bic) {
      best = &c;
      best_bic = bic;
    }
  }
  if (!best) {
    throw FitError("fit_arma11: every candidate is non-stationary or non-invertible:" +
                   diag.str());
  }

  out.params = best->params;
  out.params.sigma = std::sqrt(best->rss / static_cast<double>(rows - best->k));
  out.structure = best->name;
  out.bic = best_bic;
  out.innovations = filter_innovations(series, out.params);
  return out;
}

LogArParams fit_log_ar(const std::vector<std::vector<double>>& chains) {
  std::vector<double> xs, ys;
  for (const auto& chain : chains) {
    for (std::size_t i = 0; i < chain.size(); ++i) {
      if (!(chain[i] > 0.0) || !std::isfinite(chain[i])) {
        throw FitError("fit_log_ar: correction terms must be positive and finite");
      }
      if (i == 0) continue;
      xs.push_back(std::log(chain[i - 1]));
      ys.push_back(std::log(chain[i]));
    }
  }
  const auto n = xs.size();
  if (n < 10) {
    throw FitError("fit_log_ar: need at least 10 within-chain pairs, got " +
                   std::to_string(n));
  }
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }

  LogArParams p;
  if (sxx <= 1e-24 * n * (1.0 + mx * mx)) {
    p.mu = my;
    p.phi = 0.0;
    p.sigma = std::sqrt(syy / static_cast<double>(n - 1));
    return p;
  }
  p.phi = sxy / sxx;
  p.mu = my - p.phi * mx;
  if (std::abs(p.phi) >= 1.0) {
    throw FitError("fit_log_ar: non-stationary estimate phi = " + std::to_string(p.phi));
  }
  double rss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = ys[i] - p.mu - p.phi * xs[i];
    rss += r * r;
  }
  p.sigma = std::sqrt(rss / static_cast<double>(n - 2));
  return p;
}

}  // namespace pvsizing
