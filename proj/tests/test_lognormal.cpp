#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "pvsizing/lognormal_sum.hpp"

using namespace pvsizing;

TEST_CASE("moment matching round-trips") {
  const LognormalParams p{0.3, 0.2};
  const auto q = LognormalParams::from_moments(p.mean(), p.second_moment());
  CHECK(q.log_mean == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(q.log_var == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(p.mean() == doctest::Approx(std::exp(0.4)).epsilon(1e-14));
  CHECK(p.variance() == doctest::Approx((std::exp(0.2) - 1.0) * std::exp(0.8)).epsilon(1e-12));
}

TEST_CASE("lognormal log-density integrates to one") {
  const LognormalParams p{-0.5, 0.3};
  double total = 0.0;
  const double h = 1e-4;
  for (double x = h / 2; x < 30.0; x += h) total += std::exp(p.log_pdf(x)) * h;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(std::isinf(p.log_pdf(0.0)));
}

TEST_CASE("two correlated lognormals keep the exact first two moments") {
  const LognormalParams x{0.1, 0.04}, y{-0.2, 0.09};
  const double cov = 0.03;
  const auto s = sum_two_correlated(x, y, cov);
  const double mean = std::exp(0.1 + 0.02) + std::exp(-0.2 + 0.045);
  const double exy = std::exp(0.1 - 0.2 + 0.5 * (0.04 + 0.09) + cov);
  const double second = std::exp(0.2 + 0.08) + std::exp(-0.4 + 0.18) + 2.0 * exy;
  CHECK(s.mean() == doctest::Approx(mean).epsilon(1e-12));
  CHECK(s.second_moment() == doctest::Approx(second).epsilon(1e-12));
}

TEST_CASE("AR chain moments follow the recursion") {
  const int n = 6;
  const double mu = 0.01, phi = 0.7, sigma = 0.2;
  const auto m = ar_chain_moments(n, mu, phi, sigma);
  double mean = 0.0, gain = 1.0, var = 0.0;
  for (int i = 0; i < n; ++i) {
    mean = mu + phi * mean;
    gain *= phi;
    var = phi * phi * var + sigma * sigma;
    CHECK(m.mean_offset[i] == doctest::Approx(mean).epsilon(1e-12));
    CHECK(m.start_gain[i] == doctest::Approx(gain).epsilon(1e-12));
    CHECK(m.cov(i, i) == doctest::Approx(var).epsilon(1e-12));
    for (int j = i; j < n; ++j) {
      CHECK(m.cov(i, j) == doctest::Approx(std::pow(phi, j - i) * var).epsilon(1e-12));
    }
  }
}

TEST_CASE("chain sum approximation matches Monte Carlo moments") {
  const int n = 20;
  const double mu = 0.0, phi = 0.8, sigma = 0.15;
  const auto m = ar_chain_moments(n, mu, phi, sigma);
  std::vector<double> w(n), means(n);
  std::vector<LognormalTerm> terms;
  for (int i = 0; i < n; ++i) {
    w[i] = 0.5 + 0.05 * i;
    means[i] = m.mean_offset[i] + m.start_gain[i] * 0.1;
    terms.push_back({w[i], means[i], m.cov(i, i)});
  }
  const auto folded = lognormal_sum_approx(terms, m.cov);
  const LognormalChainSum chain(w, m.cov);
  const auto reused = chain.approx(means);
  CHECK(reused.log_mean == doctest::Approx(folded.log_mean).epsilon(1e-12));
  CHECK(reused.log_var == doctest::Approx(folded.log_var).epsilon(1e-12));

  double exact_mean = 0.0;
  for (int i = 0; i < n; ++i) exact_mean += w[i] * std::exp(means[i] + 0.5 * m.cov(i, i));
  CHECK(folded.mean() == doctest::Approx(exact_mean).epsilon(1e-12));

  std::mt19937_64 rng(1);
  std::normal_distribution<double> z(0.0, sigma);
  double s1 = 0.0, s2 = 0.0;
  const int draws = 200000;
  for (int k = 0; k < draws; ++k) {
    double l = 0.1, sum = 0.0;
    for (int i = 0; i < n; ++i) {
      l = mu + phi * l + z(rng);
      sum += w[i] * std::exp(l);
    }
    s1 += sum;
    s2 += sum * sum;
  }
  const double mc_mean = s1 / draws;
  const double mc_var = s2 / draws - mc_mean * mc_mean;
  CHECK(folded.mean() == doctest::Approx(mc_mean).epsilon(0.02));
  CHECK(folded.variance() == doctest::Approx(mc_var).epsilon(0.10));
}
