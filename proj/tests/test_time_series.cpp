#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "pvsizing/errors.hpp"
#include "pvsizing/time_series.hpp"

using namespace pvsizing;

namespace {

std::vector<double> simulate_arma(double mu, double phi, double theta, double sigma, int n,
                                  std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, sigma);
  std::vector<double> out;
  double e = mu / (1.0 - phi), prev_z = 0.0;
  for (int i = 0; i < n + 200; ++i) {
    const double zt = z(rng);
    e = mu + phi * e + theta * prev_z + zt;
    prev_z = zt;
    if (i >= 200) out.push_back(e);
  }
  return out;
}

}  // namespace

TEST_CASE("periodic fit recovers noise-free Fourier coefficients") {
  std::vector<double> t, y;
  for (int d = 0; d < 730; ++d) {
    const double w = 2.0 * std::numbers::pi * d / 365.0;
    t.push_back(d);
    y.push_back(3.0 + 0.5 * std::cos(w) - 0.25 * std::sin(w) + 0.1 * std::cos(2.0 * w));
  }
  const auto f = fit_periodic(t, y, 2);
  CHECK(f.mean == doctest::Approx(3.0).epsilon(1e-10));
  CHECK(f.cos_coef[0] == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(f.sin_coef[0] == doctest::Approx(-0.25).epsilon(1e-10));
  CHECK(f.cos_coef[1] == doctest::Approx(0.1).epsilon(1e-10));
  CHECK(std::abs(f.sin_coef[1]) < 1e-10);
  CHECK(f(400.0) == doctest::Approx(y[400]).epsilon(1e-10));
}

TEST_CASE("periodic fit rejects a span shorter than one period") {
  std::vector<double> t, y;
  for (int d = 0; d < 100; ++d) {
    t.push_back(d);
    y.push_back(1.0);
  }
  CHECK_THROWS_AS(fit_periodic(t, y, 2), FitError);
}

TEST_CASE("ARMA(1,1) parameters are recovered") {
  const auto s = simulate_arma(0.05, 0.6, 0.3, 0.1, 3000, 17);
  const auto fit = fit_arma11(s);
  CHECK(fit.structure == "arma11");
  CHECK(fit.params.phi == doctest::Approx(0.6).epsilon(0.1 / 0.6));
  CHECK(std::abs(fit.params.theta - 0.3) < 0.1);
  CHECK(std::abs(fit.params.sigma - 0.1) < 0.01);
  CHECK(std::abs(fit.params.mu / (1.0 - fit.params.phi) - 0.125) < 0.03);
}

TEST_CASE("white noise selects a reduced structure") {
  const auto s = simulate_arma(0.0, 0.0, 0.0, 1.0, 3000, 5);
  const auto fit = fit_arma11(s);
  CHECK(fit.structure != "arma11");
  CHECK(std::abs(fit.params.phi) < 0.1);
}

TEST_CASE("ARMA fit rejects tiny series") {
  const std::vector<double> s = {0.1, 0.2, 0.3};
  CHECK_THROWS_AS(fit_arma11(s), FitError);
}

TEST_CASE("log-AR(1) recovery and chain boundaries") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> z(0.0, 0.2);
  std::vector<std::vector<double>> chains;
  for (int c = 0; c < 200; ++c) {
    std::vector<double> chain;
    double l = 0.01 / (1.0 - 0.8);
    for (int i = 0; i < 51; ++i) {
      l = 0.01 + 0.8 * l + z(rng);
      chain.push_back(std::exp(l));
    }
    chains.push_back(chain);
  }
  const auto p = fit_log_ar(chains);
  CHECK(std::abs(p.mu - 0.01) < 0.05);
  CHECK(std::abs(p.phi - 0.8) < 0.05);
  CHECK(std::abs(p.sigma - 0.2) < 0.05);
}

TEST_CASE("log-AR fit rejects non-positive corrections") {
  std::vector<std::vector<double>> chains = {std::vector<double>(20, 1.0)};
  chains[0][5] = 0.0;
  CHECK_THROWS_AS(fit_log_ar(chains), FitError);
}
