#include <doctest.h>

#include <cmath>
#include <random>

#include "pvsizing/random.hpp"
#include "pvsizing/sizing.hpp"
#include "stack_fixture.hpp"

using namespace pvsizing;

TEST_CASE("capex converts euro per watt to euro per kilowatt") {
  CostParams p;
  CHECK(capex(0.0, p) == 0.0);
  CHECK(capex(262.4, p) == doctest::Approx(524800.0).epsilon(1e-12));
  for (double x : {1.0, 17.5, 300.0}) CHECK(capex(2 * x, p) == doctest::Approx(2 * capex(x, p)));
  CHECK_THROWS_AS(capex(-1.0, p), ParameterError);
}

TEST_CASE("efficiency follows the degradation rule unless pinned") {
  CostParams p;
  for (double ell : {25.0, 30.0, 35.0}) {
    p.lifespan = ell;
    CHECK(p.efficiency() == doctest::Approx(1.0 - 0.0015 * ell / 2.0));
  }
  p.lambda_pv = 0.8;
  CHECK(p.efficiency() == 0.8);
}

TEST_CASE("cost parameter validation lists every problem") {
  CostParams p;
  p.a_ins = -1.0;
  p.a_m = -2.0;
  p.lifespan = 0.5;
  try {
    p.validate();
    FAIL("expected ParameterError");
  } catch (const ParameterError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("a_ins") != std::string::npos);
    CHECK(msg.find("a_m") != std::string::npos);
    CHECK(msg.find("lifespan") != std::string::npos);
  }
  CostParams q;
  q.lambda_pv = 1.5;
  CHECK_THROWS_AS(q.validate(), ParameterError);
}

TEST_CASE("Nelder-Mead on a parabola") {
  NelderMeadOptions opt{1.0, 1e-6, 50, -1e9};
  const auto r = nelder_mead_minimize([](double x) { return (x - 3) * (x - 3); }, 0.0, opt);
  CHECK(std::abs(r.x_best - 3.0) < 1e-3);
  CHECK(r.evaluations <= 50);
  CHECK(r.log.size() == static_cast<std::size_t>(r.evaluations));
}

TEST_CASE("Nelder-Mead guard keeps candidates at the lower bound") {
  NelderMeadOptions opt{2.0, 1e-6, 60, 0.0};
  const auto r = nelder_mead_minimize([](double x) {
    REQUIRE(x >= 0.0);
    return std::abs(x);
  }, 5.0, opt);
  CHECK(r.x_best < 1e-3);
}

TEST_CASE("Nelder-Mead tolerates small noise") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-0.01, 0.01);
  NelderMeadOptions opt{1.0, 1e-3, 50, -1e9};
  const auto r =
      nelder_mead_minimize([&](double x) { return (x - 3) * (x - 3) + u(rng); }, 0.0, opt);
  CHECK(std::abs(r.x_best - 3.0) < 0.2);
}

TEST_CASE("Nelder-Mead default step") {
  NelderMeadOptions opt;
  opt.max_evals = 2;
  const auto a = nelder_mead_minimize([](double x) { return x; }, 40.0, opt);
  REQUIRE(a.log.size() == 2);
  CHECK(a.log[1].x == doctest::Approx(50.0));
  const auto b = nelder_mead_minimize([](double x) { return -x; }, 0.0, opt);
  CHECK(b.log[1].x == doctest::Approx(50.0));
}

TEST_CASE("Nelder-Mead reports non-finite values with the partial log") {
  NelderMeadOptions opt{1.0, 1e-6, 50, 0.0};
  try {
    nelder_mead_minimize([](double x) { return x > 1.5 ? std::nan("") : -x; }, 0.0, opt);
    FAIL("expected NelderMeadError");
  } catch (const NelderMeadError& e) {
    REQUIRE(e.log().size() >= 2);
    CHECK(std::isnan(e.log().back().f));
    CHECK(e.log().back().x > 1.5);
    for (std::size_t i = 0; i + 1 < e.log().size(); ++i) CHECK(std::isfinite(e.log()[i].f));
  }
}

TEST_CASE("Nelder-Mead does not re-evaluate cached points") {
  int calls = 0;
  std::vector<double> seen;
  NelderMeadOptions opt{1.0, 1e-6, 40, -1e9};
  nelder_mead_minimize([&](double x) {
    for (double s : seen) CHECK(s != x);
    seen.push_back(x);
    ++calls;
    return (x + 1) * (x + 1);
  }, 2.0, opt);
  CHECK(calls > 0);
}

TEST_CASE("exponential fit recovers exact data") {
  const double a = 3000.0, b = 0.012, c0 = 500.0;
  std::vector<double> x, y;
  for (double v = 0; v <= 300; v += 25) {
    x.push_back(v);
    y.push_back(a * std::exp(-b * v) + c0);
  }
  const auto f = fit_exponential(x, y);
  CHECK(f.a == doctest::Approx(a).epsilon(1e-6));
  CHECK(f.b == doctest::Approx(b).epsilon(1e-6));
  CHECK(f.c0 == doctest::Approx(c0).epsilon(1e-6));
}

TEST_CASE("exponential fit preconditions") {
  std::vector<double> x = {0, 1, 2}, y = {3, 2, 1};
  CHECK_THROWS_AS(fit_exponential(x, y), FitError);
  std::vector<double> x4 = {0, 1, 2, 3}, y4 = {3, 2, 0, 1};
  CHECK_THROWS_AS(fit_exponential(x4, y4), FitError);
}

TEST_CASE("constant grid costs give no PV benefit") {
  std::vector<double> x = {0, 50, 100, 150, 200}, y(5, 1234.0);
  const auto f = fit_exponential(x, y);
  CHECK(f(0.0) == doctest::Approx(1234.0));
  CHECK(f(200.0) == doctest::Approx(1234.0));
  CHECK(smoothed_optimum(f, CostParams{}, 200.0) == doctest::Approx(0.0).epsilon(1e-4));
}

TEST_CASE("smoothed optimum matches the stationarity condition") {
  // d/dx [a_ins·1000·x + ℓ(a_m x + A e^{-bλx} + c0)] = 0
  //   ⇒ x* = ln(ℓ A b λ / (1000 a_ins + ℓ a_m)) / (bλ)
  CostParams p;
  ExponentialFit f{200000.0, 0.01, 1000.0};
  const double lam = p.efficiency();
  const double expect =
      std::log(p.lifespan * f.a * f.b * lam / (1000 * p.a_ins + p.lifespan * p.a_m)) / (f.b * lam);
  REQUIRE(expect > 0.0);
  CHECK(smoothed_optimum(f, p, 1000.0, 1e-8) == doctest::Approx(expect).epsilon(1e-5));
  CHECK(smoothed_optimum(f, p, expect / 2) == doctest::Approx(expect / 2).epsilon(1e-4));
}

TEST_CASE("simulated days stride the year") {
  CHECK(simulated_days(365).size() == 365);
  CHECK(simulated_days(365).back() == 364);
  const auto d = simulated_days(30);
  REQUIRE(d.size() == 30);
  CHECK(d.front() == 0);
  for (std::size_t i = 1; i < d.size(); ++i) CHECK(d[i] > d[i - 1]);
  CHECK(d.back() < 365);
  CHECK_THROWS_AS(simulated_days(0), ParameterError);
  CHECK_THROWS_AS(simulated_days(366), ParameterError);
}

TEST_CASE("forecast perturbation has the configured RMS per day") {
  std::vector<double> ones(24 * 20, 1.0);
  const auto f = perturb_forecast(ones, 0.05, 3, 99);
  for (int d = 0; d < 20; ++d) {
    double ss = 0.0;
    for (int h = 0; h < 24; ++h) ss += (f[d * 24 + h] - 1.0) * (f[d * 24 + h] - 1.0);
    CHECK(std::sqrt(ss / 24) == doctest::Approx(0.05).epsilon(1e-9));
  }
  CHECK(perturb_forecast(ones, 0.0, 3, 99) == ones);
}

TEST_CASE("workload synthesis is deterministic") {
  const auto a = synth_workload(5, WorkloadOptions{});
  const auto b = synth_workload(5, WorkloadOptions{});
  const auto c = synth_workload(6, WorkloadOptions{});
  CHECK(a.price.size() == 365 * 24);
  CHECK(a.price == b.price);
  CHECK(a.demand == b.demand);
  CHECK(a.demand_forecast == b.demand_forecast);
  CHECK(a.price != c.price);
  for (double v : a.price) CHECK(v > 0.0);
  for (double v : a.demand) CHECK(v > 0.0);
}

TEST_CASE("per-capacity seeds") {
  CHECK(opex_seed(1, 100.0) == opex_seed(1, 100.0));
  CHECK(opex_seed(1, 100.0) != opex_seed(1, 100.5));
  CHECK(opex_seed(1, 100.0) != opex_seed(2, 100.0));
  CHECK(opex_seed(1, 100.0) == derive_seed(1, "sizing", 100000));
}

TEST_CASE("yearly OPEX on the toy network") {
  const auto stack = fixture::toy_stack(11, 2);
  CostParams p;

  const auto zero = yearly_opex(0.0, p, stack, 11);
  CHECK(zero.maintenance == 0.0);
  CHECK(zero.grid_cost > 0.0);
  CHECK(zero.ledger.constraint_violations == 0);
  CHECK(zero.opex == zero.grid_cost);

  const auto again = yearly_opex(0.0, p, stack, 11);
  CHECK(again.grid_cost == zero.grid_cost);

  const auto ev = total_cost(80.0, p, stack, 11);
  CHECK(ev.total == doctest::Approx(ev.capex + p.lifespan * ev.opex).epsilon(1e-14));
  CHECK(ev.opex > p.a_m * 80.0);

  // Night pumping still buys from the grid, so a huge plant only removes the
  // daytime share of the bill.
  const auto huge = yearly_opex(20000.0, p, stack, 11);
  CHECK(huge.grid_cost < zero.grid_cost);
  CHECK(huge.maintenance == doctest::Approx(p.a_m * 20000.0));
  CHECK(huge.ledger.constraint_violations == 0);
}
