#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "empc_fixtures.hpp"
#include "pvsizing/errors.hpp"

using namespace pvsizing;

namespace {

HorizonProblem random_problem(std::mt19937_64& rng, const LinearWdnModel& model, const MpcConfig& cfg,
                              int horizon, int scenarios) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  HorizonProblem p;
  p.model = &model;
  p.cfg = &cfg;
  p.h0 = Eigen::Vector2d(1.8 + u(rng), 1.7 + 0.8 * u(rng));
  p.horizon = horizon;
  for (int j = 0; j < horizon; ++j) {
    p.price.push_back(0.1 + 0.3 * u(rng));
    p.demand.push_back(0.05 + 0.05 * u(rng));
  }
  for (int s = 0; s < scenarios; ++s) {
    std::vector<double> pv;
    for (int k = 0; k < horizon * cfg.substeps(); ++k) pv.push_back(40.0 * u(rng));
    p.pv.push_back(pv);
  }
  p.h_min = model.h_min;
  p.h_max = model.h_max;
  p.terminal = true;
  p.h_target = Eigen::Vector2d(2.2, 2.0);
  p.terminal_radius = 0.01;
  p.terminal_weight = 100.0;
  p.periodic = true;
  p.periodic_weight = 50.0;
  return p;
}

}  // namespace

TEST_CASE("horizon length counts down to the day boundary") {
  CHECK(horizon_length(0.0, 3600.0) == 24);
  CHECK(horizon_length(23.0 * 3600.0, 3600.0) == 1);
  CHECK(horizon_length(36.0 * 3600.0, 3600.0) == 12);
  CHECK(horizon_length(86400.0, 3600.0) == 24);
}

TEST_CASE("barrier values") {
  const Eigen::VectorXd lo = Eigen::VectorXd::Constant(1, 0.0), hi = Eigen::VectorXd::Constant(1, 10.0);
  CHECK(barrier_cost(Eigen::VectorXd::Constant(1, 5.0), lo, hi, 80.0, 0.2) < 1e-10);
  const double at_top = barrier_cost(hi, lo, hi, 80.0, 0.2);
  CHECK(at_top == doctest::Approx(std::exp(16.0) + std::exp(80.0 * (-10.0 + 0.2))).epsilon(1e-14));
  double prev = 0.0;
  for (double h = 5.0; h <= 10.0; h += 0.05) {
    const double c = barrier_cost(Eigen::VectorXd::Constant(1, h), lo, hi, 80.0, 0.2);
    CHECK(c >= prev);
    prev = c;
  }
}

TEST_CASE("softplus stays within ln2/beta of the ReLU") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> x(-100.0, 100.0);
  for (double beta : {0.1, 1.0, 100.0}) {
    for (int i = 0; i < 10000; ++i) {
      double v = x(rng);
      if (i == 0) v = 1e6;
      if (i == 1) v = -1e6;
      const double gap = softplus(v, beta) - std::max(0.0, v);
      CHECK(std::isfinite(softplus(v, beta)));
      CHECK(gap >= 0.0);
      CHECK(gap <= std::log(2.0) / beta + 1e-15);
    }
  }
  CHECK(softplus(0.0, 2.0) == doctest::Approx(std::log(2.0) / 2.0).epsilon(1e-15));
  CHECK(std::abs(softplus(50.0, 100.0) - 50.0) < 1e-6);
  CHECK(softplus_slope(0.0, 1.0) == 0.5);
}

TEST_CASE("stage cost matches a hand evaluation") {
  const auto model = fixtures::single_tank();
  const auto cfg = fixtures::config_for(1);
  const Eigen::VectorXd h = Eigen::VectorXd::Constant(1, 2.5);
  const Eigen::VectorXd u = Eigen::VectorXd::Constant(1, 0.05);
  const std::vector<double> pv = {0.0, 10.0, 20.0, 40.0};
  const double head = 9810.0 * 2.5 + 2.0e5 * 0.05 + 3.0e5 - 49050.0;
  const double pp = 0.05 * head / 0.75 / 1000.0;
  double expected = std::exp(80.0 * (1.0 - 2.5 + 0.2)) + std::exp(80.0 * (2.5 - 4.0 + 0.2));
  for (double p : pv) expected += 0.3 * std::log1p(std::exp(pp - p)) * 0.25;
  CHECK(stage_cost(h, u, pv, 0.3, model, cfg) == doctest::Approx(expected).epsilon(1e-12));

  const double barrier = barrier_cost(h, model.h_min, model.h_max, 80.0, 0.2);
  const double c1 = stage_cost(h, u, pv, 0.3, model, cfg) - barrier;
  const double c2 = stage_cost(h, u, pv, 0.6, model, cfg) - barrier;
  CHECK(c2 == doctest::Approx(2.0 * c1).epsilon(1e-12));
  const double idle = stage_cost(h, Eigen::VectorXd::Zero(1), pv, 0.3, model, cfg) - barrier;
  CHECK(idle <= 4.0 * 0.3 * std::log(2.0) * 0.25);
}

TEST_CASE("adjoint gradient matches central differences") {
  std::mt19937_64 rng(44);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const auto model = fixtures::random_model(rng);
    const auto cfg = fixtures::config_for(2);
    const int horizon = 1 + trial % 4;
    const auto prob = random_problem(rng, model, cfg, horizon, 3);
    // Redraw until the levels stay near the band; far outside it the barrier
    // reaches 1e30 and central differences lose every digit.
    Eigen::VectorXd u(2 * horizon);
    do {
      for (Eigen::Index i = 0; i < u.size(); ++i) u[i] = 0.1 * unit(rng);
    } while (prob.evaluate(u) > 1e4);
    Eigen::VectorXd g, gh;
    prob.evaluate(u, &g, &gh);
    for (Eigen::Index i = 0; i < u.size(); ++i) {
      const double e = 1e-7;
      Eigen::VectorXd up = u, dn = u;
      up[i] += e;
      dn[i] -= e;
      const double fd = (prob.evaluate(up) - prob.evaluate(dn)) / (2.0 * e);
      CHECK(std::abs(fd - g[i]) <= 1e-4 * std::max(1.0, std::abs(fd)));
    }
    for (int i = 0; i < 2; ++i) {
      const double e = 1e-6;
      HorizonProblem a = prob, b = prob;
      a.h0[i] += e;
      b.h0[i] -= e;
      const double fd = (a.evaluate(u) - b.evaluate(u)) / (2.0 * e);
      CHECK(std::abs(fd - gh[i]) <= 1e-4 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST_CASE("exact Hessian matches differences of the gradient") {
  std::mt19937_64 rng(45);
  const auto model = fixtures::random_model(rng);
  const auto cfg = fixtures::config_for(2);
  auto prob = random_problem(rng, model, cfg, 4, 2);
  prob.periodic = false;
  Eigen::VectorXd u = Eigen::VectorXd::Constant(8, 0.0);
  // Coordinate sweeps on a coarse grid to land where the barrier is mild.
  for (int sweep = 0; sweep < 3; ++sweep) {
    for (Eigen::Index i = 0; i < u.size(); ++i) {
      Eigen::VectorXd cand = u;
      for (int step = 0; step <= 20; ++step) {
        cand[i] = 0.005 * step;
        if (prob.evaluate(cand) < prob.evaluate(u)) u = cand;
      }
    }
  }
  REQUIRE(prob.evaluate(u) < 1e4);
  const Eigen::MatrixXd hess = prob.hessian(u);
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    Eigen::VectorXd up = u, dn = u, gu, gd;
    up[i] += 1e-6;
    dn[i] -= 1e-6;
    prob.evaluate(up, &gu);
    prob.evaluate(dn, &gd);
    const Eigen::VectorXd col = (gu - gd) / 2e-6;
    CHECK((col - hess.col(i)).norm() <= 1e-4 * std::max(1.0, col.norm()));
  }
}

TEST_CASE("two-step problem agrees with an exhaustive grid") {
  const auto model = fixtures::single_tank();
  const auto cfg = fixtures::config_for(1);
  MpcRequest req;
  req.h0 = Eigen::VectorXd::Constant(1, 2.5);
  req.t = 22.0 * 3600.0;
  req.scenarios = {std::vector<double>(8, 5.0)};
  req.price = {0.4, 0.1};
  req.demand = {0.06, 0.06};
  req.h_target = Eigen::VectorXd::Constant(1, 2.3);
  const auto sol = solve_mpc(req, model, cfg);
  REQUIRE(sol.status == MpcStatus::solved);

  // Independent evaluation of the same objective.
  const auto cost = [&](double u0, double u1) {
    double h = 2.5, total = 0.0;
    const double us[2] = {u0, u1};
    for (int j = 0; j < 2; ++j) {
      total += std::exp(80.0 * (1.0 - h + 0.2)) + std::exp(80.0 * (h - 4.0 + 0.2));
      const double pp = us[j] * (9810.0 * h + 2.0e5 * us[j] + 3.0e5 - 49050.0) / 0.75 / 1000.0;
      for (int k = 0; k < 4; ++k) total += req.price[j] * softplus(pp - 5.0, 1.0) * 0.25;
      h = model.Ad(0, 0) * h + model.Bd1(0, 0) * us[j] + model.Bd2[0] * req.demand[j] + model.fd[0];
    }
    return std::pair{total, std::abs(h - 2.3)};
  };
  double best = std::numeric_limits<double>::infinity();
  for (int a = 0; a <= 1000; ++a) {
    for (int b = 0; b <= 1000; ++b) {
      const auto [f, dist] = cost(a * 1e-4, b * 1e-4);
      if (dist <= cfg.terminal_radius && f < best) best = f;
    }
  }
  REQUIRE(std::isfinite(best));
  const auto [f_sol, d_sol] = cost(sol.inputs[0][0], sol.inputs[1][0]);
  CHECK(d_sol <= cfg.terminal_radius);
  CHECK(sol.objective == doctest::Approx(f_sol).epsilon(1e-10));
  CHECK(f_sol <= best * 1.01);
}

TEST_CASE("identical scenarios give the single-scenario solution") {
  std::mt19937_64 rng(3);
  const auto model = fixtures::random_model(rng);
  const auto cfg = fixtures::config_for(2);
  MpcRequest req;
  req.h0 = Eigen::Vector2d(2.2, 2.0);
  req.t = 18.0 * 3600.0;
  const std::vector<double> pv(24, 12.0);
  req.scenarios = {pv};
  req.price = {0.3, 0.2, 0.1, 0.1, 0.2, 0.3};
  req.demand = std::vector<double>(6, 0.07);
  req.h_target = Eigen::Vector2d(2.2, 2.0);
  const auto one = solve_mpc(req, model, cfg);
  req.scenarios.assign(10, pv);
  const auto ten = solve_mpc(req, model, cfg);
  CHECK(one.objective == doctest::Approx(ten.objective).epsilon(1e-9));
  for (std::size_t j = 0; j < one.inputs.size(); ++j) {
    CHECK((one.inputs[j] - ten.inputs[j]).norm() < 1e-6);
  }
}

TEST_CASE("free power gives an interior stationary point") {
  std::mt19937_64 rng(4);
  auto model = fixtures::random_model(rng);
  model.h_min = Eigen::Vector2d(0.0, 0.0);
  model.h_max = Eigen::Vector2d(10.0, 10.0);
  const auto cfg = fixtures::config_for(2);
  MpcRequest req;
  req.h0 = Eigen::Vector2d(2.0, 2.0);
  req.t = 20.0 * 3600.0;
  req.scenarios = {std::vector<double>(16, 1e4)};
  req.price = {0.3, 0.3, 0.3, 0.3};
  req.demand = {0.03, 0.03, 0.03, 0.03};
  req.h_target = Eigen::Vector2d(2.0, 2.0);
  const auto sol = solve_mpc(req, model, cfg);
  CHECK(sol.status == MpcStatus::solved);
  CHECK(sol.projected_gradient <= cfg.grad_tol);
  // PV always far above the pumps: only the softplus floor remains.
  CHECK(sol.objective <= 16 * 0.3 * 0.25 * std::log(2.0) / cfg.beta);
  for (const auto& u : sol.inputs) {
    CHECK(u.minCoeff() >= 0.0);
    CHECK(u.maxCoeff() <= 0.1);
  }
}

TEST_CASE("non-finite objective at h0 is a numerical error") {
  const auto model = fixtures::single_tank();
  const auto cfg = fixtures::config_for(1);
  MpcRequest req;
  req.h0 = Eigen::VectorXd::Constant(1, 60.0);  // barrier overflows
  req.t = 22.0 * 3600.0;
  req.scenarios = {std::vector<double>(8, 0.0)};
  req.price = {0.1, 0.1};
  req.demand = {0.0, 0.0};
  req.h_target = Eigen::VectorXd::Constant(1, 2.0);
  CHECK_THROWS_AS(solve_mpc(req, model, cfg), NumericalError);
}

TEST_CASE("periodic trajectory on the identified toy model") {
  const auto rep = identify_linear_model(default_toy_network(), ExcitationPlan{});
  const auto cfg = fixtures::config_for(2);
  const auto& shape = default_demand_shape();
  std::vector<double> demand, price;
  for (int k = 0; k < 24; ++k) {
    demand.push_back(0.07 * shape[k]);
    price.push_back(k >= 7 && k < 21 ? 0.3 : 0.12);
  }
  const std::vector<double> pv(96, 0.0);
  const auto tr = compute_periodic_trajectory(rep.model, cfg, demand, price, pv);
  REQUIRE(tr.h.size() == 25);
  CHECK(tr.u.size() == 24);
  CHECK((tr.h.front() - tr.h.back()).norm() < 1e-3);
  for (const auto& h : tr.h) {
    for (int i = 0; i < 2; ++i) {
      CHECK(h[i] >= rep.model.h_min[i] + 0.1);
      CHECK(h[i] <= rep.model.h_max[i] - 0.1);
    }
  }
  for (const auto& u : tr.u) {
    CHECK(u.minCoeff() >= 0.0);
    CHECK(u.maxCoeff() <= 0.1);
  }
}

TEST_CASE("idle day keeps the periodic trajectory still") {
  auto model = fixtures::single_tank();
  model.A.setZero();
  model = discretize(model, 3600.0);
  auto cfg = fixtures::config_for(1);
  const std::vector<double> zeros(24, 0.0), pv(96, 0.0);
  const auto tr = compute_periodic_trajectory(model, cfg, zeros, zeros, pv);
  for (const auto& u : tr.u) CHECK(u[0] < 1e-4);
  for (const auto& h : tr.h) CHECK(std::abs(h[0] - tr.h.front()[0]) < 1e-3);
}

TEST_CASE("fallback buffer shifts through the stored sequence") {
  FallbackBuffer fb;
  CHECK(fb.empty());
  CHECK_THROWS_AS(fb.next(), ControllerError);
  const Eigen::VectorXd a = Eigen::VectorXd::Constant(1, 1.0), b = Eigen::VectorXd::Constant(1, 2.0),
                        c = Eigen::VectorXd::Constant(1, 3.0);
  fb.store({a, b, c});
  CHECK(fb.next()[0] == 2.0);
  CHECK(fb.next()[0] == 3.0);
  CHECK(fb.next()[0] == 3.0);
  fb.store({a});
  CHECK(fb.next()[0] == 1.0);
}

TEST_CASE("config validation lists every violation") {
  MpcConfig c;
  c.barrier_a = -1.0;
  c.beta = 0.0;
  c.scenarios = 0;
  c.dt_pv = 700.0;
  try {
    c.validate(2);
    FAIL("expected ParameterError");
  } catch (const ParameterError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("barrier") != std::string::npos);
    CHECK(msg.find("beta") != std::string::npos);
    CHECK(msg.find("scenario") != std::string::npos);
    CHECK(msg.find("dt_pv") != std::string::npos);
  }
}

TEST_CASE("closed loop on the linear plant stays inside the state box") {
  const auto rep = identify_linear_model(default_toy_network(), ExcitationPlan{});
  const auto& model = rep.model;
  const auto cfg = fixtures::config_for(2);
  const auto& shape = default_demand_shape();
  std::vector<double> d_star, c_star;
  for (int k = 0; k < 24; ++k) {
    d_star.push_back(0.07 * shape[k]);
    c_star.push_back(k >= 7 && k < 21 ? 0.3 : 0.12);
  }
  const auto ref = compute_periodic_trajectory(model, cfg, d_star, c_star, std::vector<double>(96, 0.0));
  ClosedLoopFeeds feeds;
  feeds.days = 4;
  for (int d = 0; d < feeds.days; ++d) {
    feeds.price.insert(feeds.price.end(), c_star.begin(), c_star.end());
    feeds.demand.insert(feeds.demand.end(), d_star.begin(), d_star.end());
    feeds.demand_forecast.insert(feeds.demand_forecast.end(), d_star.begin(), d_star.end());
  }
  LinearPlant plant(model, ref.h.front(), cfg.substeps(), {0.1, 0.1}, 8);
  const auto res = run_closed_loop(plant, model, cfg, ref, feeds, 8);
  CHECK(res.ledger.constraint_violations == 0);
  CHECK(res.ledger.steps == 96);
  CHECK(res.trace.size() == 96);
  CHECK(res.ledger.min_input >= 0.0);
  CHECK(res.ledger.max_input <= 0.1);
  CHECK(res.ledger.grid_cost > 0.0);
  CHECK(res.ledger.pv_energy == 0.0);
  CHECK(res.ledger.grid_energy == doctest::Approx(res.ledger.pump_energy));
}

TEST_CASE("flat prices pull the loop onto the periodic trajectory") {
  const auto rep = identify_linear_model(default_toy_network(), ExcitationPlan{});
  const auto& model = rep.model;
  auto cfg = fixtures::config_for(2);
  const auto& shape = default_demand_shape();
  std::vector<double> d_star, c_star(24, 0.2);
  for (int k = 0; k < 24; ++k) d_star.push_back(0.07 * shape[k]);
  const auto ref = compute_periodic_trajectory(model, cfg, d_star, c_star, std::vector<double>(96, 0.0));
  ClosedLoopFeeds feeds;
  feeds.days = 6;
  for (int d = 0; d < feeds.days; ++d) {
    feeds.price.insert(feeds.price.end(), c_star.begin(), c_star.end());
    feeds.demand.insert(feeds.demand.end(), d_star.begin(), d_star.end());
    feeds.demand_forecast.insert(feeds.demand_forecast.end(), d_star.begin(), d_star.end());
  }
  const Eigen::VectorXd start = ref.h.front() + Eigen::Vector2d(0.1, -0.05);
  LinearPlant plant(model, start, cfg.substeps());
  const auto res = run_closed_loop(plant, model, cfg, ref, feeds, 3);
  REQUIRE(res.trace.size() == 6 * 24);
  CHECK(res.ledger.constraint_violations == 0);
  for (int d = 3; d < feeds.days; ++d) {
    const Eigen::VectorXd h = res.trace[static_cast<std::size_t>(d) * 24].h;
    CHECK((h - ref.end()).norm() <= cfg.terminal_radius);
  }
}
