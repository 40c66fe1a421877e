#include "pvsizing/sizing.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <memory>
#include <numbers>

#include <Eigen/Dense>

namespace pvsizing {

void CostParams::validate() const {
  std::vector<std::string> bad;
  if (!(a_ins >= 0.0)) bad.push_back("cost.a_ins must be >= 0");
  if (!(a_m >= 0.0)) bad.push_back("cost.a_m must be >= 0");
  if (!(lifespan >= 1.0)) bad.push_back("cost.lifespan must be >= 1");
  if (!(degradation >= 0.0)) bad.push_back("cost.degradation must be >= 0");
  const double eff = efficiency();
  if (!(eff > 0.0 && eff <= 1.0)) bad.push_back("cost: lambda_pv must lie in (0, 1]");
  if (!bad.empty()) {
    std::string msg = "invalid cost parameters:";
    for (const auto& b : bad) msg += "\n  - " + b;
    throw ParameterError(msg);
  }
}

double capex(double x_kw, const CostParams& params) {
  if (!(x_kw >= 0.0)) throw ParameterError("capex: x must be >= 0");
  return params.a_ins * 1000.0 * x_kw;
}

std::vector<double> perturb_forecast(std::span<const double> demand, double amplitude,
                                     int harmonics, std::uint64_t seed) {
  std::vector<double> out(demand.begin(), demand.end());
  if (amplitude == 0.0 || harmonics < 1) return out;
  const std::size_t days = demand.size() / 24;
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t d = 0; d <= days; ++d) {
    Rng rng = make_rng(seed, "forecast", d);
    std::vector<double> ca(static_cast<std::size_t>(harmonics));
    std::vector<double> sa(static_cast<std::size_t>(harmonics));
    double norm = 0.0;
    for (int k = 0; k < harmonics; ++k) {
      ca[k] = normal(rng);
      sa[k] = normal(rng);
      norm += ca[k] * ca[k] + sa[k] * sa[k];
    }
    // Scaled so that the perturbation has RMS `amplitude` over the day.
    const double gain = norm > 0.0 ? amplitude * std::sqrt(2.0 / norm) : 0.0;
    for (int hr = 0; hr < 24; ++hr) {
      const std::size_t idx = d * 24 + static_cast<std::size_t>(hr);
      if (idx >= out.size()) break;
      double p = 0.0;
      for (int k = 0; k < harmonics; ++k) {
        const double w = 2.0 * std::numbers::pi * (k + 1) * hr / 24.0;
        p += ca[k] * std::cos(w) + sa[k] * std::sin(w);
      }
      out[idx] = std::max(0.0, out[idx] * (1.0 + gain * p));
    }
  }
  return out;
}

Workload synth_workload(std::uint64_t seed, const WorkloadOptions& opt) {
  if (opt.days < 1) throw ParameterError("workload: days must be >= 1");
  if (opt.price_profile.size() != 24) throw ParameterError("workload: price profile needs 24 values");
  Workload w;
  const auto& shape = default_demand_shape();
  Rng rng = make_rng(seed, "workload");
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int d = 0; d < opt.days; ++d) {
    const double season = std::cos(2.0 * std::numbers::pi * (d % 365) / 365.0);
    const double price_day = (1.0 + opt.price_seasonal * season) *
                             std::exp(opt.price_daily_noise * normal(rng));
    const double demand_day = (1.0 - opt.demand_seasonal * season) *
                              std::max(0.0, 1.0 + opt.demand_daily_noise * normal(rng));
    for (int hr = 0; hr < 24; ++hr) {
      w.price.push_back(opt.price_profile[hr] * price_day);
      w.demand.push_back(std::max(0.0, opt.demand_mean * shape[hr] * demand_day *
                                           (1.0 + opt.demand_hourly_noise * normal(rng))));
    }
  }
  w.demand_forecast = perturb_forecast(w.demand, opt.forecast_amplitude, opt.forecast_harmonics,
                                       derive_seed(seed, "workload.forecast"));
  return w;
}

std::vector<int> simulated_days(int days) {
  if (days < 1 || days > 365) throw ParameterError("simulated days must lie in [1, 365]");
  std::vector<int> out(static_cast<std::size_t>(days));
  for (int j = 0; j < days; ++j) out[j] = static_cast<int>(static_cast<long>(j) * 365 / days);
  return out;
}

std::uint64_t opex_seed(std::uint64_t base_seed, double p_stc) {
  return derive_seed(base_seed, "sizing", static_cast<std::uint64_t>(std::llround(p_stc * 1000.0)));
}

OpexResult yearly_grid_cost(double p_stc, const OpexStack& stack, std::uint64_t seed) {
  if (!(p_stc >= 0.0)) throw ParameterError("PV capacity must be >= 0");
  const MpcConfig& cfg = stack.mpc;
  const int spd = cfg.steps_per_day();
  const int k_sub = cfg.substeps();
  const int n_pv = spd * k_sub;
  if (n_pv != stack.samples_per_day) {
    throw ParameterError("PV samples per day must equal (T_day/dt)·(dt/dt_pv)");
  }
  const std::size_t year_steps = static_cast<std::size_t>(365) * spd;
  if (stack.workload.price.size() < year_steps || stack.workload.demand.size() < year_steps ||
      stack.workload.demand_forecast.size() < year_steps) {
    throw InputError("workload must cover 365 days of hourly values");
  }

  OpexResult res;
  res.p_stc = p_stc;
  res.seed = seed;

  PvStochasticModel pv_model;
  SampledYear year;
  const bool has_pv = p_stc > 0.0;
  std::vector<double> pv_star(static_cast<std::size_t>(n_pv), 0.0);
  if (has_pv) {
    const PvPowerSeries hist = generate_synthetic_series(
        stack.weather, stack.panel.scaled_to(p_stc), stack.samples_per_day, 0);
    pv_model = fit_stochastic_model(hist, stack.fit);
    Rng rng = make_rng(seed, "sample_year");
    year = sample_year(pv_model, pv_model.y_init, pv_model.first_day, 365, rng, stack.rejection);
    for (int d = 0; d < 365; ++d) {
      const auto day = year.power.day(static_cast<std::size_t>(d));
      for (int i = 0; i < n_pv; ++i) pv_star[i] += day[i] / 365.0;
    }
  }

  std::vector<double> d_star(static_cast<std::size_t>(spd), 0.0);
  std::vector<double> c_star(static_cast<std::size_t>(spd), 0.0);
  for (std::size_t idx = 0; idx < year_steps; ++idx) {
    d_star[idx % spd] += stack.workload.demand[idx] / 365.0;
    c_star[idx % spd] += stack.workload.price[idx] / 365.0;
  }
  res.reference = compute_periodic_trajectory(stack.model, cfg, d_star, c_star, pv_star);

  ClosedLoopFeeds feeds;
  const std::vector<int> days = simulated_days(stack.days);
  feeds.days = stack.days;
  for (int d : days) {
    const auto first = static_cast<std::ptrdiff_t>(d) * spd;
    const auto& wl = stack.workload;
    feeds.price.insert(feeds.price.end(), wl.price.begin() + first, wl.price.begin() + first + spd);
    feeds.demand.insert(feeds.demand.end(), wl.demand.begin() + first,
                        wl.demand.begin() + first + spd);
    feeds.demand_forecast.insert(feeds.demand_forecast.end(), wl.demand_forecast.begin() + first,
                                 wl.demand_forecast.begin() + first + spd);
    if (has_pv) {
      const auto day = year.power.day(static_cast<std::size_t>(d));
      feeds.pv.insert(feeds.pv.end(), day.begin(), day.end());
      feeds.pv_states.push_back(year.states[static_cast<std::size_t>(d)]);
    }
  }
  feeds.pv_model = has_pv ? &pv_model : nullptr;

  std::unique_ptr<Plant> plant;
  const Eigen::VectorXd h0 = res.reference.h.front();
  if (stack.plant == PlantKind::truth) {
    plant = std::make_unique<TruthPlant>(stack.network, stack.network.levels_from_states(h0),
                                         cfg.dt, cfg.dt_pv);
  } else {
    plant = std::make_unique<LinearPlant>(stack.model, h0, k_sub, stack.disturbance,
                                          derive_seed(seed, "disturbance"));
  }
  ClosedLoopResult loop =
      run_closed_loop(*plant, stack.model, cfg, res.reference, feeds, derive_seed(seed, "closed_loop"));
  res.ledger = loop.ledger;
  if (stack.keep_trace) res.trace = std::move(loop.trace);
  res.simulated_grid_cost = loop.ledger.grid_cost;
  res.grid_cost = loop.ledger.grid_cost * 365.0 / stack.days;
  res.opex = res.grid_cost;
  return res;
}

OpexResult yearly_opex(double x_kw, const CostParams& params, const OpexStack& stack,
                       std::uint64_t base_seed) {
  if (!(x_kw >= 0.0)) throw ParameterError("yearly_opex: x must be >= 0");
  params.validate();
  const double p = params.efficiency() * x_kw;
  OpexResult res = yearly_grid_cost(p, stack, opex_seed(base_seed, p));
  res.maintenance = params.a_m * x_kw;
  res.opex = res.maintenance + res.grid_cost;
  return res;
}

CostEvaluation total_cost(double x_kw, const CostParams& params, const OpexStack& stack,
                          std::uint64_t base_seed) {
  const OpexResult op = yearly_opex(x_kw, params, stack, base_seed);
  CostEvaluation ev;
  ev.x = x_kw;
  ev.capex = capex(x_kw, params);
  ev.opex = op.opex;
  ev.grid = op.grid_cost;
  ev.total = ev.capex + params.lifespan * ev.opex;
  ev.seed = op.seed;
  return ev;
}

NelderMeadResult nelder_mead_minimize(const std::function<double(double)>& f, double x0,
                                      const NelderMeadOptions& opt) {
  if (!(x0 >= opt.lower)) throw ParameterError("Nelder-Mead: x0 below the lower bound");
  NelderMeadResult res;
  std::map<double, double> seen;
  const auto eval = [&](double x, const char* op) {
    x = std::max(opt.lower, x);
    if (auto it = seen.find(x); it != seen.end()) return std::pair{x, it->second};
    const double v = f(x);
    ++res.evaluations;
    res.log.push_back({res.evaluations, x, v, op});
    if (!std::isfinite(v)) {
      throw NelderMeadError("Nelder-Mead: objective is not finite at x = " + std::to_string(x),
                            res.log);
    }
    seen.emplace(x, v);
    return std::pair{x, v};
  };

  double step = opt.step;
  if (!(step > 0.0)) step = x0 > 0.0 ? 0.25 * x0 : 50.0;
  auto [xb, fb] = eval(x0, "init");
  auto [xw, fw] = eval(x0 + step, "init");
  while (true) {
    if (fw < fb) {
      std::swap(xb, xw);
      std::swap(fb, fw);
    }
    if (std::abs(xw - xb) < opt.tol_x) {
      res.converged = true;
      break;
    }
    if (res.evaluations >= opt.max_evals) break;
    const double c = xb;
    const auto [xr, fr] = eval(c + (c - xw), "reflect");
    if (fr < fb) {
      if (res.evaluations >= opt.max_evals) {
        xw = xr;
        fw = fr;
        continue;
      }
      const auto [xe, fe] = eval(c + 2.0 * (xr - c), "expand");
      if (fe < fr) {
        xw = xe;
        fw = fe;
      } else {
        xw = xr;
        fw = fr;
      }
      continue;
    }
    if (res.evaluations >= opt.max_evals) break;
    if (fr < fw) {
      const auto [xc, fc] = eval(c + 0.5 * (xr - c), "contract");
      if (fc <= fr) {
        xw = xc;
        fw = fc;
        continue;
      }
    } else {
      const auto [xc, fc] = eval(c + 0.5 * (xw - c), "contract");
      if (fc < fw) {
        xw = xc;
        fw = fc;
        continue;
      }
    }
    if (res.evaluations >= opt.max_evals) break;
    const auto [xs, fs] = eval(xb + 0.5 * (xw - xb), "shrink");
    xw = xs;
    fw = fs;
  }
  if (fw < fb) {
    std::swap(xb, xw);
    std::swap(fb, fw);
  }
  res.x_best = xb;
  res.f_best = fb;
  return res;
}

ExponentialFit fit_exponential(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  if (n != y.size()) throw InputError("fit_exponential: x and cost differ in length");
  if (n < 4) throw FitError("fit_exponential needs at least 4 points");
  double ymin = y[0], ymax = y[0], ymean = 0.0, xscale = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(y[i] > 0.0)) throw FitError("fit_exponential: costs must be positive");
    ymin = std::min(ymin, y[i]);
    ymax = std::max(ymax, y[i]);
    ymean += y[i] / static_cast<double>(n);
    xscale = std::max(xscale, std::abs(x[i]));
  }
  ExponentialFit fit;
  if (ymax - ymin <= 1e-12 * ymax || xscale == 0.0) {
    fit.c0 = ymean;
    for (std::size_t i = 0; i < n; ++i) fit.rss += (y[i] - ymean) * (y[i] - ymean);
    return fit;
  }

  // Work in s = x / xscale; b = beta / xscale.
  std::vector<double> s(n);
  for (std::size_t i = 0; i < n; ++i) s[i] = x[i] / xscale;

  // Log-linear start with c0 just below the smallest cost.
  double c0 = ymin - 0.05 * (ymax - ymin);
  double la = 0.0, beta = 0.0;
  {
    Eigen::MatrixXd design(n, 2);
    Eigen::VectorXd rhs(n);
    for (std::size_t i = 0; i < n; ++i) {
      design(i, 0) = 1.0;
      design(i, 1) = -s[i];
      rhs[i] = std::log(y[i] - c0);
    }
    const Eigen::Vector2d sol = design.colPivHouseholderQr().solve(rhs);
    la = sol[0];
    beta = sol[1];
  }
  Eigen::Vector3d theta(std::exp(la), beta, c0);
  const auto residuals = [&](const Eigen::Vector3d& t, Eigen::VectorXd& r) {
    r.resize(n);
    for (std::size_t i = 0; i < n; ++i) r[i] = t[0] * std::exp(-t[1] * s[i]) + t[2] - y[i];
    return r.squaredNorm();
  };
  Eigen::VectorXd r;
  double rss = residuals(theta, r);
  double mu = 1e-3;
  bool converged = false;
  int it = 0;
  Eigen::MatrixXd jac(n, 3);
  for (; it < 500; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      const double e = std::exp(-theta[1] * s[i]);
      jac(i, 0) = e;
      jac(i, 1) = -theta[0] * s[i] * e;
      jac(i, 2) = 1.0;
    }
    const Eigen::Matrix3d jtj = jac.transpose() * jac;
    const Eigen::Vector3d jtr = jac.transpose() * r;
    bool improved = false;
    for (int tries = 0; tries < 30; ++tries) {
      Eigen::Matrix3d lhs = jtj;
      lhs.diagonal() += mu * jtj.diagonal().cwiseMax(1e-300);
      const Eigen::Vector3d delta = lhs.ldlt().solve(-jtr);
      const Eigen::Vector3d cand = theta + delta;
      Eigen::VectorXd rc;
      const double rss_c = residuals(cand, rc);
      if (std::isfinite(rss_c) && rss_c <= rss) {
        const double rel = delta.cwiseAbs().cwiseQuotient(theta.cwiseAbs().cwiseMax(1e-12)).maxCoeff();
        theta = cand;
        r = rc;
        const double drop = rss - rss_c;
        rss = rss_c;
        mu = std::max(mu / 3.0, 1e-12);
        improved = true;
        if (rel < 1e-12 || drop <= 1e-15 * rss_c || rss_c <= 1e-24 * ymean * ymean * n) {
          converged = true;
        }
        break;
      }
      mu *= 4.0;
    }
    if (!improved) {
      converged = rss <= 1e-10 * ymean * ymean * static_cast<double>(n) || mu > 1e8;
      break;
    }
    if (converged) break;
  }
  if (!converged || !theta.allFinite()) {
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "exponential fit did not converge after %d iterations (rss %.6g)", it, rss);
    throw FitError(buf);
  }
  fit.a = theta[0];
  fit.b = theta[1] / xscale;
  fit.c0 = theta[2];
  fit.rss = rss;
  fit.iterations = it;
  return fit;
}

double smoothed_optimum(const ExponentialFit& fit, const CostParams& params, double x_max,
                        double tol) {
  if (!(x_max >= 0.0)) throw ParameterError("smoothed_optimum: x_max must be >= 0");
  const double lam = params.efficiency();
  const auto total = [&](double x) {
    return capex(x, params) + params.lifespan * (params.a_m * x + fit(lam * x));
  };
  const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
  double lo = 0.0, hi = x_max;
  double x1 = hi - ratio * (hi - lo), x2 = lo + ratio * (hi - lo);
  double f1 = total(x1), f2 = total(x2);
  while (hi - lo > tol * std::max(1.0, x_max)) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - ratio * (hi - lo);
      f1 = total(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + ratio * (hi - lo);
      f2 = total(x2);
    }
  }
  double best = 0.5 * (lo + hi);
  double fbest = total(best);
  for (double edge : {0.0, x_max}) {
    const double fe = total(edge);
    if (fe < fbest) {
      best = edge;
      fbest = fe;
    }
  }
  return best;
}

std::vector<SizingResult> run_sizing(const OpexStack& stack, const SizingOptions& options,
                                     std::uint64_t base_seed,
                                     const std::function<void(const std::string&)>& progress) {
  if (options.lifespans.empty()) throw ParameterError("sizing needs at least one lifespan");
  std::map<long long, double> grid_cache;  // keyed by λ_pv·x in 1e-6 kW
  int counter = 0;
  std::vector<SizingResult> results;

  for (double ell : options.lifespans) {
    CostParams params = options.cost;
    params.lifespan = ell;
    params.validate();
    const double lam = params.efficiency();
    SizingResult sr;
    sr.lifespan = ell;

    const auto eval = [&](double x) {
      const double p = lam * x;
      const long long key = std::llround(p * 1e6);
      auto it = grid_cache.find(key);
      const std::uint64_t seed = opex_seed(base_seed, p);
      if (it == grid_cache.end()) {
        const OpexResult op = yearly_grid_cost(p, stack, seed);
        it = grid_cache.emplace(key, op.grid_cost).first;
        ++counter;
        if (progress) {
          char buf[200];
          std::snprintf(buf, sizeof buf,
                        "lifespan %g: x = %.3f kW, grid %.2f EUR/yr, infeasible %d, violations %d",
                        ell, x, op.grid_cost, op.ledger.infeasible_steps,
                        op.ledger.constraint_violations);
          progress(buf);
        }
      }
      CostEvaluation ev;
      ev.x = x;
      ev.capex = capex(x, params);
      ev.grid = it->second;
      ev.opex = params.a_m * x + ev.grid;
      ev.total = ev.capex + ell * ev.opex;
      ev.seed = seed;
      ev.evals = counter;
      const bool fresh = std::none_of(sr.points.begin(), sr.points.end(),
                                      [&](const CostEvaluation& e) { return e.x == x; });
      if (fresh) sr.points.push_back(ev);
      return ev.total;
    };

    sr.zero_total = eval(0.0);
    sr.search = nelder_mead_minimize(eval, options.x0, options.search);
    sr.best_x = sr.search.x_best;
    sr.best_total = sr.search.f_best;
    if (sr.zero_total < sr.best_total) {
      sr.best_x = 0.0;
      sr.best_total = sr.zero_total;
    }
    results.push_back(std::move(sr));
  }

  const auto fit_points = [&](const std::vector<const SizingResult*>& runs) {
    std::map<long long, std::pair<double, double>> pts;
    for (const SizingResult* run : runs) {
      CostParams params = options.cost;
      params.lifespan = run->lifespan;
      const double lam = params.efficiency();
      for (const auto& e : run->points) {
        pts.emplace(std::llround(lam * e.x * 1e6), std::pair{lam * e.x, e.grid});
      }
    }
    std::vector<double> px, py;
    for (const auto& [k, v] : pts) {
      px.push_back(v.first);
      py.push_back(v.second);
    }
    return fit_exponential(px, py);
  };

  ExponentialFit pooled;
  if (options.pooled_fit) {
    std::vector<const SizingResult*> all;
    for (const auto& r : results) all.push_back(&r);
    pooled = fit_points(all);
  }
  for (auto& r : results) {
    CostParams params = options.cost;
    params.lifespan = r.lifespan;
    r.fit = options.pooled_fit ? pooled : fit_points({&r});
    double x_max = 0.0;
    for (const auto& e : r.points) x_max = std::max(x_max, e.x);
    r.exp_fit_x = smoothed_optimum(r.fit, params, x_max);
  }
  return results;
}

}  // namespace pvsizing
