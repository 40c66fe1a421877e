#include "pvsizing/empc.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "pvsizing/errors.hpp"

namespace pvsizing {

void MpcConfig::validate(int num_states) const {
  std::vector<std::string> bad;
  if (!(barrier_a > 0.0)) bad.push_back("mpc.barrier_a must be > 0");
  if (!(barrier_b > 0.0)) bad.push_back("mpc.barrier_b must be > 0");
  if (!(beta > 0.0)) bad.push_back("mpc.beta must be > 0");
  if (scenarios < 1) bad.push_back("mpc.scenarios must be >= 1");
  if (!(dt > 0.0) || !(dt_pv > 0.0)) {
    bad.push_back("mpc.dt and mpc.dt_pv must be > 0");
  } else {
    if (std::abs(dt / dt_pv - std::round(dt / dt_pv)) > 1e-9 || dt_pv > dt) {
      bad.push_back("mpc.dt must be a multiple of mpc.dt_pv");
    }
    if (std::abs(kDaySeconds / dt - std::round(kDaySeconds / dt)) > 1e-9) {
      bad.push_back("mpc.dt must divide one day");
    }
  }
  if (!(terminal_radius > 0.0)) bad.push_back("mpc.terminal_radius must be > 0");
  for (double w : w_box) {
    if (!(w >= 0.0)) bad.push_back("mpc.w_box entries must be >= 0");
  }
  if (num_states >= 0 && static_cast<int>(w_box.size()) != num_states) {
    bad.push_back("mpc.w_box needs one entry per state");
  }
  if (!(grad_tol > 0.0) || max_iter < 1) bad.push_back("mpc solver tolerances must be positive");
  if (terminal_weights.empty() || periodic_weights.empty()) {
    bad.push_back("mpc penalty weight ramps must not be empty");
  }
  if (!(terminal_inner > 0.0 && terminal_inner <= 1.0)) {
    bad.push_back("mpc.terminal_inner must lie in (0, 1]");
  }
  if (!(periodic_tol > 0.0)) bad.push_back("mpc.periodic_tol must be > 0");
  if (!bad.empty()) {
    std::string msg = "invalid MPC configuration:";
    for (const auto& b : bad) msg += "\n  - " + b;
    throw ParameterError(msg);
  }
}

int horizon_length(double t, double dt, double day) {
  if (!(dt > 0.0) || std::abs(day / dt - std::round(day / dt)) > 1e-9) {
    throw ParameterError("horizon_length: dt must divide the day length");
  }
  const double into = std::fmod(std::fmod(t, day) + day, day);
  return static_cast<int>(std::lround((day - into) / dt));
}

double barrier_cost(const Eigen::VectorXd& h, const Eigen::VectorXd& h_min,
                    const Eigen::VectorXd& h_max, double a, double b, Eigen::VectorXd* grad) {
  double cost = 0.0;
  if (grad) grad->setZero(h.size());
  for (Eigen::Index i = 0; i < h.size(); ++i) {
    const double lo = std::exp(a * (h_min[i] - h[i] + b));
    const double hi = std::exp(a * (h[i] - h_max[i] + b));
    cost += lo + hi;
    if (grad) (*grad)[i] = a * (hi - lo);
  }
  return cost;
}

double softplus(double x, double beta) {
  const double z = beta * x;
  if (z > 0.0) return x + std::log1p(std::exp(-z)) / beta;
  return std::log1p(std::exp(z)) / beta;
}

double softplus_slope(double x, double beta) {
  const double z = beta * x;
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double softplus_grid_cost(double pump_kw, double pv_kw, double price, double beta, double hours) {
  return price * softplus(pump_kw - pv_kw, beta) * hours;
}

double total_pump_power(const LinearWdnModel& model, const Eigen::VectorXd& h,
                        const Eigen::VectorXd& u) {
  const Eigen::VectorXd head = model.C * h + model.D * u + model.p0 - model.p_in;
  return u.dot(head) / model.efficiency / 1000.0;
}

double stage_cost(const Eigen::VectorXd& h, const Eigen::VectorXd& u,
                  std::span<const double> pv_slice, double price, const LinearWdnModel& model,
                  const MpcConfig& cfg) {
  const double hours = cfg.dt_pv / 3600.0;
  const double pp = total_pump_power(model, h, u);
  double cost = barrier_cost(h, model.h_min, model.h_max, cfg.barrier_a, cfg.barrier_b);
  for (double pv : pv_slice) cost += softplus_grid_cost(pp, pv, price, cfg.beta, hours);
  return cost;
}

std::vector<Eigen::VectorXd> HorizonProblem::rollout(const Eigen::VectorXd& u) const {
  const int m = model->m();
  std::vector<Eigen::VectorXd> h(horizon + 1);
  h[0] = h0;
  for (int j = 0; j < horizon; ++j) {
    h[j + 1] = model->Ad * h[j] + model->Bd1 * u.segment(j * m, m) + model->Bd2 * demand[j] +
               model->fd;
  }
  return h;
}

double HorizonProblem::evaluate(const Eigen::VectorXd& u, Eigen::VectorXd* grad_u,
                                Eigen::VectorXd* grad_h0) const {
  const LinearWdnModel& lm = *model;
  const int n = lm.n();
  const int m = lm.m();
  const int k_sub = cfg->substeps();
  const double hours = cfg->dt_pv / 3600.0;
  const double beta = cfg->beta;
  const double s_inv = 1.0 / static_cast<double>(pv.size());
  const double scale = 1.0 / lm.efficiency / 1000.0;

  const std::vector<Eigen::VectorXd> h = rollout(u);
  double f = 0.0;
  Eigen::VectorXd lam = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd g_h0 = Eigen::VectorXd::Zero(n);

  if (terminal) {
    const Eigen::VectorXd diff = h[horizon] - h_target;
    const double dist = diff.norm();
    if (dist > terminal_radius) {
      const double excess = dist - terminal_radius;
      f += terminal_weight * excess * excess;
      lam += 2.0 * terminal_weight * excess / dist * diff;
    }
  }
  if (periodic) {
    const Eigen::VectorXd diff = h[horizon] - h[0];
    f += periodic_weight * diff.squaredNorm();
    lam += 2.0 * periodic_weight * diff;
    g_h0 -= 2.0 * periodic_weight * diff;
  }

  if (grad_u) grad_u->resize(static_cast<Eigen::Index>(horizon) * m);
  Eigen::VectorXd g_bar(n);
  for (int j = horizon - 1; j >= 0; --j) {
    const auto uj = u.segment(j * m, m);
    const Eigen::VectorXd head = lm.C * h[j] + lm.D * uj + lm.p0 - lm.p_in;
    const double pp = uj.dot(head) * scale;
    double e = 0.0;
    double slope = 0.0;
    for (const auto& sc : pv) {
      for (int k = 0; k < k_sub; ++k) {
        const double x = pp - sc[static_cast<std::size_t>(j * k_sub + k)];
        const double z = beta * x;
        const double t = std::exp(-std::abs(z));
        e += std::max(x, 0.0) + std::log1p(t) / beta;
        slope += (z >= 0.0 ? 1.0 : t) / (1.0 + t);
      }
    }
    f += barrier_cost(h[j], h_min, h_max, cfg->barrier_a, cfg->barrier_b, &g_bar) +
         price[j] * hours * e * s_inv;
    const double dpp = price[j] * hours * slope * s_inv;
    if (grad_u) {
      const Eigen::VectorXd dp_du = (head + lm.D.transpose() * uj) * scale;
      grad_u->segment(j * m, m) = dpp * dp_du + lm.Bd1.transpose() * lam;
    }
    lam = g_bar + dpp * scale * (lm.C.transpose() * uj) + lm.Ad.transpose() * lam;
  }
  if (grad_h0) *grad_h0 = g_h0 + lam;
  return f;
}

Eigen::MatrixXd HorizonProblem::hessian(const Eigen::VectorXd& u) const {
  const LinearWdnModel& lm = *model;
  const int n = lm.n();
  const int m = lm.m();
  const int k_sub = cfg->substeps();
  const double hours = cfg->dt_pv / 3600.0;
  const double beta = cfg->beta;
  const double a = cfg->barrier_a;
  const double s_inv = 1.0 / static_cast<double>(pv.size());
  const double scale = 1.0 / lm.efficiency / 1000.0;
  const Eigen::Index dim = static_cast<Eigen::Index>(horizon) * m;

  const std::vector<Eigen::VectorXd> h = rollout(u);
  Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::MatrixXd sens = Eigen::MatrixXd::Zero(n, dim);  // dh_j / du
  Eigen::MatrixXd lift(n + m, dim);
  Eigen::MatrixXd local(n + m, n + m);
  for (int j = 0; j < horizon; ++j) {
    const auto uj = u.segment(j * m, m);
    const Eigen::VectorXd head = lm.C * h[j] + lm.D * uj + lm.p0 - lm.p_in;
    const double pp = uj.dot(head) * scale;
    double slope = 0.0;
    double curv = 0.0;
    for (const auto& sc : pv) {
      for (int k = 0; k < k_sub; ++k) {
        const double x = pp - sc[static_cast<std::size_t>(j * k_sub + k)];
        const double z = beta * x;
        const double t = std::exp(-std::abs(z));
        const double sig = (z >= 0.0 ? 1.0 : t) / (1.0 + t);
        slope += sig;
        curv += beta * sig * (1.0 - sig);
      }
    }
    const double w1 = price[j] * hours * slope * s_inv;
    const double w2 = price[j] * hours * curv * s_inv;
    Eigen::VectorXd grad_p(n + m);
    grad_p.head(n) = scale * (lm.C.transpose() * uj);
    grad_p.tail(m) = scale * (head + lm.D.transpose() * uj);
    local = w2 * grad_p * grad_p.transpose();
    local.block(n, n, m, m) += w1 * scale * (lm.D + lm.D.transpose());
    local.block(0, n, n, m) += w1 * scale * lm.C.transpose();
    local.block(n, 0, m, n) += w1 * scale * lm.C;
    for (int i = 0; i < n; ++i) {
      local(i, i) += a * a * (std::exp(a * (h_min[i] - h[j][i] + cfg->barrier_b)) +
                              std::exp(a * (h[j][i] - h_max[i] + cfg->barrier_b)));
    }
    lift.setZero();
    lift.topRows(n) = sens;
    lift.block(n, static_cast<Eigen::Index>(j) * m, m, m).setIdentity();
    hess.noalias() += lift.transpose() * local * lift;
    sens = lm.Ad * sens;
    sens.middleCols(static_cast<Eigen::Index>(j) * m, m) += lm.Bd1;
  }
  if (terminal) {
    const Eigen::VectorXd diff = h[horizon] - h_target;
    const double dist = diff.norm();
    if (dist > terminal_radius) {
      const Eigen::VectorXd dir = diff / dist;
      const Eigen::MatrixXd t_hess =
          2.0 * terminal_weight *
          ((1.0 - terminal_radius / dist) * Eigen::MatrixXd::Identity(n, n) +
           (terminal_radius / dist) * dir * dir.transpose());
      hess.noalias() += sens.transpose() * t_hess * sens;
    }
  }
  return hess;
}

double HorizonProblem::economic_cost(const Eigen::VectorXd& u) const {
  HorizonProblem plain = *this;
  plain.terminal = false;
  plain.periodic = false;
  return plain.evaluate(u);
}

namespace {

Eigen::VectorXd stack(const std::vector<Eigen::VectorXd>& cols, int count, int m,
                      const Eigen::VectorXd& fill) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(count) * m);
  for (int j = 0; j < count; ++j) {
    out.segment(j * m, m) = j < static_cast<int>(cols.size()) ? cols[j] : fill;
  }
  return out;
}

std::vector<Eigen::VectorXd> unstack(const Eigen::VectorXd& v, int m) {
  std::vector<Eigen::VectorXd> out(static_cast<std::size_t>(v.size() / m));
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = v.segment(static_cast<Eigen::Index>(j) * m, m);
  return out;
}

bool inside(const Eigen::VectorXd& h, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
            double slack = 1e-9) {
  return ((h - lo).array() >= -slack).all() && ((hi - h).array() >= -slack).all();
}

struct Candidate {
  Eigen::VectorXd u;
  double objective = std::numeric_limits<double>::infinity();
  double distance = std::numeric_limits<double>::infinity();
  bool feasible = false;
  int iterations = 0;
  int evaluations = 0;
  double pg = 0.0;
};

bool better(const Candidate& a, const Candidate& b) {
  if (a.feasible != b.feasible) return a.feasible;
  if (a.feasible) return a.objective < b.objective;
  return a.distance < b.distance;
}

}  // namespace

MpcSolution solve_mpc(const MpcRequest& req, const LinearWdnModel& model, const MpcConfig& cfg) {
  const int m = model.m();
  const int n = model.n();
  const int horizon = horizon_length(req.t, cfg.dt);
  const int k_sub = cfg.substeps();
  if (req.scenarios.empty()) throw InputError("solve_mpc needs at least one scenario");
  for (const auto& s : req.scenarios) {
    if (static_cast<int>(s.size()) < horizon * k_sub) {
      throw InputError("solve_mpc: scenario shorter than the horizon");
    }
  }
  if (static_cast<int>(req.demand.size()) < horizon || static_cast<int>(req.price.size()) < horizon) {
    throw InputError("solve_mpc: forecasts shorter than the horizon");
  }
  if (req.h0.size() != n || !req.h0.allFinite()) throw InputError("solve_mpc: bad initial state");

  HorizonProblem prob;
  prob.model = &model;
  prob.cfg = &cfg;
  prob.h0 = req.h0;
  prob.horizon = horizon;
  prob.price.assign(req.price.begin(), req.price.begin() + horizon);
  prob.demand.assign(req.demand.begin(), req.demand.begin() + horizon);
  prob.pv = req.scenarios;
  prob.h_min = model.h_min;
  prob.h_max = model.h_max;
  prob.terminal = true;
  prob.h_target = req.h_target;
  prob.terminal_radius = cfg.terminal_inner * cfg.terminal_radius;

  const Eigen::VectorXd umax = model.u_max;
  const Eigen::Index dim = static_cast<Eigen::Index>(horizon) * m;
  Eigen::VectorXd scale(dim);
  for (int j = 0; j < horizon; ++j) scale.segment(j * m, m) = umax;
  const Eigen::VectorXd lo = Eigen::VectorXd::Zero(dim);
  const Eigen::VectorXd hi = Eigen::VectorXd::Ones(dim);

  {
    const double f0 = prob.evaluate(Eigen::VectorXd::Zero(dim));
    if (!std::isfinite(f0)) throw NumericalError("solve_mpc: objective is not finite at h0");
  }

  std::vector<Eigen::VectorXd> starts;
  const Eigen::VectorXd half = 0.5 * umax;
  if (!req.warm_shifted.empty()) starts.push_back(stack(req.warm_shifted, horizon, m, half));
  if (!req.warm_reference.empty()) starts.push_back(stack(req.warm_reference, horizon, m, half));
  if (starts.empty()) starts.push_back(stack({}, horizon, m, half));

  BoxSolverOptions opt;
  opt.grad_tol = cfg.grad_tol;
  opt.max_iter = cfg.max_iter;

  Candidate best;
  for (const auto& start : starts) {
    Candidate c;
    Eigen::VectorXd v = start.cwiseQuotient(scale);
    for (double w : cfg.terminal_weights) {
      prob.terminal_weight = w;
      const BoxObjective obj = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
        const double f = prob.evaluate(x.cwiseProduct(scale), &g);
        g = g.cwiseProduct(scale);
        return f;
      };
      const BoxHessian hess = [&](const Eigen::VectorXd& x) {
        return Eigen::MatrixXd(scale.asDiagonal() * prob.hessian(x.cwiseProduct(scale)) *
                               scale.asDiagonal());
      };
      const BoxSolverResult r = minimize_box(obj, v, lo, hi, opt, hess);
      v = r.x;
      c.iterations += r.iterations;
      c.evaluations += r.evaluations;
      c.pg = r.projected_gradient;
      const auto h = prob.rollout(v.cwiseProduct(scale));
      c.distance = (h.back() - req.h_target).norm();
      if (c.distance <= cfg.terminal_radius) break;
    }
    c.u = v.cwiseProduct(scale);
    const auto h = prob.rollout(c.u);
    bool within = true;
    for (int j = 1; j <= horizon; ++j) within = within && inside(h[j], model.h_min, model.h_max);
    c.feasible = c.distance <= cfg.terminal_radius && within;
    c.objective = prob.economic_cost(c.u);
    if (better(c, best)) best = std::move(c);
  }

  MpcSolution sol;
  sol.inputs = unstack(best.u, m);
  sol.states = prob.rollout(best.u);
  sol.objective = best.objective;
  sol.terminal_distance = best.distance;
  sol.status = best.feasible ? MpcStatus::solved : MpcStatus::infeasible_fallback;
  sol.iterations = best.iterations;
  sol.evaluations = best.evaluations;
  sol.projected_gradient = best.pg;
  return sol;
}

Eigen::VectorXd constant_flow_input(const LinearWdnModel& model, const Eigen::VectorXd& h_ref,
                                    double mean_demand) {
  const Eigen::VectorXd rhs = -(model.A * h_ref + model.B2 * mean_demand + model.drift);
  Eigen::VectorXd u = model.B1.colPivHouseholderQr().solve(rhs);
  return u.cwiseMax(0.0).cwiseMin(model.u_max);
}

PeriodicTrajectory compute_periodic_trajectory(const LinearWdnModel& model, const MpcConfig& cfg,
                                               std::span<const double> demand,
                                               std::span<const double> price,
                                               std::span<const double> pv) {
  const int n = model.n();
  const int m = model.m();
  const int steps = cfg.steps_per_day();
  const int k_sub = cfg.substeps();
  if (static_cast<int>(demand.size()) != steps || static_cast<int>(price.size()) != steps ||
      static_cast<int>(pv.size()) != steps * k_sub) {
    throw InputError("compute_periodic_trajectory: average profiles must cover exactly one day");
  }
  if (static_cast<int>(cfg.w_box.size()) != n) {
    throw ParameterError("compute_periodic_trajectory: w_box needs one entry per state");
  }
  const Eigen::VectorXd w = Eigen::Map<const Eigen::VectorXd>(cfg.w_box.data(), n);
  const Eigen::VectorXd s_min = model.h_min + w;
  const Eigen::VectorXd s_max = model.h_max - w;
  if (((s_max - s_min).array() <= 0.0).any()) {
    throw OptimizationError("compute_periodic_trajectory: the state set shrunk by W is empty");
  }

  HorizonProblem prob;
  prob.model = &model;
  prob.cfg = &cfg;
  prob.horizon = steps;
  prob.price.assign(price.begin(), price.end());
  prob.demand.assign(demand.begin(), demand.end());
  prob.pv = {std::vector<double>(pv.begin(), pv.end())};
  prob.h_min = s_min;
  prob.h_max = s_max;
  prob.periodic = true;

  const Eigen::Index dim_u = static_cast<Eigen::Index>(steps) * m;
  const Eigen::Index dim = n + dim_u;
  Eigen::VectorXd offset = Eigen::VectorXd::Zero(dim);
  Eigen::VectorXd scale(dim);
  offset.head(n) = s_min;
  scale.head(n) = s_max - s_min;
  for (int j = 0; j < steps; ++j) scale.segment(n + j * m, m) = model.u_max;

  double mean_d = 0.0;
  for (double d : demand) mean_d += d;
  mean_d /= steps;
  const Eigen::VectorXd mid = 0.5 * (s_min + s_max);
  const Eigen::VectorXd u0 = constant_flow_input(model, mid, mean_d);
  Eigen::VectorXd x(dim);
  x.head(n) = mid;
  for (int j = 0; j < steps; ++j) x.segment(n + j * m, m) = u0;
  Eigen::VectorXd v = (x - offset).cwiseQuotient(scale);

  BoxSolverOptions opt;
  opt.grad_tol = cfg.grad_tol;
  opt.max_iter = 4 * cfg.max_iter;
  const Eigen::VectorXd lo = Eigen::VectorXd::Zero(dim);
  const Eigen::VectorXd hi = Eigen::VectorXd::Ones(dim);

  double gap = std::numeric_limits<double>::infinity();
  for (double wp : cfg.periodic_weights) {
    prob.periodic_weight = wp;
    const BoxObjective obj = [&](const Eigen::VectorXd& z, Eigen::VectorXd& g) {
      const Eigen::VectorXd phys = offset + z.cwiseProduct(scale);
      prob.h0 = phys.head(n);
      Eigen::VectorXd gu, gh;
      const double f = prob.evaluate(phys.tail(dim_u), &gu, &gh);
      g.resize(dim);
      g.head(n) = gh;
      g.tail(dim_u) = gu;
      g = g.cwiseProduct(scale);
      return f;
    };
    v = minimize_box(obj, v, lo, hi, opt).x;
    const Eigen::VectorXd phys = offset + v.cwiseProduct(scale);
    prob.h0 = phys.head(n);
    const auto h = prob.rollout(phys.tail(dim_u));
    gap = (h.back() - h.front()).norm();
    if (gap < cfg.periodic_tol) break;
  }
  if (!(gap < cfg.periodic_tol)) {
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "periodic trajectory: periodicity gap %.3g m not below %.3g m", gap,
                  cfg.periodic_tol);
    throw OptimizationError(buf);
  }

  const Eigen::VectorXd phys = offset + v.cwiseProduct(scale);
  prob.h0 = phys.head(n);
  PeriodicTrajectory out;
  out.u = unstack(phys.tail(dim_u), m);
  out.h = prob.rollout(phys.tail(dim_u));
  out.demand = prob.demand;
  out.price = prob.price;
  out.pv = prob.pv.front();
  out.periodicity_gap = gap;
  out.objective = prob.economic_cost(phys.tail(dim_u));
  for (const auto& col : out.h) {
    if (!inside(col, s_min, s_max, 0.0)) {
      throw OptimizationError("periodic trajectory leaves the state set shrunk by W");
    }
  }
  return out;
}

void FallbackBuffer::store(std::vector<Eigen::VectorXd> inputs) {
  inputs_ = std::move(inputs);
  shift_ = 0;
}

Eigen::VectorXd FallbackBuffer::next() {
  if (inputs_.empty()) throw ControllerError("no previous input sequence to fall back on");
  ++shift_;
  return inputs_[std::min(shift_, inputs_.size() - 1)];
}

LinearPlant::LinearPlant(const LinearWdnModel& model, Eigen::VectorXd h0, int substeps,
                         std::vector<double> w_box, std::uint64_t seed)
    : model_(model), h_(std::move(h0)), substeps_(substeps), w_box_(std::move(w_box)),
      rng_(seed) {
  if (model_.dt <= 0.0) throw ModelError("LinearPlant needs a discretized model");
}

std::vector<double> LinearPlant::advance(const Eigen::VectorXd& u, double demand) {
  const double kw = pump_power(model_, h_, u).sum();
  h_ = linear_step(model_, h_, u, demand);
  for (std::size_t i = 0; i < w_box_.size(); ++i) {
    std::uniform_real_distribution<double> dist(-w_box_[i], w_box_[i]);
    h_[static_cast<Eigen::Index>(i)] += dist(rng_);
  }
  return std::vector<double>(static_cast<std::size_t>(substeps_), kw);
}

TruthPlant::TruthPlant(const ToyNetworkSpec& spec, Eigen::VectorXd levels, double dt,
                       double dt_pv, double sim_dt)
    : spec_(spec), levels_(std::move(levels)), dt_(dt), dt_pv_(dt_pv), sim_dt_(sim_dt) {
  if (!(sim_dt_ > 0.0) || sim_dt_ > 60.0) throw ParameterError("TruthPlant: sim_dt must lie in (0, 60]");
  if (std::abs(dt_pv_ / sim_dt_ - std::round(dt_pv_ / sim_dt_)) > 1e-9) {
    throw ParameterError("TruthPlant: dt_pv must be a multiple of sim_dt");
  }
}

Eigen::VectorXd TruthPlant::state() const { return spec_.states_from_levels(levels_); }

std::vector<double> TruthPlant::advance(const Eigen::VectorXd& u, double demand) {
  const int k_sub = static_cast<int>(std::lround(dt_ / dt_pv_));
  const int inner = static_cast<int>(std::lround(dt_pv_ / sim_dt_));
  std::vector<double> out(static_cast<std::size_t>(k_sub), 0.0);
  for (int k = 0; k < k_sub; ++k) {
    double kw = 0.0;
    for (int s = 0; s < inner; ++s) {
      const HydraulicState hs = solve_hydraulics(spec_, levels_, u, demand);
      for (int i = 0; i < spec_.num_pumps(); ++i) {
        kw += std::max(0.0, u[i] * (hs.outlet_pressure[i] - spec_.pumps[i].inlet_pressure) /
                                spec_.efficiency / 1000.0);
      }
      levels_ = truth_step(spec_, levels_, u, demand, sim_dt_);
    }
    out[static_cast<std::size_t>(k)] = kw / inner;
  }
  return out;
}

namespace {

void check_feeds(const ClosedLoopFeeds& feeds, const MpcConfig& cfg) {
  const std::size_t steps = static_cast<std::size_t>(feeds.days) * cfg.steps_per_day();
  if (feeds.days < 1) throw InputError("closed loop needs at least one day");
  if (feeds.price.size() < steps || feeds.demand.size() < steps ||
      feeds.demand_forecast.size() < steps) {
    throw InputError("closed loop: price/demand feeds do not span the run");
  }
  if (!feeds.pv.empty()) {
    if (feeds.pv.size() < steps * static_cast<std::size_t>(cfg.substeps())) {
      throw InputError("closed loop: PV feed does not span the run");
    }
    if (feeds.pv_model && feeds.pv_states.size() < static_cast<std::size_t>(feeds.days)) {
      throw InputError("closed loop: one PV day state per day is required");
    }
  }
}

void account(ClosedLoopResult& res, const ClosedLoopFeeds& feeds, const MpcConfig& cfg,
             std::size_t idx, const Eigen::VectorXd& h, const Eigen::VectorXd& u,
             const std::vector<double>& pump_kw) {
  const int k_sub = cfg.substeps();
  const double hours = cfg.dt_pv / 3600.0;
  const double price = feeds.price[idx];
  TraceRow row;
  row.time = feeds.start_time + static_cast<double>(idx) * cfg.dt;
  row.h = h;
  row.u = u;
  row.demand = feeds.demand[idx];
  row.price = price;
  for (int k = 0; k < k_sub; ++k) {
    const double pv = feeds.pv.empty() ? 0.0 : feeds.pv[idx * k_sub + k];
    const double grid = grid_power(pump_kw[k], pv);
    row.pump_kw += pump_kw[k] / k_sub;
    row.pv_kw += pv / k_sub;
    row.grid_kw += grid / k_sub;
    res.ledger.grid_cost += price * grid * hours;
    res.ledger.grid_energy += grid * hours;
    res.ledger.pump_energy += pump_kw[k] * hours;
    res.ledger.pv_energy += pv * hours;
  }
  if (res.ledger.steps == 0) {
    res.ledger.min_input = u.minCoeff();
    res.ledger.max_input = u.maxCoeff();
  } else {
    res.ledger.min_input = std::min(res.ledger.min_input, u.minCoeff());
    res.ledger.max_input = std::max(res.ledger.max_input, u.maxCoeff());
  }
  ++res.ledger.steps;
  res.trace.push_back(std::move(row));
}

}  // namespace

ClosedLoopResult run_closed_loop(Plant& plant, const LinearWdnModel& model, const MpcConfig& cfg,
                                 const PeriodicTrajectory& reference, const ClosedLoopFeeds& feeds,
                                 std::uint64_t seed) {
  check_feeds(feeds, cfg);
  const int spd = cfg.steps_per_day();
  const int k_sub = cfg.substeps();
  const int n_pv = spd * k_sub;
  const bool stochastic = !feeds.pv.empty() && feeds.pv_model != nullptr;

  ClosedLoopResult res;
  FallbackBuffer fallback;
  std::vector<Eigen::VectorXd> previous;
  bool last_solved = false;

  for (int day = 0; day < feeds.days; ++day) {
    for (int k = 0; k < spd; ++k) {
      const std::size_t idx = static_cast<std::size_t>(day) * spd + k;
      const int horizon = spd - k;
      const Eigen::VectorXd h = plant.state();

      if (k == 0 && day > 0 && last_solved) {
        ++res.ledger.boundary_checks;
        res.ledger.max_boundary_distance =
            std::max(res.ledger.max_boundary_distance, (h - reference.end()).norm());
      }

      MpcRequest req;
      req.h0 = h;
      req.t = k * cfg.dt;
      req.h_target = reference.end();
      req.demand.assign(feeds.demand_forecast.begin() + idx,
                        feeds.demand_forecast.begin() + idx + horizon);
      req.price.assign(feeds.price.begin() + idx, feeds.price.begin() + idx + horizon);
      if (stochastic) {
        const auto day_pv = std::span<const double>(feeds.pv).subspan(
            static_cast<std::size_t>(day) * n_pv, static_cast<std::size_t>(n_pv));
        Rng rng = make_rng(seed, "scenarios", idx);
        req.scenarios = sample_scenarios_fast(feeds.pv_states[day], *feeds.pv_model,
                                              day_pv.first(static_cast<std::size_t>(k * k_sub)),
                                              cfg.scenarios, rng);
      } else if (!feeds.pv.empty()) {
        const auto first = feeds.pv.begin() + static_cast<std::ptrdiff_t>(idx * k_sub);
        req.scenarios = {std::vector<double>(first, first + horizon * k_sub)};
      } else {
        req.scenarios = {std::vector<double>(static_cast<std::size_t>(horizon * k_sub), 0.0)};
      }
      req.warm_reference.assign(reference.u.begin() + k, reference.u.end());
      if (previous.size() > 1) req.warm_shifted.assign(previous.begin() + 1, previous.end());

      const MpcSolution sol = solve_mpc(req, model, cfg);
      Eigen::VectorXd u;
      if (sol.status == MpcStatus::solved) {
        u = sol.inputs.front();
        fallback.store(sol.inputs);
        previous = sol.inputs;
        last_solved = true;
      } else {
        ++res.ledger.infeasible_steps;
        last_solved = false;
        try {
          u = fallback.next();
          ++res.ledger.fallback_steps;
        } catch (const ControllerError&) {
          u = Eigen::VectorXd::Zero(model.m());
          ++res.ledger.zero_input_steps;
        }
        previous = sol.inputs;
      }
      u = u.cwiseMax(0.0).cwiseMin(model.u_max);

      const std::vector<double> pump_kw = plant.advance(u, feeds.demand[idx]);
      account(res, feeds, cfg, idx, h, u, pump_kw);
      const Eigen::VectorXd next = plant.state();
      if (!inside(next, model.h_min, model.h_max, 0.0)) ++res.ledger.constraint_violations;
    }
  }
  return res;
}

ClosedLoopResult run_constant_flow(Plant& plant, const LinearWdnModel& model,
                                   const MpcConfig& cfg, const Eigen::VectorXd& u,
                                   const ClosedLoopFeeds& feeds) {
  check_feeds(feeds, cfg);
  const Eigen::VectorXd applied = u.cwiseMax(0.0).cwiseMin(model.u_max);
  ClosedLoopResult res;
  const std::size_t steps = static_cast<std::size_t>(feeds.days) * cfg.steps_per_day();
  for (std::size_t idx = 0; idx < steps; ++idx) {
    const Eigen::VectorXd h = plant.state();
    const std::vector<double> pump_kw = plant.advance(applied, feeds.demand[idx]);
    account(res, feeds, cfg, idx, h, applied, pump_kw);
    if (!inside(plant.state(), model.h_min, model.h_max, 0.0)) ++res.ledger.constraint_violations;
  }
  return res;
}

void write_trace_csv(const std::string& path, const std::vector<TraceRow>& trace) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write trace file " + path);
  const Eigen::Index n = trace.empty() ? 0 : trace.front().h.size();
  const Eigen::Index m = trace.empty() ? 0 : trace.front().u.size();
  out << "time";
  for (Eigen::Index i = 1; i <= n; ++i) out << ",h" << i;
  for (Eigen::Index i = 1; i <= m; ++i) out << ",u" << i;
  out << ",d_a,P_p_kw,P_pv_kw,P_grid_kw,price\n";
  char buf[64];
  const auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, ",%.10g", v);
    out << buf;
  };
  for (const auto& r : trace) {
    std::snprintf(buf, sizeof buf, "%.0f", r.time);
    out << buf;
    for (Eigen::Index i = 0; i < n; ++i) put(r.h[i]);
    for (Eigen::Index i = 0; i < m; ++i) put(r.u[i]);
    put(r.demand);
    put(r.pump_kw);
    put(r.pv_kw);
    put(r.grid_kw);
    put(r.price);
    out << '\n';
  }
}

}  // namespace pvsizing
