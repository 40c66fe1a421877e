#include "pvsizing/box_solver.hpp"

#include <cmath>
#include <vector>

namespace pvsizing {

namespace {

bool pinned(double x, double g, double lo, double hi) {
  return (x <= lo && g > 0.0) || (x >= hi && g < 0.0);
}

}  // namespace

double projected_gradient_norm(const Eigen::VectorXd& x, const Eigen::VectorXd& g,
                               const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
  double n = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (!pinned(x[i], g[i], lo[i], hi[i])) n = std::max(n, std::abs(g[i]));
  }
  return n;
}

BoxSolverResult minimize_box(const BoxObjective& f, Eigen::VectorXd x0, const Eigen::VectorXd& lo,
                             const Eigen::VectorXd& hi, const BoxSolverOptions& opt,
                             const BoxHessian& hessian) {
  const auto n = x0.size();
  BoxSolverResult res;
  res.x = x0.cwiseMax(lo).cwiseMin(hi);
  Eigen::VectorXd g(n);
  res.f = f(res.x, g);
  res.evaluations = 1;
  if (!std::isfinite(res.f)) return res;

  Eigen::MatrixXd b = Eigen::MatrixXd::Identity(n, n);
  bool scaled = false;
  Eigen::VectorXd g_new(n);
  std::vector<Eigen::Index> free;
  free.reserve(n);

  for (res.iterations = 0; res.iterations < opt.max_iter; ++res.iterations) {
    res.projected_gradient = projected_gradient_norm(res.x, g, lo, hi);
    if (res.projected_gradient <= opt.grad_tol) {
      res.converged = true;
      break;
    }

    if (hessian) b = hessian(res.x);
    // Variables on a bound whose step would leave the box are fixed and the
    // reduced system solved again.
    std::vector<char> fixed(static_cast<std::size_t>(n), 0);
    for (Eigen::Index i = 0; i < n; ++i) fixed[i] = pinned(res.x[i], g[i], lo[i], hi[i]);
    Eigen::VectorXd d = Eigen::VectorXd::Zero(n);
    bool model_ok = true;
    for (Eigen::Index pass = 0; pass <= n; ++pass) {
      free.clear();
      for (Eigen::Index i = 0; i < n; ++i) {
        if (!fixed[i]) free.push_back(i);
      }
      const auto nf = static_cast<Eigen::Index>(free.size());
      Eigen::MatrixXd bf(nf, nf);
      Eigen::VectorXd gf(nf);
      for (Eigen::Index a = 0; a < nf; ++a) {
        gf[a] = g[free[a]];
        for (Eigen::Index c = 0; c < nf; ++c) bf(a, c) = b(free[a], free[c]);
      }
      Eigen::LLT<Eigen::MatrixXd> llt(bf);
      if (hessian && llt.info() != Eigen::Success && nf > 0) {
        const double base = std::max(bf.diagonal().cwiseAbs().maxCoeff(), 1e-12);
        for (double shift = 1e-8 * base; llt.info() != Eigen::Success && shift < 1e8 * base;
             shift *= 10.0) {
          llt.compute(bf + shift * Eigen::MatrixXd::Identity(nf, nf));
        }
      }
      d.setZero();
      if (llt.info() != Eigen::Success) {
        model_ok = false;
        break;
      }
      const Eigen::VectorXd df = llt.solve(-gf);
      for (Eigen::Index a = 0; a < nf; ++a) d[free[a]] = df[a];
      bool changed = false;
      for (Eigen::Index i : free) {
        if ((res.x[i] <= lo[i] && d[i] < 0.0) || (res.x[i] >= hi[i] && d[i] > 0.0)) {
          fixed[i] = 1;
          changed = true;
        }
      }
      if (!changed) break;
    }
    if (!model_ok || !(d.dot(g) < 0.0)) {
      d.setZero();
      for (Eigen::Index i = 0; i < n; ++i) {
        if (!pinned(res.x[i], g[i], lo[i], hi[i])) d[i] = -g[i];
      }
      b.setIdentity();
      scaled = false;
    }

    double t = 1.0;
    bool accepted = false;
    Eigen::VectorXd x_new;
    double f_new = 0.0;
    for (int k = 0; k < opt.max_backtracks; ++k, t *= 0.5) {
      x_new = (res.x + t * d).cwiseMax(lo).cwiseMin(hi);
      const Eigen::VectorXd step = x_new - res.x;
      if (step.lpNorm<Eigen::Infinity>() == 0.0) break;
      f_new = f(x_new, g_new);
      ++res.evaluations;
      if (std::isfinite(f_new) && f_new <= res.f + opt.armijo * g.dot(step)) {
        accepted = true;
        break;
      }
    }
    if (!accepted) break;

    const Eigen::VectorXd s = x_new - res.x;
    const Eigen::VectorXd y = g_new - g;
    res.x = x_new;
    res.f = f_new;
    g = g_new;
    if (hessian) continue;

    const double sy = s.dot(y);
    if (!scaled && sy > 0.0) {
      b = Eigen::MatrixXd::Identity(n, n) * (y.squaredNorm() / sy);
      scaled = true;
    }
    const Eigen::VectorXd bs = b * s;
    const double sbs = s.dot(bs);
    if (sbs <= 0.0) continue;
    // Powell damping keeps the update positive definite.
    const double theta = sy >= 0.2 * sbs ? 1.0 : 0.8 * sbs / (sbs - sy);
    const Eigen::VectorXd r = theta * y + (1.0 - theta) * bs;
    const double sr = s.dot(r);
    if (sr <= 0.0) continue;
    b += r * r.transpose() / sr - bs * bs.transpose() / sbs;
  }
  res.projected_gradient = projected_gradient_norm(res.x, g, lo, hi);
  if (res.projected_gradient <= opt.grad_tol) res.converged = true;
  return res;
}

}  // namespace pvsizing
