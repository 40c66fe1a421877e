#pragma once

#include <functional>

#include <Eigen/Dense>

namespace pvsizing {

/// f(x) with its gradient written into g.
using BoxObjective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& g)>;

/// Optional exact Hessian; when given it replaces the BFGS model.
using BoxHessian = std::function<Eigen::MatrixXd(const Eigen::VectorXd& x)>;

struct BoxSolverOptions {
  double grad_tol = 1e-6;  // on the projected gradient, infinity norm
  int max_iter = 200;
  int max_backtracks = 40;
  double armijo = 1e-4;
};

struct BoxSolverResult {
  Eigen::VectorXd x;
  double f = 0.0;
  double projected_gradient = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
};

/// Projected quasi-Newton descent on lo <= x <= hi. A damped dense BFGS
/// model (or the exact Hessian, shifted until positive definite) is
/// restricted to the free variables; steps are projected onto the box and
/// backtracked along the projection arc.
BoxSolverResult minimize_box(const BoxObjective& f, Eigen::VectorXd x0,
                             const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                             const BoxSolverOptions& options = {},
                             const BoxHessian& hessian = nullptr);

/// Infinity norm of the gradient with components pushing out of the box removed.
double projected_gradient_norm(const Eigen::VectorXd& x, const Eigen::VectorXd& g,
                               const Eigen::VectorXd& lo, const Eigen::VectorXd& hi);

}  // namespace pvsizing
