#include <doctest.h>

#include <cmath>
#include <random>

#include "pvsizing/box_solver.hpp"

using namespace pvsizing;

TEST_CASE("separable quadratic is clamped onto the box") {
  const Eigen::VectorXd c = (Eigen::VectorXd(4) << -1.0, 0.3, 2.0, 0.7).finished();
  const Eigen::VectorXd w = (Eigen::VectorXd(4) << 1.0, 10.0, 0.5, 3.0).finished();
  const BoxObjective f = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    g = w.cwiseProduct(x - c);
    return 0.5 * (x - c).cwiseAbs2().dot(w);
  };
  const Eigen::VectorXd lo = Eigen::VectorXd::Zero(4), hi = Eigen::VectorXd::Ones(4);
  const auto r = minimize_box(f, Eigen::VectorXd::Constant(4, 0.5), lo, hi);
  CHECK(r.converged);
  const Eigen::VectorXd expected = c.cwiseMax(lo).cwiseMin(hi);
  CHECK((r.x - expected).cwiseAbs().maxCoeff() < 1e-6);

  const BoxHessian hess = [&](const Eigen::VectorXd&) { return Eigen::MatrixXd(w.asDiagonal()); };
  const auto rn = minimize_box(f, Eigen::VectorXd::Constant(4, 0.5), lo, hi, {}, hess);
  CHECK(rn.converged);
  CHECK((rn.x - expected).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(rn.iterations <= 3);
}

TEST_CASE("Rosenbrock inside a box") {
  const BoxObjective f = [](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    g.resize(2);
    g[0] = -2.0 * (1.0 - x[0]) - 400.0 * x[0] * (x[1] - x[0] * x[0]);
    g[1] = 200.0 * (x[1] - x[0] * x[0]);
    return (1.0 - x[0]) * (1.0 - x[0]) + 100.0 * std::pow(x[1] - x[0] * x[0], 2);
  };
  BoxSolverOptions opt;
  opt.max_iter = 500;
  const auto free = minimize_box(f, Eigen::Vector2d(-1.2, 1.0), Eigen::Vector2d(-2, -2),
                                 Eigen::Vector2d(2, 2), opt);
  CHECK(free.converged);
  CHECK((free.x - Eigen::Vector2d(1.0, 1.0)).norm() < 1e-4);

  // Upper bound on x0 below the unconstrained minimiser: optimum at x0 = 0.5, x1 = 0.25.
  const auto boxed = minimize_box(f, Eigen::Vector2d(0.0, 0.0), Eigen::Vector2d(-2, -2),
                                  Eigen::Vector2d(0.5, 2), opt);
  CHECK(boxed.converged);
  CHECK(boxed.x[0] == doctest::Approx(0.5));
  CHECK(boxed.x[1] == doctest::Approx(0.25).epsilon(1e-4));
}

TEST_CASE("iterates never leave the box") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> z;
  Eigen::MatrixXd m(6, 6);
  for (int i = 0; i < 36; ++i) m(i / 6, i % 6) = z(rng);
  const Eigen::MatrixXd q = m.transpose() * m + Eigen::MatrixXd::Identity(6, 6);
  Eigen::VectorXd b(6);
  for (int i = 0; i < 6; ++i) b[i] = 5.0 * z(rng);
  const Eigen::VectorXd lo = Eigen::VectorXd::Constant(6, -0.5), hi = Eigen::VectorXd::Constant(6, 0.5);
  bool inside = true;
  const BoxObjective f = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    inside = inside && (x - lo).minCoeff() >= 0.0 && (hi - x).minCoeff() >= 0.0;
    g = q * x - b;
    return 0.5 * x.dot(q * x) - b.dot(x);
  };
  const auto r = minimize_box(f, Eigen::VectorXd::Zero(6), lo, hi);
  CHECK(inside);
  CHECK(r.converged);
  Eigen::VectorXd g;
  f(r.x, g);
  CHECK(projected_gradient_norm(r.x, g, lo, hi) <= 1e-6);
}

TEST_CASE("projected gradient ignores components pushing outward") {
  const Eigen::Vector2d lo(0.0, 0.0), hi(1.0, 1.0);
  CHECK(projected_gradient_norm(Eigen::Vector2d(0.0, 1.0), Eigen::Vector2d(1.0, -1.0), lo, hi) == 0.0);
  CHECK(projected_gradient_norm(Eigen::Vector2d(0.0, 0.5), Eigen::Vector2d(-2.0, 0.5), lo, hi) == 2.0);
}
