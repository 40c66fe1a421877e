#pragma once

#include <random>

#include "pvsizing/empc.hpp"

namespace fixtures {

/// One tank fed by one pump, drained by the demand.
inline pvsizing::LinearWdnModel single_tank(double dt = 3600.0) {
  pvsizing::LinearWdnModel m;
  m.A = Eigen::MatrixXd::Constant(1, 1, -1e-6);
  m.B1 = Eigen::MatrixXd::Constant(1, 1, 1.0 / 500.0);
  m.B2 = Eigen::VectorXd::Constant(1, -1.0 / 500.0);
  m.drift = Eigen::VectorXd::Zero(1);
  m.C = Eigen::MatrixXd::Constant(1, 1, 9810.0);
  m.D = Eigen::MatrixXd::Constant(1, 1, 2.0e5);
  m.p0 = Eigen::VectorXd::Constant(1, 3.0e5);
  m.p_in = Eigen::VectorXd::Constant(1, 49050.0);
  m.efficiency = 0.75;
  m.u_max = Eigen::VectorXd::Constant(1, 0.1);
  m.h_min = Eigen::VectorXd::Constant(1, 1.0);
  m.h_max = Eigen::VectorXd::Constant(1, 4.0);
  return pvsizing::discretize(m, dt);
}

/// Random coupled two-tank, two-pump model.
inline pvsizing::LinearWdnModel random_model(std::mt19937_64& rng, double dt = 3600.0) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  pvsizing::LinearWdnModel m;
  m.A.resize(2, 2);
  m.A << -2e-5 * (1 + u(rng)), 1e-5 * u(rng), 1e-5 * u(rng), -2e-5 * (1 + u(rng));
  m.B1.resize(2, 2);
  m.B1 << 1.0 / (400 + 400 * u(rng)), 1e-4 * u(rng), 1e-4 * u(rng), 1.0 / (400 + 400 * u(rng));
  m.B2 = Eigen::Vector2d(-5e-4 * (1 + u(rng)), -5e-4 * (1 + u(rng)));
  m.drift = Eigen::Vector2d(1e-6 * u(rng), -1e-6 * u(rng));
  m.C.resize(2, 2);
  m.C << 9810.0, 500.0 * u(rng), 300.0 * u(rng), 9810.0;
  m.D.resize(2, 2);
  m.D << 1e5 * (1 + u(rng)), 1e4 * u(rng), 1e4 * u(rng), 1e5 * (1 + u(rng));
  m.p0 = Eigen::Vector2d(2e5 + 1e5 * u(rng), 2e5 + 1e5 * u(rng));
  m.p_in = Eigen::Vector2d(49050.0, 49050.0);
  m.efficiency = 0.75;
  m.u_max = Eigen::Vector2d(0.1, 0.1);
  m.h_min = Eigen::Vector2d(1.5, 1.4);
  m.h_max = Eigen::Vector2d(3.0, 2.8);
  return pvsizing::discretize(m, dt);
}

inline pvsizing::MpcConfig config_for(int states) {
  pvsizing::MpcConfig c;
  c.w_box.assign(states, 0.1);
  return c;
}

}  // namespace fixtures
