#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace pvsizing {

inline constexpr double kHazenWilliamsExponent = 1.852;

/// Δh = K q |q|^0.852 (odd and increasing in q).
double hazen_williams_headloss(double k, double q);

struct TankSpec {
  std::string name;
  double area = 0.0;        // m²
  double elevation = 0.0;   // m, tank floor
  double init_level = 0.0;  // m
  int state = 0;            // index of the control state the tank belongs to
};

struct JunctionSpec {
  std::string name;
  double elevation = 0.0;      // m
  double demand_weight = 0.0;  // share of the aggregated demand drawn here
};

struct PipeSpec {
  std::string name;
  std::string from, to;
  double resistance = 0.0;  // K
};

struct PumpSpec {
  std::string name;
  std::string node;             // junction the pump discharges into
  double inlet_pressure = 0.0;  // N/m²
  double max_flow = 0.0;        // m³/s
};

struct StateBounds {
  double min_level = 0.0;  // m
  double max_level = 0.0;  // m
};

/// Small nonlinear network: fixed-head tanks, junctions, Hazen-Williams
/// pipes and pumps injecting a set flow into a junction. Tanks sharing a
/// `state` index are merged into one area-weighted control state.
struct ToyNetworkSpec {
  std::vector<TankSpec> tanks;
  std::vector<JunctionSpec> junctions;
  std::vector<PipeSpec> pipes;
  std::vector<PumpSpec> pumps;
  std::vector<StateBounds> states;
  double headloss_exponent = kHazenWilliamsExponent;  // 1 gives a linear law
  double rho_g = 9810.0;                              // N/m³
  double efficiency = 0.75;                           // pumping station λ

  int num_states() const { return static_cast<int>(states.size()); }
  int num_pumps() const { return static_cast<int>(pumps.size()); }

  /// Throws ParameterError listing every violated invariant.
  void validate() const;

  /// Tank levels -> control states (area-weighted mean per state).
  Eigen::VectorXd states_from_levels(const Eigen::VectorXd& levels) const;
  /// Uniform levels inside each state group.
  Eigen::VectorXd levels_from_states(const Eigen::VectorXd& states) const;
  Eigen::VectorXd initial_levels() const;
  Eigen::VectorXd max_flows() const;
};

/// Sectioned text format: [network], [tank NAME], [junction NAME],
/// [pipe NAME], [pump NAME], [state INDEX].
ToyNetworkSpec parse_network_spec(const std::string& text, const std::string& origin = "<string>");
ToyNetworkSpec load_network_spec(const std::string& path);
std::string format_network_spec(const ToyNetworkSpec& spec);

/// Two pumps, three tanks; tanks 1 and 2 form a single state.
ToyNetworkSpec default_toy_network();

struct HydraulicState {
  Eigen::VectorXd pipe_flow;      // m³/s, positive from -> to
  Eigen::VectorXd junction_head;  // m
  Eigen::VectorXd tank_inflow;    // m³/s
  Eigen::VectorXd outlet_pressure;  // N/m², per pump
  int iterations = 0;
};

/// Steady flows for given tank levels, pump flows and aggregated demand by
/// a global-gradient Newton iteration. Throws SimulationError on
/// non-convergence.
HydraulicState solve_hydraulics(const ToyNetworkSpec& spec, const Eigen::VectorXd& levels,
                                const Eigen::VectorXd& u, double demand,
                                const Eigen::VectorXd* warm_flows = nullptr);

/// One explicit Euler step of A_j dh_j/dt = net inflow. Requires dt <= 60 s.
Eigen::VectorXd truth_step(const ToyNetworkSpec& spec, const Eigen::VectorXd& levels,
                           const Eigen::VectorXd& u, double demand, double dt);

/// ḣ = A h + B1 u + B2 d + f,  p_out = C h + D u + p0.
struct LinearWdnModel {
  Eigen::MatrixXd A, B1, C, D;
  Eigen::VectorXd B2, drift, p0;
  Eigen::VectorXd p_in;      // N/m², per pump
  double efficiency = 0.75;
  Eigen::VectorXd u_max;     // m³/s
  Eigen::VectorXd h_min, h_max;  // m
  double dt = 0.0;           // s, 0 until discretized
  Eigen::MatrixXd Ad, Bd1;
  Eigen::VectorXd Bd2, fd;

  int n() const { return static_cast<int>(A.rows()); }
  int m() const { return static_cast<int>(B1.cols()); }
};

/// Pump flows and the aggregated demand profile used to excite the truth
/// network. Inputs change every `hold` seconds.
struct ExcitationPlan {
  std::uint64_t seed = 1;
  int days = 20;
  int train_days = 16;
  double record_dt = 300.0;  // s between regression samples
  double sim_dt = 60.0;      // s truth integration step
  double hold = 3600.0;      // s input hold / control interval
  double demand_mean = 0.07;  // m³/s
  double demand_noise = 0.2;  // relative, per hold interval
  double level_margin = 0.5;  // m beyond the state bounds before inputs are overridden
};

struct IdentificationReport {
  LinearWdnModel model;
  std::vector<double> r2_state;
  std::vector<double> r2_pressure;
  std::vector<double> residual_mean;  // per state, training data
  std::vector<double> one_step_error;  // max |e| per state over held-out hold intervals
  std::vector<double> w_box;           // one_step_error rounded outward to 0.1 m
  std::size_t samples = 0;
};

/// Least-squares identification of (A, B1, B2, f) from instantaneous state
/// derivatives and (C, D, p0) from outlet pressures. Throws
/// IdentificationError when the regressors are rank deficient.
IdentificationReport identify_linear_model(const ToyNetworkSpec& spec, const ExcitationPlan& plan);

/// Zero-order-hold discretisation by a scaled truncated exponential series.
LinearWdnModel discretize(LinearWdnModel model, double dt);

/// exp(M) by scaling and squaring of the Taylor series.
Eigen::MatrixXd matrix_exponential(const Eigen::MatrixXd& m, double tol = 1e-12);

Eigen::VectorXd linear_step(const LinearWdnModel& model, const Eigen::VectorXd& h,
                            const Eigen::VectorXd& u, double demand);

/// u_i (p_out,i - p_in,i) / λ in kW, floored at 0.
Eigen::VectorXd pump_power(const LinearWdnModel& model, const Eigen::VectorXd& h,
                           const Eigen::VectorXd& u);

double grid_power(double pump_kw, double pv_kw);

/// Hourly multipliers (mean 1) of the aggregated demand.
const std::vector<double>& default_demand_shape();

}  // namespace pvsizing
