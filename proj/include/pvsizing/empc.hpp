#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pvsizing/box_solver.hpp"
#include "pvsizing/pv_stochastic.hpp"
#include "pvsizing/random.hpp"
#include "pvsizing/wdn_network.hpp"

namespace pvsizing {

inline constexpr double kDaySeconds = 86400.0;

struct MpcConfig {
  double barrier_a = 80.0;  // 1/m
  double barrier_b = 0.2;   // m
  double beta = 1.0;        // 1/kW
  int scenarios = 10;
  double dt = 3600.0;     // s
  double dt_pv = 900.0;   // s
  double terminal_radius = 0.05;  // m
  std::vector<double> w_box = {0.1, 0.1};  // half-widths of W per state, m
  double grad_tol = 1e-6;
  int max_iter = 300;
  std::vector<double> terminal_weights = {1e2, 1e4, 1e6};
  // The hinge is measured against this fraction of the radius so that the
  // penalised optimum lands inside the ball.
  double terminal_inner = 0.9;
  std::vector<double> periodic_weights = {1e2, 1e4, 1e6, 1e8};
  double periodic_tol = 1e-3;  // m

  int substeps() const { return static_cast<int>(dt / dt_pv + 0.5); }
  int steps_per_day() const { return static_cast<int>(kDaySeconds / dt + 0.5); }
  /// Throws ParameterError listing every violated invariant.
  void validate(int num_states = -1) const;
};

/// (T_day - t mod T_day) / Δt.
int horizon_length(double t, double dt, double day = kDaySeconds);

/// Σ_i e^{a(h̃_i - h_i + b)} + e^{a(h_i - h̄_i + b)}; optional gradient in h.
double barrier_cost(const Eigen::VectorXd& h, const Eigen::VectorXd& h_min,
                    const Eigen::VectorXd& h_max, double a, double b,
                    Eigen::VectorXd* grad = nullptr);

/// (1/β) log(1 + e^{βx}) without overflow.
double softplus(double x, double beta);
/// d softplus / dx = logistic(βx).
double softplus_slope(double x, double beta);

/// price · sp(P_p - P_pv) · hours.
double softplus_grid_cost(double pump_kw, double pv_kw, double price, double beta,
                          double hours);

/// Σ_i u_i (C h + D u + p0 - p_in)_i / λ in kW, not floored.
double total_pump_power(const LinearWdnModel& model, const Eigen::VectorXd& h,
                        const Eigen::VectorXd& u);

/// Barrier on ℋ plus Σ_k price · sp(P_p(h,u) - P_pv,k) over the Δt/Δ_pv
/// PV samples of one control interval.
double stage_cost(const Eigen::VectorXd& h, const Eigen::VectorXd& u,
                  std::span<const double> pv_slice, double price,
                  const LinearWdnModel& model, const MpcConfig& cfg);

/// Finite-horizon problem with the states eliminated by rollout. Inputs are
/// stacked as [u_0; u_1; ...; u_{N-1}].
struct HorizonProblem {
  const LinearWdnModel* model = nullptr;
  const MpcConfig* cfg = nullptr;
  Eigen::VectorXd h0;
  int horizon = 0;
  std::vector<double> price;   // €/kWh per step
  std::vector<double> demand;  // m³/s per step
  std::vector<std::vector<double>> pv;  // S × (N·Δt/Δ_pv), kW
  Eigen::VectorXd h_min, h_max;         // barrier bounds
  bool terminal = false;
  Eigen::VectorXd h_target;
  double terminal_radius = 0.0;  // hinge radius
  double terminal_weight = 0.0;
  bool periodic = false;  // adds w ‖h_N - h_0‖²
  double periodic_weight = 0.0;

  /// Objective with gradients in the inputs and in h0.
  double evaluate(const Eigen::VectorXd& u, Eigen::VectorXd* grad_u = nullptr,
                  Eigen::VectorXd* grad_h0 = nullptr) const;
  /// Exact Hessian in the inputs (h0 fixed; the periodicity term is left out).
  Eigen::MatrixXd hessian(const Eigen::VectorXd& u) const;
  /// h_0..h_N.
  std::vector<Eigen::VectorXd> rollout(const Eigen::VectorXd& u) const;
  /// Objective without the terminal and periodicity penalties.
  double economic_cost(const Eigen::VectorXd& u) const;
};

enum class MpcStatus { solved, infeasible_fallback };

struct MpcSolution {
  std::vector<Eigen::VectorXd> inputs;  // u_0..u_{N-1}
  std::vector<Eigen::VectorXd> states;  // h_0..h_N
  double objective = 0.0;               // € without penalties
  double terminal_distance = 0.0;
  MpcStatus status = MpcStatus::infeasible_fallback;
  int iterations = 0;
  int evaluations = 0;
  double projected_gradient = 0.0;
};

struct MpcRequest {
  Eigen::VectorXd h0;
  double t = 0.0;  // s
  std::vector<std::vector<double>> scenarios;  // S × (N·Δt/Δ_pv), kW
  std::vector<double> demand;                  // ≥ N forecasts, m³/s
  std::vector<double> price;                   // ≥ N prices, €/kWh
  Eigen::VectorXd h_target;                    // h*_end
  std::vector<Eigen::VectorXd> warm_shifted;   // previous solution shifted by one step
  std::vector<Eigen::VectorXd> warm_reference; // u* over the remaining hours
};

MpcSolution solve_mpc(const MpcRequest& request, const LinearWdnModel& model,
                      const MpcConfig& cfg);

struct PeriodicTrajectory {
  std::vector<Eigen::VectorXd> h;  // T_day/Δt + 1 columns
  std::vector<Eigen::VectorXd> u;  // T_day/Δt columns
  std::vector<double> demand;      // d_a*, per step
  std::vector<double> price;       // c*, per step
  std::vector<double> pv;          // P_pv*, per PV sample
  double periodicity_gap = 0.0;
  double objective = 0.0;

  const Eigen::VectorXd& end() const { return h.back(); }
};

/// One-day problem on ℋ ⊖ W with h_0 free and h_0 = h_N driven by a ramped
/// penalty. Throws OptimizationError if the gap stays above tolerance or a
/// column leaves ℋ ⊖ W.
PeriodicTrajectory compute_periodic_trajectory(const LinearWdnModel& model, const MpcConfig& cfg,
                                               std::span<const double> demand,
                                               std::span<const double> price,
                                               std::span<const double> pv);

/// Shifted reuse of the last successful input sequence.
class FallbackBuffer {
 public:
  void store(std::vector<Eigen::VectorXd> inputs);
  /// Next input of the stored sequence; its last entry once exhausted.
  /// Throws ControllerError when nothing was stored.
  Eigen::VectorXd next();
  bool empty() const { return inputs_.empty(); }

 private:
  std::vector<Eigen::VectorXd> inputs_;
  std::size_t shift_ = 0;
};

/// Per-interval pump power (one value per PV sample) and state update.
class Plant {
 public:
  virtual ~Plant() = default;
  virtual Eigen::VectorXd state() const = 0;
  virtual std::vector<double> advance(const Eigen::VectorXd& u, double demand) = 0;
};

/// Discrete linear model with an optional uniform disturbance inside W.
class LinearPlant : public Plant {
 public:
  LinearPlant(const LinearWdnModel& model, Eigen::VectorXd h0, int substeps,
              std::vector<double> w_box = {}, std::uint64_t seed = 0);
  Eigen::VectorXd state() const override { return h_; }
  std::vector<double> advance(const Eigen::VectorXd& u, double demand) override;

 private:
  const LinearWdnModel& model_;
  Eigen::VectorXd h_;
  int substeps_;
  std::vector<double> w_box_;
  Rng rng_;
};

/// Nonlinear network integrated with truth_step.
class TruthPlant : public Plant {
 public:
  TruthPlant(const ToyNetworkSpec& spec, Eigen::VectorXd levels, double dt, double dt_pv,
             double sim_dt = 60.0);
  Eigen::VectorXd state() const override;
  std::vector<double> advance(const Eigen::VectorXd& u, double demand) override;

 private:
  const ToyNetworkSpec& spec_;
  Eigen::VectorXd levels_;
  double dt_, dt_pv_, sim_dt_;
};

/// Hourly feeds over whole days; day d of the run covers entries
/// d·T_day/Δt .. (d+1)·T_day/Δt - 1.
struct ClosedLoopFeeds {
  std::vector<double> price;            // €/kWh per step
  std::vector<double> demand;           // actual m³/s per step
  std::vector<double> demand_forecast;  // m³/s per step
  std::vector<double> pv;               // actual kW per PV sample (empty: no PV)
  std::vector<DayState> pv_states;      // one per day when PV is present
  const PvStochasticModel* pv_model = nullptr;
  int days = 0;
  double start_time = 0.0;  // s, reported in the trace
};

struct TraceRow {
  double time = 0.0;
  Eigen::VectorXd h;
  Eigen::VectorXd u;
  double demand = 0.0;
  double pump_kw = 0.0;
  double pv_kw = 0.0;
  double grid_kw = 0.0;
  double price = 0.0;
};

struct CostLedger {
  double grid_cost = 0.0;     // €
  double grid_energy = 0.0;   // kWh
  double pump_energy = 0.0;   // kWh
  double pv_energy = 0.0;     // kWh
  int steps = 0;
  int infeasible_steps = 0;
  int fallback_steps = 0;
  int zero_input_steps = 0;
  int constraint_violations = 0;
  int boundary_checks = 0;
  double max_boundary_distance = 0.0;  // m, over feasible day-boundary steps
  double max_input = 0.0;
  double min_input = 0.0;
};

struct ClosedLoopResult {
  std::vector<TraceRow> trace;
  CostLedger ledger;
};

/// Receding-horizon loop: fast scenarios, solve, apply u_0 or the fallback,
/// advance the plant and account grid power with the exact ReLU.
ClosedLoopResult run_closed_loop(Plant& plant, const LinearWdnModel& model, const MpcConfig& cfg,
                                 const PeriodicTrajectory& reference, const ClosedLoopFeeds& feeds,
                                 std::uint64_t seed);

/// Constant pump flows that hold `h_ref` stationary under the mean demand,
/// clipped to [0, ū].
Eigen::VectorXd constant_flow_input(const LinearWdnModel& model, const Eigen::VectorXd& h_ref,
                                    double mean_demand);

/// Same accounting as the closed loop with fixed inputs.
ClosedLoopResult run_constant_flow(Plant& plant, const LinearWdnModel& model,
                                   const MpcConfig& cfg, const Eigen::VectorXd& u,
                                   const ClosedLoopFeeds& feeds);

void write_trace_csv(const std::string& path, const std::vector<TraceRow>& trace);

}  // namespace pvsizing
