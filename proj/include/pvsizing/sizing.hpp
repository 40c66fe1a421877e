#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pvsizing/empc.hpp"
#include "pvsizing/errors.hpp"
#include "pvsizing/pv_physical.hpp"
#include "pvsizing/pv_stochastic.hpp"
#include "pvsizing/wdn_network.hpp"

namespace pvsizing {

struct CostParams {
  double a_ins = 2.0;         // €/W
  double a_m = 17.0;          // €/kW per year
  double lifespan = 25.0;     // years
  double degradation = 0.0015;  // per year
  double lambda_pv = -1.0;    // < 0: derived as 1 - degradation·lifespan/2

  double efficiency() const {
    return lambda_pv >= 0.0 ? lambda_pv : 1.0 - degradation * lifespan / 2.0;
  }
  /// Throws ParameterError listing every violated invariant.
  void validate() const;
};

/// a_ins [€/W] · 1000 [W/kW] · x [kW].
double capex(double x_kw, const CostParams& params);

/// Hourly prices and demand for one year plus the forecast the controller sees.
struct Workload {
  std::vector<double> price;            // €/kWh per hour
  std::vector<double> demand;           // m³/s per hour
  std::vector<double> demand_forecast;  // m³/s per hour
};

struct WorkloadOptions {
  int days = 365;
  std::vector<double> price_profile = {0.14, 0.13, 0.12, 0.12, 0.13, 0.16, 0.22, 0.30,
                                       0.30, 0.26, 0.22, 0.20, 0.19, 0.18, 0.19, 0.21,
                                       0.26, 0.34, 0.38, 0.36, 0.30, 0.24, 0.19, 0.16};
  double price_seasonal = 0.15;   // relative amplitude, peak in mid-winter
  double price_daily_noise = 0.1;  // lognormal σ per day
  double demand_mean = 0.07;      // m³/s
  double demand_seasonal = 0.1;   // relative amplitude, peak in mid-summer
  double demand_daily_noise = 0.05;
  double demand_hourly_noise = 0.03;
  double forecast_amplitude = 0.05;  // relative smooth perturbation of the forecast
  int forecast_harmonics = 3;
};

/// Synthetic time-of-use prices and diurnal demand. The forecast is the true
/// profile times 1 + a random daily Fourier series of the given amplitude.
Workload synth_workload(std::uint64_t seed, const WorkloadOptions& options);

/// Adds the smooth relative perturbation to an hourly demand series.
std::vector<double> perturb_forecast(std::span<const double> demand, double amplitude,
                                     int harmonics, std::uint64_t seed);

enum class PlantKind { truth, linear };

/// Everything the yearly OPEX evaluation needs besides x and the seed.
struct OpexStack {
  ToyNetworkSpec network;
  LinearWdnModel model;  // discretized at mpc.dt
  MpcConfig mpc;
  std::vector<WeatherSample> weather;  // fit history, ≥ 366 whole days
  int samples_per_day = 96;
  PvPanelParams panel = PvPanelParams::crystalline_silicon(1.0);
  FitOptions fit;
  RejectionOptions rejection;
  Workload workload;      // 365 days
  int days = 365;         // simulated days, extrapolated to a year
  PlantKind plant = PlantKind::truth;
  std::vector<double> disturbance;  // linear plant only: uniform box half-widths
  bool keep_trace = false;
};

/// Day indices covered by a run of `days` out of 365 (evenly strided).
std::vector<int> simulated_days(int days);

struct OpexResult {
  double opex = 0.0;         // € per year
  double maintenance = 0.0;  // € per year
  double grid_cost = 0.0;    // € per year (extrapolated)
  double simulated_grid_cost = 0.0;
  double p_stc = 0.0;        // kW, λ_pv·x
  std::uint64_t seed = 0;
  CostLedger ledger;
  std::vector<TraceRow> trace;
  PeriodicTrajectory reference;
};

/// Per-x stream seed; a function of the effective capacity λ_pv·x so that
/// equal capacities share one realisation.
std::uint64_t opex_seed(std::uint64_t base_seed, double p_stc);

/// Yearly grid cost for an effective PV capacity in kW.
OpexResult yearly_grid_cost(double p_stc, const OpexStack& stack, std::uint64_t seed);

/// a_m·x + yearly grid cost at P_STC = λ_pv·x.
OpexResult yearly_opex(double x_kw, const CostParams& params, const OpexStack& stack,
                       std::uint64_t base_seed);

struct CostEvaluation {
  double x = 0.0;
  double total = 0.0;
  double opex = 0.0;
  double capex = 0.0;
  double grid = 0.0;
  std::uint64_t seed = 0;
  int evals = 0;  // evaluation counter at the time of the call
};

/// capex + ℓ_pv·opex.
CostEvaluation total_cost(double x_kw, const CostParams& params, const OpexStack& stack,
                          std::uint64_t base_seed);

struct NelderMeadOptions {
  double step = -1.0;  // < 0: 25% of x0, or 50 when x0 = 0
  double tol_x = 1e-4;
  int max_evals = 50;
  double lower = 0.0;
};

struct NelderMeadStep {
  int evaluation = 0;
  double x = 0.0;
  double f = 0.0;
  std::string operation;  // init, reflect, expand, contract, shrink
};

struct NelderMeadResult {
  double x_best = 0.0;
  double f_best = 0.0;
  int evaluations = 0;
  bool converged = false;
  std::vector<NelderMeadStep> log;
};

/// Carries the evaluations made before a non-finite value appeared.
class NelderMeadError : public OptimizationError {
 public:
  NelderMeadError(const std::string& what, std::vector<NelderMeadStep> log)
      : OptimizationError(what), log_(std::move(log)) {}
  const std::vector<NelderMeadStep>& log() const noexcept { return log_; }

 private:
  std::vector<NelderMeadStep> log_;
};

/// One-dimensional Nelder-Mead (reflection 1, expansion 2, contraction 0.5,
/// shrink 0.5) with candidates below `lower` mapped onto it.
NelderMeadResult nelder_mead_minimize(const std::function<double(double)>& f, double x0,
                                      const NelderMeadOptions& options = {});

/// c(x) = a·e^{-b x} + c0.
struct ExponentialFit {
  double a = 0.0;
  double b = 0.0;
  double c0 = 0.0;
  double rss = 0.0;
  int iterations = 0;

  double operator()(double x) const { return a * std::exp(-b * x) + c0; }
};

/// Gauss-Newton from a log-linear start. Throws FitError when there are fewer
/// than 4 points, a cost is not positive, or the iteration fails.
ExponentialFit fit_exponential(std::span<const double> x, std::span<const double> cost);

/// Minimiser of a_ins·x + ℓ(a_m·x + fit(λ_pv·x)) on [0, x_max] by golden section.
double smoothed_optimum(const ExponentialFit& fit, const CostParams& params, double x_max,
                        double tol = 1e-6);

struct SizingResult {
  double lifespan = 0.0;
  std::vector<CostEvaluation> points;
  NelderMeadResult search;
  double best_x = 0.0;
  double best_total = 0.0;
  double zero_total = 0.0;
  ExponentialFit fit;
  double exp_fit_x = 0.0;
};

struct SizingOptions {
  std::vector<double> lifespans = {25.0};
  CostParams cost;  // lifespan overridden per run
  double x0 = 100.0;
  NelderMeadOptions search{25.0, 2.0, 15, 0.0};
  // Fit the grid cost over every lifespan's evaluations (as a function of
  // λ_pv·x) instead of each lifespan separately.
  bool pooled_fit = true;
};

/// Nelder-Mead per lifespan plus the exponential post-fit. Grid costs are
/// cached by effective capacity across lifespans.
std::vector<SizingResult> run_sizing(const OpexStack& stack, const SizingOptions& options,
                                     std::uint64_t base_seed,
                                     const std::function<void(const std::string&)>& progress = {});

}  // namespace pvsizing
