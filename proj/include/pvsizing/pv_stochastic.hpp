#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pvsizing/pv_physical.hpp"
#include "pvsizing/random.hpp"
#include "pvsizing/time_series.hpp"

namespace pvsizing {

/// Fitted PV production model X = p·Y ⊙ δ.
struct PvStochasticModel {
  double alpha = 0.3;               // EWMA weight of the newest day
  int n_pv = 96;                    // samples per day
  double sunrise_threshold = 0.01;  // fraction of max(Y) that counts as daylight
  PeriodicFit g_fit;                // smoothed daily maximum, kW
  PeriodicFit gamma_fit;            // seasonal part of √p
  ArmaParams arma;
  std::string arma_structure = "arma11";
  LogArParams logar;
  std::vector<double> y_init;       // profile used to start a sampled year
  std::int64_t first_day = 0;       // day index the sampled year starts at
  // Profiles of the 365 fitted days preceding first_day; entry k belongs to
  // day first_day - 365 + k.
  std::vector<std::vector<double>> y_history;

  /// Historical profile for the same calendar day, or nullptr without history.
  const std::vector<double>* history_profile(std::int64_t day) const;
};

/// First/last index with Y ≥ threshold·max(Y). Invalid when Y has no
/// positive entry.
struct DaylightWindow {
  int sunrise = 0;
  int sundown = -1;
  bool valid() const { return sundown >= sunrise; }
  int length() const { return valid() ? sundown - sunrise + 1 : 0; }
};

DaylightWindow daylight_window(std::span<const double> y, double threshold);

struct DayState {
  std::int64_t day = 0;
  std::vector<double> profile;  // Y_η, kW per unit multiplier
  double last_epsilon = 0.0;    // ε_{p,η-1}
  double last_zeta = 0.0;       // ζ_{p,η-1}
  DaylightWindow window;
};

DayState make_day_state(std::int64_t day, std::vector<double> profile,
                        double last_epsilon, double last_zeta,
                        double sunrise_threshold);

/// Y_{η+1} = α X_η / g(η) + (1-α) Y_η. Throws ModelError if g(η) <= 0.
std::vector<double> update_profile(const DayState& prev,
                                   std::span<const double> x_prev,
                                   const PvStochasticModel& model);

/// Σ Y X / Σ Y². Throws ModelError when Y is identically zero.
double optimal_multiplier(std::span<const double> y, std::span<const double> x);

/// δ_i = X_i / (p Y_i) where Y_i > 0, and 1 elsewhere.
std::vector<double> correction_terms(std::span<const double> y,
                                     std::span<const double> x, double p);

struct MultiplierModel {
  PeriodicFit gamma;
  ArmaFit arma;
};

/// γ by periodic least squares on √p, ARMA(1,1) on the residuals.
MultiplierModel fit_multiplier_model(std::span<const double> p_series,
                                     std::span<const double> day_indices,
                                     int fourier_order = 2);

/// Log-AR(1) fit of daytime correction chains (no chain crosses a day).
LogArParams fit_correction_model(const std::vector<std::vector<double>>& chains);

struct MultiplierDraw {
  double p = 0.0;
  double epsilon = 0.0;
  double zeta = 0.0;
};

MultiplierDraw sample_multiplier(const DayState& state, const PvStochasticModel& model,
                                 Rng& rng);

/// Full-day δ (ones outside the daylight window) and the number of
/// proposals it took.
struct CorrectionSample {
  std::vector<double> delta;
  std::size_t attempts = 0;
};

/// Σ_i Y_i² (δ_i - 1); the quantity the rejection rule bounds.
double consistency_residual(std::span<const double> y, std::span<const double> delta);

/// Default acceptance band: 1% of Σ Y².
double default_tolerance(std::span<const double> y);

inline constexpr std::size_t kDefaultMaxAttempts = 10000;

/// Rolls the log-AR chain over the daylight window from the stationary mean
/// and accepts when |Σ Y²δ - Σ Y²| < tol. Throws SamplingError after
/// `max_attempts` rejections.
CorrectionSample sample_corrections_presunrise(const DayState& state,
                                               const PvStochasticModel& model,
                                               Rng& rng, double tol,
                                               std::size_t max_attempts = kDefaultMaxAttempts);

/// Discrete posterior over p given the observed prefix X[0..i_c).
struct MultiplierPosterior {
  std::vector<double> grid;         // cell midpoints
  std::vector<double> probability;  // sums to 1
  std::vector<double> log_density;  // unnormalised
  double cell_width = 0.0;

  std::size_t mode() const;
  /// Inverse-CDF draw, uniform inside the chosen cell.
  double sample(Rng& rng) const;
};

inline constexpr int kPosteriorGridSize = 200;

/// Prior on p = (γ + ε)² times the likelihood of the observed corrections and
/// of the remaining-day sum Σ_{i≥i_c} Y²δ (lognormal-sum approximation).
/// `observed` holds X[0..i_c). Throws NumericalError when every grid point
/// has zero density and ModelError when σ_δ = 0.
MultiplierPosterior update_multiplier_density_postsunrise(
    const DayState& state, const PvStochasticModel& model,
    std::span<const double> observed, int grid_size = kPosteriorGridSize);

/// δ with the prefix fixed at X/(xY) and the rest of the window drawn from
/// the chain, accepted against the full-day consistency band.
CorrectionSample sample_corrections_postsunrise(const DayState& state,
                                                const PvStochasticModel& model,
                                                double p_sample,
                                                std::span<const double> observed,
                                                Rng& rng, double tol,
                                                std::size_t max_attempts = kDefaultMaxAttempts);

/// S realisations of X[i_c..N_pv) drawn without rejection. Before any
/// daylight observation the multiplier comes from its prior, afterwards
/// from the posterior.
std::vector<std::vector<double>> sample_scenarios_fast(const DayState& state,
                                                       const PvStochasticModel& model,
                                                       std::span<const double> observed,
                                                       int scenarios, Rng& rng);

struct RejectionOptions {
  double tol_fraction = 0.01;
  std::size_t max_attempts = kDefaultMaxAttempts;
  int max_widenings = 8;  // tolerance doubles after each exhausted attempt budget
  // When set (and the model carries a history), the (1-α) memory term of the
  // profile update uses the historical profile of the next calendar day
  // instead of the sampled one, so the daylight window follows the season.
  bool anchor_profile = true;
};

struct SampledYear {
  PvPowerSeries power;
  std::vector<DayState> states;
  std::vector<double> multipliers;
};

/// Sequential day-by-day sampling starting from `y_init` at `first_day`.
SampledYear sample_year(const PvStochasticModel& model, std::span<const double> y_init,
                        std::int64_t first_day, int days, Rng& rng,
                        const RejectionOptions& options = {});

struct FitOptions {
  double alpha = 0.3;
  int g_order = 2;
  int gamma_order = 2;
  double sunrise_threshold = 0.01;
};

struct FitReport {
  std::vector<double> multipliers;  // p_τ for τ >= 1
  std::vector<std::vector<double>> profiles;
  std::size_t correction_pairs = 0;
  ArmaFit arma;
};

/// Fits every model component to a power series of at least one year.
PvStochasticModel fit_stochastic_model(const PvPowerSeries& series,
                                       const FitOptions& options = {},
                                       FitReport* report = nullptr);

void save_model(const std::string& path, const PvStochasticModel& model);
PvStochasticModel load_model(const std::string& path);

}  // namespace pvsizing
