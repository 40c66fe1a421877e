#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace pvsizing {

inline constexpr double kIrradianceStc = 1000.0;  // W/m²
inline constexpr double kTemperatureStc = 25.0;   // °C
/// Irradiance below this is treated as night (power is exactly zero).
inline constexpr double kNightIrradiance = 1.0;  // W/m²

struct WeatherSample {
  double timestamp = 0.0;     // seconds since epoch
  double irradiance = 0.0;    // W/m²
  double ambient_temp = 0.0;  // °C
  double wind_speed = 0.0;    // m/s
};

/// Physical panel model constants. The k-coefficients are absolute (kW) so that
/// power = G'(p_stc + k1 ln G' + ...). Use `scaled_to` to move between
/// capacities; all k's scale with p_stc.
struct PvPanelParams {
  double k1 = 0.0, k2 = 0.0, k3 = 0.0, k4 = 0.0, k5 = 0.0, k6 = 0.0;
  double mu0 = 25.0;  // W/(m²·K)
  double mu1 = 6.84;  // W·s/(m³·K)
  double p_stc = 1.0; // kW

  /// Builds absolute parameters from per-kW (relative) k's.
  static PvPanelParams from_relative(double p_stc, double k1, double k2,
                                     double k3, double k4, double k5,
                                     double k6, double mu0, double mu1);

  /// Same panel technology at a different nameplate capacity.
  PvPanelParams scaled_to(double new_p_stc) const;

  /// Crystalline-silicon coefficients with Faiman constants, at `p_stc` kW.
  static PvPanelParams crystalline_silicon(double p_stc);
};

struct PvPowerSeries {
  std::int64_t start_day = 0;
  int samples_per_day = 96;
  std::vector<double> values;  // kW

  std::size_t days() const {
    return samples_per_day > 0 ? values.size() / samples_per_day : 0;
  }
  std::span<const double> day(std::size_t d) const {
    return std::span<const double>(values).subspan(d * samples_per_day,
                                                   samples_per_day);
  }
};

/// T_amb + G / (mu0 + mu1·V_wind). Throws ParameterError if the denominator
/// is not positive.
double module_temperature(const WeatherSample& w, const PvPanelParams& p);

/// Panel output in kW. Zero at night (G < 1 W/m²); negative values clamp to 0.
double panel_power(const WeatherSample& w, const PvPanelParams& p);

/// Element-wise power series; throws InputError unless the weather covers
/// whole days of `samples_per_day` samples.
PvPowerSeries generate_synthetic_series(std::span<const WeatherSample> weather,
                                        const PvPanelParams& p,
                                        int samples_per_day,
                                        std::int64_t start_day = 0);

struct ClimateParams {
  double latitude_deg = 56.46;  // Randers, DK
  int start_day_of_year = 0;    // 0 = 1 January
  double epoch_start = 1640995200.0;  // 2022-01-01T00:00:00Z
  double clear_sky_scale = 1.0;
  // Clearness index: kt = kt_min + (1-kt_min)·logistic(bias + daily + intraday)
  double clearness_min = 0.08;
  double clearness_bias = 0.6;
  double daily_ar_phi = 0.6;
  double daily_ar_sigma = 1.3;
  double intraday_ar_phi = 0.93;
  double intraday_ar_sigma = 0.35;
  bool force_clear_sky = false;
  // Temperature (°C) and wind (m/s)
  double temp_mean = 8.5;
  double temp_seasonal_amplitude = 8.0;
  double temp_diurnal_amplitude = 3.0;
  double temp_noise_sigma = 1.5;
  double wind_mean = 5.0;
  double wind_seasonal_amplitude = 1.0;
  double wind_noise_sigma = 1.5;
};

/// Clear-sky global irradiance (W/m²) at a given day-of-year and solar hour.
double clear_sky_irradiance(const ClimateParams& c, int day_of_year,
                            double solar_hour);

/// Deterministic synthetic weather: clear-sky envelope × AR(1) clearness,
/// seasonal temperature and wind with noise.
std::vector<WeatherSample> synth_weather(std::uint64_t seed, int days,
                                         int samples_per_day,
                                         const ClimateParams& climate);

}  // namespace pvsizing
