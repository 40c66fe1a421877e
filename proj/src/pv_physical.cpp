#include "pvsizing/pv_physical.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "pvsizing/errors.hpp"
#include "pvsizing/random.hpp"

namespace pvsizing {

PvPanelParams PvPanelParams::from_relative(double p_stc, double k1, double k2,
                                           double k3, double k4, double k5,
                                           double k6, double mu0, double mu1) {
  PvPanelParams p;
  p.p_stc = p_stc;
  p.k1 = k1 * p_stc;
  p.k2 = k2 * p_stc;
  p.k3 = k3 * p_stc;
  p.k4 = k4 * p_stc;
  p.k5 = k5 * p_stc;
  p.k6 = k6 * p_stc;
  p.mu0 = mu0;
  p.mu1 = mu1;
  return p;
}

PvPanelParams PvPanelParams::scaled_to(double new_p_stc) const {
  if (p_stc <= 0.0) throw ParameterError("cannot rescale a panel with p_stc <= 0");
  const double s = new_p_stc / p_stc;
  PvPanelParams out = *this;
  out.p_stc = new_p_stc;
  out.k1 *= s;
  out.k2 *= s;
  out.k3 *= s;
  out.k4 *= s;
  out.k5 *= s;
  out.k6 *= s;
  return out;
}

PvPanelParams PvPanelParams::crystalline_silicon(double p_stc) {
  return from_relative(p_stc, -0.017237, -0.040465, -0.004702, 0.000149,
                       0.000170, 0.000005, 25.0, 6.84);
}

double module_temperature(const WeatherSample& w, const PvPanelParams& p) {
  const double denom = p.mu0 + p.mu1 * w.wind_speed;
  if (!(denom > 0.0)) {
    throw ParameterError("Faiman denominator mu0 + mu1*wind must be positive (got " +
                         std::to_string(denom) + ")");
  }
  return w.ambient_temp + w.irradiance / denom;
}

double panel_power(const WeatherSample& w, const PvPanelParams& p) {
  if (w.irradiance < kNightIrradiance) return 0.0;
  const double g = w.irradiance / kIrradianceStc;
  const double t = module_temperature(w, p) - kTemperatureStc;
  const double lg = std::log(g);
  const double power =
      g * (p.p_stc + p.k1 * lg + p.k2 * lg * lg + p.k3 * t + p.k4 * t * lg +
           p.k5 * t * lg * lg + p.k6 * t * t);
  return std::max(power, 0.0);
}

PvPowerSeries generate_synthetic_series(std::span<const WeatherSample> weather,
                                        const PvPanelParams& p,
                                        int samples_per_day,
                                        std::int64_t start_day) {
  if (samples_per_day < 1) throw InputError("samples_per_day must be >= 1");
  if (weather.size() % static_cast<std::size_t>(samples_per_day) != 0) {
    throw InputError("weather series of " + std::to_string(weather.size()) +
                     " samples does not cover whole days of " +
                     std::to_string(samples_per_day) + " samples");
  }
  PvPowerSeries out;
  out.start_day = start_day;
  out.samples_per_day = samples_per_day;
  out.values.reserve(weather.size());
  for (const auto& w : weather) out.values.push_back(panel_power(w, p));
  return out;
}

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

double clear_sky_irradiance(const ClimateParams& c, int day_of_year,
                            double solar_hour) {
  const double decl =
      23.44 * kDeg *
      std::sin(2.0 * std::numbers::pi * (284.0 + day_of_year + 1) / 365.0);
  const double lat = c.latitude_deg * kDeg;
  const double hour_angle = 15.0 * kDeg * (solar_hour - 12.0);
  const double sin_el = std::sin(lat) * std::sin(decl) +
                        std::cos(lat) * std::cos(decl) * std::cos(hour_angle);
  if (sin_el <= 0.0) return 0.0;
  // Meinel air-mass attenuation of the beam, global ≈ 1.1 × beam on horizontal.
  const double air_mass = 1.0 / sin_el;
  const double beam = 1353.0 * std::pow(0.7, std::pow(air_mass, 0.678));
  return c.clear_sky_scale * 1.1 * beam * sin_el;
}

std::vector<WeatherSample> synth_weather(std::uint64_t seed, int days,
                                         int samples_per_day,
                                         const ClimateParams& climate) {
  if (days < 1) throw InputError("synth_weather needs days >= 1");
  if (samples_per_day < 1) throw InputError("samples_per_day must be >= 1");

  Rng rng(derive_seed(seed, "pv_physical.weather"));
  std::normal_distribution<double> normal(0.0, 1.0);

  const double dt_hours = 24.0 / samples_per_day;
  const double dt_seconds = 86400.0 / samples_per_day;
  // Per-sample AR(1) coefficients are specified at 15-minute resolution and
  // rescaled so persistence in wall-clock time does not depend on N_pv.
  const double steps_per_quarter = 0.25 / dt_hours;
  const double phi_intra =
      std::pow(climate.intraday_ar_phi, 1.0 / steps_per_quarter);
  const double sigma_intra =
      climate.intraday_ar_sigma *
      std::sqrt((1.0 - phi_intra * phi_intra) /
                (1.0 - climate.intraday_ar_phi * climate.intraday_ar_phi));

  std::vector<WeatherSample> out;
  out.reserve(static_cast<std::size_t>(days) * samples_per_day);

  double daily = 0.0;
  double intra = 0.0;
  double temp_noise = 0.0;
  for (int d = 0; d < days; ++d) {
    const int doy = (climate.start_day_of_year + d) % 365;
    daily = climate.daily_ar_phi * daily + climate.daily_ar_sigma * normal(rng);
    const double season = std::cos(2.0 * std::numbers::pi * (doy - 20) / 365.0);
    const double temp_day = climate.temp_mean - climate.temp_seasonal_amplitude * season;
    const double wind_day = climate.wind_mean + climate.wind_seasonal_amplitude * season;
    for (int i = 0; i < samples_per_day; ++i) {
      const double hour = (i + 0.5) * dt_hours;
      intra = phi_intra * intra + sigma_intra * normal(rng);
      temp_noise = 0.98 * temp_noise + climate.temp_noise_sigma * 0.2 * normal(rng);
      const double wind_noise = climate.wind_noise_sigma * normal(rng);

      WeatherSample w;
      w.timestamp = climate.epoch_start +
                    (static_cast<double>(d) * samples_per_day + i) * dt_seconds;
      const double envelope = clear_sky_irradiance(climate, doy, hour);
      double kt = 1.0;
      if (!climate.force_clear_sky) {
        kt = climate.clearness_min +
             (1.0 - climate.clearness_min) *
                 logistic(climate.clearness_bias + daily + intra);
      }
      w.irradiance = envelope * kt;
      w.ambient_temp =
          temp_day +
          climate.temp_diurnal_amplitude *
              std::sin(2.0 * std::numbers::pi * (hour - 9.0) / 24.0) +
          temp_noise;
      w.wind_speed = std::abs(wind_day + wind_noise);
      out.push_back(w);
    }
  }
  return out;
}

}  // namespace pvsizing
