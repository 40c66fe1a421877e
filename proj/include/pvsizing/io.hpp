#pragma once

#include <string>
#include <vector>

#include "pvsizing/empc.hpp"
#include "pvsizing/pv_physical.hpp"
#include "pvsizing/sizing.hpp"

namespace pvsizing {

/// `timestamp,irradiance_wm2,temp_c,wind_ms`
void write_weather_csv(const std::string& path, const std::vector<WeatherSample>& weather);
std::vector<WeatherSample> read_weather_csv(const std::string& path);

/// `timestamp,power_kw`; timestamps are epoch + k·86400/samples_per_day.
void write_power_csv(const std::string& path, const PvPowerSeries& series, double epoch);
PvPowerSeries read_power_csv(const std::string& path, int samples_per_day);

/// `time_index,<column>` with one value per hour, e.g. eur_per_kwh or m3_per_s.
void write_hourly_csv(const std::string& path, const std::string& column,
                      const std::vector<double>& values);
std::vector<double> read_hourly_csv(const std::string& path, const std::string& column);

/// `scenario_id,time_index,power_kw`
void write_scenarios_csv(const std::string& path,
                         const std::vector<std::vector<double>>& scenarios);

/// `x_kw,total_eur,opex_eur,capex_eur,seed,evals`
void write_sizing_log(const std::string& path, const std::vector<CostEvaluation>& points);

/// `evaluation,x_kw,total_eur,operation`
void write_nelder_mead_log(const std::string& path, const std::vector<NelderMeadStep>& log);

/// Flat `key = value` lines.
void write_key_values(const std::string& path,
                      const std::vector<std::pair<std::string, std::string>>& entries);

/// JSON summary of one closed-loop run.
void write_ledger_json(const std::string& path, const OpexResult& result, double x_kw,
                       int days);

/// `step,h1..hn,u1..um,d_a,price` for the periodic reference (u is empty on the last row).
void write_periodic_csv(const std::string& path, const PeriodicTrajectory& trajectory);

}  // namespace pvsizing
