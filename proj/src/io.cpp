#include "pvsizing/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "pvsizing/errors.hpp"

namespace pvsizing {

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path);
  return out;
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

struct CsvReader {
  std::ifstream in;
  std::string path;
  std::size_t line_no = 0;

  CsvReader(const std::string& p, const std::string& header) : in(p), path(p) {
    if (!in) throw InputError("cannot read " + p);
    std::string line;
    if (!next(line)) throw InputError(p + ": empty file");
    if (line != header) {
      throw InputError(p + ":1: expected header '" + header + "', found '" + line + "'");
    }
  }

  bool next(std::string& line) {
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) return true;
    }
    return false;
  }

  std::vector<double> fields(const std::string& line, std::size_t count) {
    std::vector<double> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      double v = 0.0;
      const auto r = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (r.ec != std::errc() || r.ptr != cell.data() + cell.size()) {
        throw InputError(path + ":" + std::to_string(line_no) + ": '" + cell + "' is not a number");
      }
      out.push_back(v);
    }
    if (out.size() != count) {
      throw InputError(path + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(count) + " fields, found " + std::to_string(out.size()));
    }
    return out;
  }
};

}  // namespace

void write_weather_csv(const std::string& path, const std::vector<WeatherSample>& weather) {
  auto out = open_out(path);
  out << "timestamp,irradiance_wm2,temp_c,wind_ms\n";
  char buf[160];
  for (const auto& w : weather) {
    std::snprintf(buf, sizeof buf, "%.0f,%.10g,%.10g,%.10g\n", w.timestamp, w.irradiance,
                  w.ambient_temp, w.wind_speed);
    out << buf;
  }
}

std::vector<WeatherSample> read_weather_csv(const std::string& path) {
  CsvReader r(path, "timestamp,irradiance_wm2,temp_c,wind_ms");
  std::vector<WeatherSample> out;
  std::string line;
  while (r.next(line)) {
    const auto f = r.fields(line, 4);
    out.push_back({f[0], f[1], f[2], f[3]});
  }
  return out;
}

void write_power_csv(const std::string& path, const PvPowerSeries& series, double epoch) {
  auto out = open_out(path);
  out << "timestamp,power_kw\n";
  const double dt = kDaySeconds / series.samples_per_day;
  const double start = epoch + static_cast<double>(series.start_day) * kDaySeconds;
  char buf[80];
  for (std::size_t k = 0; k < series.values.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.0f,%.10g\n", start + static_cast<double>(k) * dt,
                  series.values[k]);
    out << buf;
  }
}

PvPowerSeries read_power_csv(const std::string& path, int samples_per_day) {
  CsvReader r(path, "timestamp,power_kw");
  PvPowerSeries s;
  s.samples_per_day = samples_per_day;
  std::string line;
  while (r.next(line)) s.values.push_back(r.fields(line, 2)[1]);
  if (s.values.empty() || s.values.size() % static_cast<std::size_t>(samples_per_day) != 0) {
    throw InputError(path + ": " + std::to_string(s.values.size()) +
                     " samples do not form whole days of " + std::to_string(samples_per_day));
  }
  return s;
}

void write_hourly_csv(const std::string& path, const std::string& column,
                      const std::vector<double>& values) {
  auto out = open_out(path);
  out << "time_index," << column << "\n";
  for (std::size_t k = 0; k < values.size(); ++k) out << k << "," << num(values[k]) << "\n";
}

std::vector<double> read_hourly_csv(const std::string& path, const std::string& column) {
  CsvReader r(path, "time_index," + column);
  std::vector<double> out;
  std::string line;
  while (r.next(line)) {
    const auto f = r.fields(line, 2);
    if (f[0] != static_cast<double>(out.size())) {
      throw InputError(path + ":" + std::to_string(r.line_no) + ": time_index " + num(f[0]) +
                       " out of sequence");
    }
    out.push_back(f[1]);
  }
  return out;
}

void write_scenarios_csv(const std::string& path,
                         const std::vector<std::vector<double>>& scenarios) {
  auto out = open_out(path);
  out << "scenario_id,time_index,power_kw\n";
  for (std::size_t s = 0; s < scenarios.size(); ++s) {
    for (std::size_t k = 0; k < scenarios[s].size(); ++k) {
      out << s << "," << k << "," << num(scenarios[s][k]) << "\n";
    }
  }
}

void write_sizing_log(const std::string& path, const std::vector<CostEvaluation>& points) {
  auto out = open_out(path);
  out << "x_kw,total_eur,opex_eur,capex_eur,seed,evals\n";
  char buf[200];
  for (const auto& p : points) {
    std::snprintf(buf, sizeof buf, "%.6f,%.2f,%.2f,%.2f,%llu,%d\n", p.x, p.total, p.opex,
                  p.capex, static_cast<unsigned long long>(p.seed), p.evals);
    out << buf;
  }
}

void write_nelder_mead_log(const std::string& path, const std::vector<NelderMeadStep>& log) {
  auto out = open_out(path);
  out << "evaluation,x_kw,total_eur,operation\n";
  char buf[160];
  for (const auto& s : log) {
    std::snprintf(buf, sizeof buf, "%d,%.6f,%.2f,", s.evaluation, s.x, s.f);
    out << buf << s.operation << "\n";
  }
}

void write_key_values(const std::string& path,
                      const std::vector<std::pair<std::string, std::string>>& entries) {
  auto out = open_out(path);
  for (const auto& [k, v] : entries) out << k << " = " << v << "\n";
}

void write_ledger_json(const std::string& path, const OpexResult& r, double x_kw, int days) {
  const CostLedger& l = r.ledger;
  nlohmann::ordered_json j;
  j["x_kw"] = x_kw;
  j["p_stc_kw"] = r.p_stc;
  j["simulated_days"] = days;
  j["seed"] = r.seed;
  j["maintenance_eur_per_year"] = r.maintenance;
  j["grid_cost_eur_per_year"] = r.grid_cost;
  j["opex_eur_per_year"] = r.opex;
  j["simulated_grid_cost_eur"] = r.simulated_grid_cost;
  j["grid_energy_kwh"] = l.grid_energy;
  j["pump_energy_kwh"] = l.pump_energy;
  j["pv_energy_kwh"] = l.pv_energy;
  j["steps"] = l.steps;
  j["infeasible_steps"] = l.infeasible_steps;
  j["fallback_steps"] = l.fallback_steps;
  j["zero_input_steps"] = l.zero_input_steps;
  j["constraint_violations"] = l.constraint_violations;
  j["max_day_boundary_distance_m"] = l.max_boundary_distance;
  j["min_input_m3s"] = l.min_input;
  j["max_input_m3s"] = l.max_input;
  auto out = open_out(path);
  out << j.dump(2) << "\n";
}

void write_periodic_csv(const std::string& path, const PeriodicTrajectory& tr) {
  auto out = open_out(path);
  const Eigen::Index n = tr.h.empty() ? 0 : tr.h.front().size();
  const Eigen::Index m = tr.u.empty() ? 0 : tr.u.front().size();
  out << "step";
  for (Eigen::Index i = 1; i <= n; ++i) out << ",h" << i;
  for (Eigen::Index i = 1; i <= m; ++i) out << ",u" << i;
  out << ",d_a,price\n";
  for (std::size_t k = 0; k < tr.h.size(); ++k) {
    out << k;
    for (Eigen::Index i = 0; i < n; ++i) out << "," << num(tr.h[k][i]);
    const bool last = k >= tr.u.size();
    for (Eigen::Index i = 0; i < m; ++i) out << "," << (last ? "" : num(tr.u[k][i]));
    out << "," << (last ? "" : num(tr.demand[k])) << "," << (last ? "" : num(tr.price[k])) << "\n";
  }
}

}  // namespace pvsizing
