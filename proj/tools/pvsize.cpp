// pvsize: synthetic data, PV model fitting, scenario sampling, closed-loop
// simulation and PV sizing on the toy water network.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pvsizing/config.hpp"
#include "pvsizing/errors.hpp"
#include "pvsizing/io.hpp"
#include "pvsizing/random.hpp"
#include "pvsizing/sizing.hpp"

namespace fs = std::filesystem;
using namespace pvsizing;

namespace {

struct Paths {
  fs::path out;
  fs::path weather() const { return out / "weather.csv"; }
  fs::path power() const { return out / "power.csv"; }
  fs::path prices() const { return out / "prices.csv"; }
  fs::path demand() const { return out / "demand.csv"; }
  fs::path model() const { return out / "model.txt"; }
};

void require(const fs::path& file, const char* stage) {
  if (!fs::exists(file)) {
    throw InputError(file.string() + " is missing: run " + stage + " first");
  }
}

std::string fmt(double v, const char* spec = "%.6g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

PvPanelParams panel_for(const RunConfig& c, double kw) { return c.panel.scaled_to(kw); }

std::vector<WeatherSample> load_weather(const RunConfig& c, const Paths& p) {
  if (!c.weather_file.empty()) return read_weather_csv(c.weather_file);
  require(p.weather(), "synth");
  return read_weather_csv(p.weather().string());
}

Workload load_workload(const RunConfig& c, const Paths& p) {
  const std::string price = c.price_file.empty() ? p.prices().string() : c.price_file;
  const std::string demand = c.demand_file.empty() ? p.demand().string() : c.demand_file;
  require(price, "synth");
  require(demand, "synth");
  Workload w;
  w.price = read_hourly_csv(price, "eur_per_kwh");
  w.demand = read_hourly_csv(demand, "m3_per_s");
  w.demand_forecast = perturb_forecast(w.demand, c.workload.forecast_amplitude,
                                       c.workload.forecast_harmonics,
                                       derive_seed(c.seed, "workload.forecast"));
  return w;
}

LinearWdnModel identify(const RunConfig& c, const ToyNetworkSpec& net, MpcConfig& mpc) {
  ExcitationPlan plan = c.excitation;
  plan.seed = derive_seed(c.seed, "identification");
  plan.hold = c.mpc.dt;
  const IdentificationReport rep = identify_linear_model(net, plan);
  if (c.w_from_identification) mpc.w_box = rep.w_box;
  std::cerr << "identified linear model: one-step error";
  for (double e : rep.one_step_error) std::cerr << " " << fmt(e, "%.3f");
  std::cerr << " m\n";
  return discretize(rep.model, mpc.dt);
}

OpexStack build_stack(const RunConfig& c, const Paths& p, int days) {
  OpexStack st;
  st.network = c.network();
  st.mpc = c.mpc;
  st.model = identify(c, st.network, st.mpc);
  st.mpc.validate(st.model.n());
  st.weather = load_weather(c, p);
  st.samples_per_day = c.samples_per_day;
  st.panel = c.panel;
  st.fit = c.fit;
  st.rejection = c.rejection;
  st.workload = load_workload(c, p);
  st.days = days;
  st.plant = c.plant;
  if (c.plant == PlantKind::linear) st.disturbance = st.mpc.w_box;
  return st;
}

void cmd_synth(const RunConfig& c, const Paths& p, double pv_kw) {
  const auto weather = synth_weather(derive_seed(c.seed, "weather"), c.history_days,
                                     c.samples_per_day, c.climate);
  write_weather_csv(p.weather().string(), weather);
  const PvPowerSeries power =
      generate_synthetic_series(weather, panel_for(c, pv_kw), c.samples_per_day, 0);
  write_power_csv(p.power().string(), power, c.climate.epoch_start);
  WorkloadOptions wo = c.workload;
  wo.days = 365;
  const Workload w = synth_workload(c.seed, wo);
  write_hourly_csv(p.prices().string(), "eur_per_kwh", w.price);
  write_hourly_csv(p.demand().string(), "m3_per_s", w.demand);
  std::cout << "wrote " << weather.size() << " weather samples (" << c.history_days
            << " days), " << pv_kw << " kW power series and " << w.price.size()
            << " hourly prices and demands to " << p.out.string() << "\n";
}

void cmd_fit(const RunConfig& c, const Paths& p) {
  require(p.power(), "synth");
  const PvPowerSeries series = read_power_csv(p.power().string(), c.samples_per_day);
  FitReport rep;
  const PvStochasticModel model = fit_stochastic_model(series, c.fit, &rep);
  save_model(p.model().string(), model);
  std::cout << "fitted " << rep.multipliers.size() << " daily multipliers, "
            << rep.correction_pairs << " correction pairs; noise structure "
            << rep.arma.structure << "\nwrote " << p.model().string() << "\n";
}

void cmd_sample(const RunConfig& c, const Paths& p, int days, int scenarios) {
  require(p.model(), "fit");
  const PvStochasticModel model = load_model(p.model().string());
  std::vector<std::vector<double>> out;
  for (int s = 0; s < scenarios; ++s) {
    Rng rng = make_rng(c.seed, "sample", static_cast<std::uint64_t>(s));
    const SampledYear y = sample_year(model, model.y_init, model.first_day, days, rng, c.rejection);
    out.push_back(y.power.values);
  }
  const fs::path file = p.out / "scenarios.csv";
  write_scenarios_csv(file.string(), out);
  std::cout << "wrote " << scenarios << " scenario(s) of " << days << " days to " << file.string()
            << "\n";
}

void cmd_simulate(const RunConfig& c, const Paths& p, int days, double pv_kw) {
  OpexStack st = build_stack(c, p, days);
  st.keep_trace = true;
  CostParams cost = c.cost;
  cost.lifespan = c.lifespans.front();
  const OpexResult r = yearly_opex(pv_kw, cost, st, c.seed);
  write_trace_csv((p.out / "trace.csv").string(), r.trace);
  write_ledger_json((p.out / "ledger.json").string(), r, pv_kw, days);
  std::cout << "x = " << fmt(pv_kw) << " kW: opex " << fmt(r.opex, "%.2f") << " EUR/yr (grid "
            << fmt(r.grid_cost, "%.2f") << ", maintenance " << fmt(r.maintenance, "%.2f")
            << "), violations " << r.ledger.constraint_violations << ", infeasible steps "
            << r.ledger.infeasible_steps << "\n";
}

void cmd_size(const RunConfig& c, const Paths& p, int days, const std::vector<double>& lifespans) {
  const OpexStack st = build_stack(c, p, days);
  SizingOptions so;
  so.lifespans = lifespans;
  so.cost = c.cost;
  so.x0 = c.x0;
  so.search = c.search;
  so.pooled_fit = c.pooled_fit;
  const auto results =
      run_sizing(st, so, c.seed, [](const std::string& line) { std::cerr << line << "\n"; });
  std::vector<std::pair<std::string, std::string>> overview = {
      {"lifespans", ""}, {"simulated_days", std::to_string(days)}, {"seed", std::to_string(c.seed)}};
  for (const auto& r : results) {
    const std::string tag = fmt(r.lifespan, "%g");
    const fs::path dir = p.out / ("lifespan_" + tag);
    fs::create_directories(dir);
    write_sizing_log((dir / "sizing_log.csv").string(), r.points);
    write_nelder_mead_log((dir / "nelder_mead_log.csv").string(), r.search.log);
    CostParams cp = c.cost;
    cp.lifespan = r.lifespan;
    write_key_values((dir / "sizing_summary.txt").string(),
                     {{"lifespan_years", tag},
                      {"lambda_pv", fmt(cp.efficiency(), "%.6f")},
                      {"simulated_days", std::to_string(days)},
                      {"seed", std::to_string(c.seed)},
                      {"best_x_kw", fmt(r.best_x, "%.6f")},
                      {"best_total_eur", fmt(r.best_total, "%.2f")},
                      {"zero_total_eur", fmt(r.zero_total, "%.2f")},
                      {"nelder_mead_evaluations", std::to_string(r.search.evaluations)},
                      {"nelder_mead_converged", r.search.converged ? "true" : "false"},
                      {"exp_fit_a", fmt(r.fit.a, "%.6f")},
                      {"exp_fit_b", fmt(r.fit.b, "%.8f")},
                      {"exp_fit_c0", fmt(r.fit.c0, "%.6f")},
                      {"exp_fit_x_kw", fmt(r.exp_fit_x, "%.6f")}});
    overview[0].second += (overview[0].second.empty() ? "" : ",") + tag;
    overview.push_back({"best_x_kw.l" + tag, fmt(r.best_x, "%.6f")});
    overview.push_back({"exp_fit_x_kw.l" + tag, fmt(r.exp_fit_x, "%.6f")});
    std::cout << "lifespan " << tag << " yr: best x = " << fmt(r.best_x, "%.2f")
              << " kW (total " << fmt(r.best_total, "%.0f") << " EUR, x=0 "
              << fmt(r.zero_total, "%.0f") << " EUR), exp-fit x = " << fmt(r.exp_fit_x, "%.2f")
              << " kW\n";
  }
  write_key_values((p.out / "sizing_summary.txt").string(), overview);
}

void cmd_periodic(const RunConfig& c, const Paths& p, double pv_kw) {
  OpexStack st = build_stack(c, p, 1);
  const MpcConfig& cfg = st.mpc;
  const int spd = cfg.steps_per_day();
  const int n_pv = spd * cfg.substeps();
  std::vector<double> pv(static_cast<std::size_t>(n_pv), 0.0);
  if (pv_kw > 0.0) {
    CostParams cost = c.cost;
    cost.lifespan = c.lifespans.front();
    const double p_stc = cost.efficiency() * pv_kw;
    const PvPowerSeries hist =
        generate_synthetic_series(st.weather, st.panel.scaled_to(p_stc), st.samples_per_day, 0);
    const PvStochasticModel model = fit_stochastic_model(hist, st.fit);
    Rng rng = make_rng(opex_seed(c.seed, p_stc), "sample_year");
    const SampledYear year = sample_year(model, model.y_init, model.first_day, 365, rng, st.rejection);
    for (int d = 0; d < 365; ++d) {
      const auto day = year.power.day(static_cast<std::size_t>(d));
      for (int i = 0; i < n_pv; ++i) pv[i] += day[i] / 365.0;
    }
  }
  std::vector<double> d_star(static_cast<std::size_t>(spd), 0.0);
  std::vector<double> c_star(static_cast<std::size_t>(spd), 0.0);
  for (std::size_t k = 0; k < static_cast<std::size_t>(365 * spd); ++k) {
    d_star[k % spd] += st.workload.demand[k] / 365.0;
    c_star[k % spd] += st.workload.price[k] / 365.0;
  }
  const PeriodicTrajectory tr = compute_periodic_trajectory(st.model, cfg, d_star, c_star, pv);
  const fs::path file = p.out / "periodic.csv";
  write_periodic_csv(file.string(), tr);
  std::cout << "periodicity gap " << fmt(tr.periodicity_gap, "%.3e") << " m, objective "
            << fmt(tr.objective, "%.4f") << "; wrote " << file.string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PV sizing for a pumped water network under economic MPC"};
  app.require_subcommand(1);
  std::string config_path;
  std::string out_dir = "out";
  app.add_option("-c,--config", config_path, "Configuration file (built-in defaults when omitted)")
      ->check(CLI::ExistingFile);
  app.add_option("-o,--out", out_dir, "Directory for stage inputs and outputs")
      ->capture_default_str();

  double synth_kw = 100.0;
  auto* synth = app.add_subcommand("synth", "Write synthetic weather, PV power, prices and demand");
  synth->add_option("--pv-kw", synth_kw, "Nameplate capacity of the PV power series [kW]")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);

  auto* fit = app.add_subcommand("fit", "Fit the stochastic PV model to power.csv");

  int sample_days = 7;
  int sample_count = 1;
  auto* sample = app.add_subcommand("sample", "Draw PV scenarios from the fitted model");
  sample->add_option("--days", sample_days, "Days per scenario")->capture_default_str()->check(CLI::Range(1, 3650));
  sample->add_option("--scenarios", sample_count, "Number of scenarios")->capture_default_str()->check(CLI::Range(1, 1000));

  int sim_days = -1;
  double sim_kw = 0.0;
  auto* simulate = app.add_subcommand("simulate", "Closed-loop EMPC run for one PV size");
  simulate->add_option("--days", sim_days, "Simulated days, extrapolated to a year (default run.days)")
      ->check(CLI::Range(1, 365));
  simulate->add_option("--pv-kw", sim_kw, "Installed PV capacity x [kW]")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);

  int size_days = -1;
  std::vector<double> size_lifespans;
  auto* size = app.add_subcommand("size", "Nelder-Mead PV sizing plus exponential post-fit");
  size->add_option("--days", size_days, "Simulated days per evaluation (default run.days)")
      ->check(CLI::Range(1, 365));
  size->add_option("--lifespans", size_lifespans, "Comma-separated lifespans in years (default cost.lifespans)")
      ->delimiter(',');

  double periodic_kw = 0.0;
  auto* periodic = app.add_subcommand("periodic", "Periodic reference trajectory of the average day");
  periodic->add_option("--pv-kw", periodic_kw, "Installed PV capacity x [kW]")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    RunConfig cfg;
    if (!config_path.empty()) {
      cfg = load_config(config_path);
    } else {
      cfg = parse_config(default_config_text(), "<defaults>");
    }
    Paths paths{out_dir};
    fs::create_directories(paths.out);

    if (synth->parsed()) cmd_synth(cfg, paths, synth_kw);
    if (fit->parsed()) cmd_fit(cfg, paths);
    if (sample->parsed()) cmd_sample(cfg, paths, sample_days, sample_count);
    if (simulate->parsed()) cmd_simulate(cfg, paths, sim_days > 0 ? sim_days : cfg.days, sim_kw);
    if (size->parsed()) {
      if (!size_lifespans.empty()) {
        cfg.lifespans = size_lifespans;
        validate_config(cfg);
      }
      cmd_size(cfg, paths, size_days > 0 ? size_days : cfg.days, cfg.lifespans);
    }
    if (periodic->parsed()) cmd_periodic(cfg, paths, periodic_kw);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error:\n";
    for (const auto& v : e.violations()) std::cerr << "  - " << v << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
