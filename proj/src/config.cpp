#include "pvsizing/config.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "pvsizing/errors.hpp"

namespace pvsizing {

namespace {

namespace fs = std::filesystem;

std::string fmt(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string fmt_list(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + fmt(v[i]);
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool parse_double(const std::string& text, double& out) {
  const std::string t = trim(text);
  if (t.empty()) return false;
  const auto r = std::from_chars(t.data(), t.data() + t.size(), out);
  return r.ec == std::errc() && r.ptr == t.data() + t.size();
}

bool parse_list(const std::string& text, std::vector<double>& out) {
  out.clear();
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    double v = 0.0;
    if (!parse_double(item, v)) return false;
    out.push_back(v);
  }
  return !out.empty();
}

using Errors = std::vector<std::string>;

struct Binding {
  std::string section;
  std::string key;
  std::function<bool(const std::string&)> set;  // false: malformed
  std::function<std::string()> get;
  const char* expected = "a number";
};

std::vector<Binding> bindings(RunConfig& c) {
  std::vector<Binding> b;
  const auto num = [&b](const char* s, const char* k, double& ref) {
    b.push_back({s, k, [&ref](const std::string& v) { return parse_double(v, ref); },
                 [&ref] { return fmt(ref); }});
  };
  const auto integer = [&b](const char* s, const char* k, auto& ref) {
    b.push_back({s, k,
                 [&ref](const std::string& v) {
                   double x = 0.0;
                   if (!parse_double(v, x) || x != static_cast<double>(static_cast<long long>(x))) {
                     return false;
                   }
                   ref = static_cast<std::remove_reference_t<decltype(ref)>>(x);
                   return true;
                 },
                 [&ref] { return std::to_string(ref); }, "an integer"});
  };
  const auto flag = [&b](const char* s, const char* k, bool& ref) {
    b.push_back({s, k,
                 [&ref](const std::string& v) {
                   const std::string t = trim(v);
                   if (t == "true" || t == "1" || t == "yes") ref = true;
                   else if (t == "false" || t == "0" || t == "no") ref = false;
                   else return false;
                   return true;
                 },
                 [&ref] { return std::string(ref ? "true" : "false"); }, "true or false"});
  };
  const auto text = [&b](const char* s, const char* k, std::string& ref) {
    b.push_back({s, k, [&ref](const std::string& v) { ref = trim(v); return true; },
                 [&ref] { return ref; }, "text"});
  };
  const auto list = [&b](const char* s, const char* k, std::vector<double>& ref) {
    b.push_back({s, k, [&ref](const std::string& v) { return parse_list(v, ref); },
                 [&ref] { return fmt_list(ref); }, "a comma-separated list of numbers"});
  };

  b.push_back({"run", "seed",
               [&c](const std::string& v) {
                 const std::string t = trim(v);
                 const auto r = std::from_chars(t.data(), t.data() + t.size(), c.seed);
                 return !t.empty() && r.ec == std::errc() && r.ptr == t.data() + t.size();
               },
               [&c] { return std::to_string(c.seed); }, "a non-negative integer"});
  integer("run", "days", c.days);
  b.push_back({"run", "plant",
               [&c](const std::string& v) {
                 const std::string t = trim(v);
                 if (t == "truth") c.plant = PlantKind::truth;
                 else if (t == "linear") c.plant = PlantKind::linear;
                 else return false;
                 return true;
               },
               [&c] { return std::string(c.plant == PlantKind::truth ? "truth" : "linear"); },
               "truth or linear"});

  text("data", "weather_file", c.weather_file);
  text("data", "price_file", c.price_file);
  text("data", "demand_file", c.demand_file);
  text("data", "network_file", c.network_file);
  integer("data", "history_days", c.history_days);
  integer("data", "samples_per_day", c.samples_per_day);

  num("climate", "latitude_deg", c.climate.latitude_deg);
  num("climate", "clear_sky_scale", c.climate.clear_sky_scale);
  num("climate", "clearness_min", c.climate.clearness_min);
  num("climate", "clearness_bias", c.climate.clearness_bias);
  num("climate", "daily_ar_phi", c.climate.daily_ar_phi);
  num("climate", "daily_ar_sigma", c.climate.daily_ar_sigma);
  num("climate", "intraday_ar_phi", c.climate.intraday_ar_phi);
  num("climate", "intraday_ar_sigma", c.climate.intraday_ar_sigma);
  num("climate", "temp_mean", c.climate.temp_mean);
  num("climate", "temp_seasonal_amplitude", c.climate.temp_seasonal_amplitude);
  num("climate", "temp_diurnal_amplitude", c.climate.temp_diurnal_amplitude);
  num("climate", "temp_noise_sigma", c.climate.temp_noise_sigma);
  num("climate", "wind_mean", c.climate.wind_mean);
  num("climate", "wind_seasonal_amplitude", c.climate.wind_seasonal_amplitude);
  num("climate", "wind_noise_sigma", c.climate.wind_noise_sigma);

  num("panel", "k1", c.panel.k1);
  num("panel", "k2", c.panel.k2);
  num("panel", "k3", c.panel.k3);
  num("panel", "k4", c.panel.k4);
  num("panel", "k5", c.panel.k5);
  num("panel", "k6", c.panel.k6);
  num("panel", "mu0", c.panel.mu0);
  num("panel", "mu1", c.panel.mu1);

  num("stochastic", "alpha", c.fit.alpha);
  integer("stochastic", "g_order", c.fit.g_order);
  integer("stochastic", "gamma_order", c.fit.gamma_order);
  num("stochastic", "sunrise_threshold", c.fit.sunrise_threshold);
  num("stochastic", "tol_fraction", c.rejection.tol_fraction);
  integer("stochastic", "max_attempts", c.rejection.max_attempts);
  integer("stochastic", "max_widenings", c.rejection.max_widenings);
  flag("stochastic", "anchor_profile", c.rejection.anchor_profile);

  integer("network", "ident_days", c.excitation.days);
  integer("network", "ident_train_days", c.excitation.train_days);
  num("network", "ident_record_dt", c.excitation.record_dt);
  num("network", "ident_demand_mean", c.excitation.demand_mean);
  num("network", "ident_demand_noise", c.excitation.demand_noise);

  num("mpc", "barrier_a", c.mpc.barrier_a);
  num("mpc", "barrier_b", c.mpc.barrier_b);
  num("mpc", "beta", c.mpc.beta);
  integer("mpc", "scenarios", c.mpc.scenarios);
  num("mpc", "dt", c.mpc.dt);
  num("mpc", "dt_pv", c.mpc.dt_pv);
  num("mpc", "terminal_radius", c.mpc.terminal_radius);
  b.push_back({"mpc", "w_box",
               [&c](const std::string& v) {
                 if (trim(v) == "auto") {
                   c.w_from_identification = true;
                   return true;
                 }
                 c.w_from_identification = false;
                 return parse_list(v, c.mpc.w_box);
               },
               [&c] { return c.w_from_identification ? std::string("auto") : fmt_list(c.mpc.w_box); },
               "auto or a comma-separated list of numbers"});
  num("mpc", "grad_tol", c.mpc.grad_tol);
  integer("mpc", "max_iter", c.mpc.max_iter);
  list("mpc", "terminal_weights", c.mpc.terminal_weights);
  num("mpc", "terminal_inner", c.mpc.terminal_inner);
  list("mpc", "periodic_weights", c.mpc.periodic_weights);
  num("mpc", "periodic_tol", c.mpc.periodic_tol);

  list("workload", "price_profile", c.workload.price_profile);
  num("workload", "price_seasonal", c.workload.price_seasonal);
  num("workload", "price_daily_noise", c.workload.price_daily_noise);
  num("workload", "demand_mean", c.workload.demand_mean);
  num("workload", "demand_seasonal", c.workload.demand_seasonal);
  num("workload", "demand_daily_noise", c.workload.demand_daily_noise);
  num("workload", "demand_hourly_noise", c.workload.demand_hourly_noise);
  num("workload", "forecast_amplitude", c.workload.forecast_amplitude);
  integer("workload", "forecast_harmonics", c.workload.forecast_harmonics);

  num("cost", "a_ins", c.cost.a_ins);
  num("cost", "a_m", c.cost.a_m);
  num("cost", "degradation", c.cost.degradation);
  num("cost", "lambda_pv", c.cost.lambda_pv);
  list("cost", "lifespans", c.lifespans);

  num("sizing", "x0", c.x0);
  num("sizing", "step", c.search.step);
  num("sizing", "tol_x", c.search.tol_x);
  integer("sizing", "max_evals", c.search.max_evals);
  flag("sizing", "pooled_fit", c.pooled_fit);
  return b;
}

std::string resolve(const std::string& path, const std::string& base_dir) {
  if (path.empty()) return path;
  const fs::path p(path);
  if (p.is_absolute()) return path;
  return (fs::path(base_dir) / p).lexically_normal().string();
}

void add_lines(Errors& errs, const std::string& prefix, const std::string& what) {
  std::stringstream ss(what);
  std::string line;
  bool first = true;
  while (std::getline(ss, line)) {
    if (first) {
      first = false;
      if (line.find("invalid") == 0) continue;
    }
    line = trim(line);
    if (line.rfind("- ", 0) == 0) line = line.substr(2);
    if (!line.empty()) errs.push_back(prefix + line);
  }
}

}  // namespace

ToyNetworkSpec RunConfig::network() const {
  if (network_file.empty()) return default_toy_network();
  return load_network_spec(network_file);
}

void validate_config(const RunConfig& c) {
  Errors e;
  if (c.days < 1 || c.days > 365) e.push_back("run.days = " + std::to_string(c.days) + " must lie in [1, 365]");
  if (c.history_days < 366) {
    e.push_back("data.history_days = " + std::to_string(c.history_days) +
                " must be >= 366 (the model fit needs more than a year)");
  }
  if (c.samples_per_day < 2) e.push_back("data.samples_per_day must be >= 2");
  if (c.mpc.dt_pv > 0.0 && std::abs(kDaySeconds / c.mpc.dt_pv - c.samples_per_day) > 1e-9) {
    e.push_back("data.samples_per_day must equal 86400 / mpc.dt_pv");
  }
  for (const auto& [key, path] : {std::pair{"data.weather_file", &c.weather_file},
                                  std::pair{"data.price_file", &c.price_file},
                                  std::pair{"data.demand_file", &c.demand_file},
                                  std::pair{"data.network_file", &c.network_file}}) {
    if (!path->empty() && !fs::exists(*path)) {
      e.push_back(std::string(key) + ": file not found: " + *path);
    }
  }
  if (!c.network_file.empty() && fs::exists(c.network_file)) {
    try {
      load_network_spec(c.network_file);
    } catch (const ConfigError& err) {
      for (const auto& v : err.violations()) e.push_back("data.network_file: " + v);
    } catch (const Error& err) {
      add_lines(e, "data.network_file: ", err.what());
    }
  }

  if (!(c.fit.alpha > 0.0 && c.fit.alpha <= 1.0)) {
    e.push_back("stochastic.alpha = " + fmt(c.fit.alpha) + " is outside the EWMA range (0, 1]");
  }
  if (!(c.fit.sunrise_threshold > 0.0 && c.fit.sunrise_threshold < 1.0)) {
    e.push_back("stochastic.sunrise_threshold must lie in (0, 1)");
  }
  if (c.fit.g_order < 0 || c.fit.gamma_order < 0) e.push_back("stochastic Fourier orders must be >= 0");
  if (!(c.rejection.tol_fraction > 0.0)) e.push_back("stochastic.tol_fraction must be > 0");
  if (c.rejection.max_attempts < 1) e.push_back("stochastic.max_attempts must be >= 1");
  if (c.rejection.max_widenings < 0) e.push_back("stochastic.max_widenings must be >= 0");

  if (!(c.panel.mu0 > 0.0) || !(c.panel.mu1 >= 0.0)) {
    e.push_back("panel: mu0 must be > 0 and mu1 >= 0 (Faiman denominator)");
  }
  if (!(c.climate.latitude_deg > -90.0 && c.climate.latitude_deg < 90.0)) {
    e.push_back("climate.latitude_deg must lie in (-90, 90)");
  }
  if (!(c.climate.clearness_min >= 0.0 && c.climate.clearness_min < 1.0)) {
    e.push_back("climate.clearness_min must lie in [0, 1)");
  }
  if (!(std::abs(c.climate.daily_ar_phi) < 1.0) || !(std::abs(c.climate.intraday_ar_phi) < 1.0)) {
    e.push_back("climate AR coefficients must satisfy |phi| < 1");
  }

  if (c.excitation.days < 2 || c.excitation.train_days < 1 ||
      c.excitation.train_days >= c.excitation.days) {
    e.push_back("network: need 1 <= ident_train_days < ident_days");
  }
  if (!(c.excitation.record_dt > 0.0)) e.push_back("network.ident_record_dt must be > 0");
  if (!(c.excitation.demand_mean > 0.0)) e.push_back("network.ident_demand_mean must be > 0");

  ToyNetworkSpec net;
  bool have_net = true;
  try {
    net = c.network();
  } catch (const Error&) {
    have_net = false;
  }
  try {
    MpcConfig m = c.mpc;
    if (c.w_from_identification) m.w_box.assign(have_net ? net.num_states() : m.w_box.size(), 0.1);
    m.validate(have_net ? net.num_states() : -1);
  } catch (const ParameterError& err) {
    add_lines(e, "", err.what());
  }

  if (c.workload.price_profile.size() != 24) e.push_back("workload.price_profile needs 24 hourly values");
  for (double p : c.workload.price_profile) {
    if (!(p >= 0.0)) {
      e.push_back("workload.price_profile entries must be >= 0");
      break;
    }
  }
  if (!(c.workload.demand_mean > 0.0)) e.push_back("workload.demand_mean must be > 0");
  if (!(c.workload.forecast_amplitude >= 0.0)) e.push_back("workload.forecast_amplitude must be >= 0");
  if (!(std::abs(c.workload.price_seasonal) < 1.0) || !(std::abs(c.workload.demand_seasonal) < 1.0)) {
    e.push_back("workload seasonal amplitudes must lie in (-1, 1)");
  }

  if (c.lifespans.empty()) e.push_back("cost.lifespans must list at least one lifespan");
  for (double ell : c.lifespans) {
    CostParams p = c.cost;
    p.lifespan = ell;
    try {
      p.validate();
    } catch (const ParameterError& err) {
      add_lines(e, "lifespan " + fmt(ell) + ": ", err.what());
    }
  }

  if (!(c.x0 >= 0.0)) e.push_back("sizing.x0 must be >= 0");
  if (!(c.search.tol_x > 0.0)) e.push_back("sizing.tol_x must be > 0");
  if (c.search.max_evals < 2) e.push_back("sizing.max_evals must be >= 2");

  if (!e.empty()) throw ConfigError(std::move(e));
}

RunConfig parse_config(const std::string& text, const std::string& origin,
                       const std::string& base_dir) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& err) {
    throw ConfigError({origin + ":" + std::to_string(err.line()) + ": " + err.message()});
  }

  RunConfig c;
  c.origin = origin;
  auto table = bindings(c);
  std::map<std::pair<std::string, std::string>, Binding*> index;
  for (auto& b : table) index[{b.section, b.key}] = &b;

  Errors errs;
  for (const auto& [section, sec] : tree) {
    if (sec.empty() && !sec.data().empty()) {
      errs.push_back(origin + ": key '" + section + "' appears outside any section");
      continue;
    }
    for (const auto& [key, node] : sec) {
      const auto it = index.find({section, key});
      if (it == index.end()) {
        errs.push_back(origin + ": unknown key [" + section + "] " + key);
        continue;
      }
      const std::string value = node.get_value<std::string>();
      if (!it->second->set(value)) {
        errs.push_back(origin + ": [" + section + "] " + key + " = '" + value + "' is not " +
                       it->second->expected);
      }
    }
  }
  if (!errs.empty()) throw ConfigError(std::move(errs));

  c.weather_file = resolve(c.weather_file, base_dir);
  c.price_file = resolve(c.price_file, base_dir);
  c.demand_file = resolve(c.demand_file, base_dir);
  c.network_file = resolve(c.network_file, base_dir);
  validate_config(c);
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"cannot read configuration file " + path});
  std::stringstream ss;
  ss << in.rdbuf();
  const fs::path p(path);
  const std::string base = p.has_parent_path() ? p.parent_path().string() : ".";
  return parse_config(ss.str(), path, base);
}

std::string default_config_text() {
  RunConfig c;
  const auto table = bindings(c);
  std::string out;
  std::string current;
  for (const auto& b : table) {
    if (b.section != current) {
      if (!current.empty()) out += "\n";
      out += "[" + b.section + "]\n";
      current = b.section;
    }
    out += b.key + " = " + b.get() + "\n";
  }
  return out;
}

}  // namespace pvsizing
