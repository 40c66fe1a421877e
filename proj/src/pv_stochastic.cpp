#include "pvsizing/pv_stochastic.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <numbers>
#include <numeric>
#include <sstream>

#include "pvsizing/errors.hpp"
#include "pvsizing/lognormal_sum.hpp"

namespace pvsizing {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double sum_sq(std::span<const double> y) {
  double s = 0.0;
  for (double v : y) s += v * v;
  return s;
}

double log_sum_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

double prior_epsilon_mean(const DayState& s, const ArmaParams& a) {
  return a.mu + a.phi * s.last_epsilon + a.theta * s.last_zeta;
}

// ln f_p(x) for p = s², s ~ N(m, σ²).
double log_prior_p(double x, double m, double sigma) {
  if (!(x > 0.0)) return kNegInf;
  const double r = std::sqrt(x);
  const double zp = (r - m) / sigma;
  const double zn = (-r - m) / sigma;
  const double norm = -std::log(sigma) - 0.5 * std::log(2.0 * std::numbers::pi);
  return log_sum_exp(norm - 0.5 * zp * zp, norm - 0.5 * zn * zn) - std::log(2.0 * r);
}

void check_observed(const DayState& state, std::span<const double> observed) {
  if (observed.size() > state.profile.size()) {
    throw InputError("observed prefix is longer than the day");
  }
  const auto& w = state.window;
  const int end = std::min<int>(static_cast<int>(observed.size()), w.sundown + 1);
  for (int i = w.sunrise; i < end; ++i) {
    if (!(observed[i] > 0.0)) {
      throw InputError("observed power must be positive inside the daylight window (index " +
                       std::to_string(i) + ")");
    }
  }
}

// Number of observed indices inside the daylight window.
int observed_daylight(const DayState& state, std::size_t observed) {
  const auto& w = state.window;
  if (!w.valid()) return 0;
  const int end = std::min<int>(static_cast<int>(observed), w.sundown + 1);
  return std::max(0, end - w.sunrise);
}

}  // namespace

const std::vector<double>* PvStochasticModel::history_profile(std::int64_t day) const {
  if (y_history.size() != 365) return nullptr;
  const std::int64_t k = ((day - (first_day - 365)) % 365 + 365) % 365;
  return &y_history[static_cast<std::size_t>(k)];
}

DaylightWindow daylight_window(std::span<const double> y, double threshold) {
  DaylightWindow w;
  if (y.empty()) return w;
  const double peak = *std::max_element(y.begin(), y.end());
  if (!(peak > 0.0)) return w;
  const double cut = threshold * peak;
  int first = -1, last = -1;
  for (int i = 0; i < static_cast<int>(y.size()); ++i) {
    if (y[i] >= cut && y[i] > 0.0) {
      if (first < 0) first = i;
      last = i;
    }
  }
  w.sunrise = first;
  w.sundown = last;
  return w;
}

DayState make_day_state(std::int64_t day, std::vector<double> profile, double last_epsilon,
                        double last_zeta, double sunrise_threshold) {
  DayState s;
  s.day = day;
  s.window = daylight_window(profile, sunrise_threshold);
  s.profile = std::move(profile);
  s.last_epsilon = last_epsilon;
  s.last_zeta = last_zeta;
  return s;
}

std::vector<double> update_profile(const DayState& prev, std::span<const double> x_prev,
                                   const PvStochasticModel& model) {
  if (x_prev.size() != prev.profile.size()) {
    throw InputError("update_profile: X and Y differ in length");
  }
  const double g = model.g_fit(static_cast<double>(prev.day));
  if (!(g > 0.0)) {
    throw ModelError("smoothed daily maximum g(" + std::to_string(prev.day) +
                     ") = " + std::to_string(g) + " is not positive");
  }
  std::vector<double> next(x_prev.size());
  for (std::size_t i = 0; i < next.size(); ++i) {
    next[i] = model.alpha * x_prev[i] / g + (1.0 - model.alpha) * prev.profile[i];
  }
  return next;
}

double optimal_multiplier(std::span<const double> y, std::span<const double> x) {
  if (x.size() != y.size()) throw InputError("optimal_multiplier: X and Y differ in length");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    num += y[i] * x[i];
    den += y[i] * y[i];
  }
  if (!(den > 0.0)) throw ModelError("optimal_multiplier: degenerate day with Y == 0");
  return num / den;
}

std::vector<double> correction_terms(std::span<const double> y, std::span<const double> x,
                                     double p) {
  if (x.size() != y.size()) throw InputError("correction_terms: X and Y differ in length");
  if (!(p > 0.0)) throw ModelError("correction_terms needs p > 0");
  std::vector<double> d(y.size(), 1.0);
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] > 0.0) d[i] = x[i] / (p * y[i]);
  }
  return d;
}

MultiplierModel fit_multiplier_model(std::span<const double> p_series,
                                     std::span<const double> day_indices, int fourier_order) {
  if (p_series.size() != day_indices.size()) {
    throw FitError("fit_multiplier_model: series and day indices differ in length");
  }
  if (p_series.size() < 365) {
    throw FitError("fit_multiplier_model: need at least 365 days of multipliers");
  }
  std::vector<double> root(p_series.size());
  for (std::size_t i = 0; i < p_series.size(); ++i) {
    if (!(p_series[i] >= 0.0)) throw FitError("fit_multiplier_model: negative multiplier");
    root[i] = std::sqrt(p_series[i]);
  }
  MultiplierModel out;
  out.gamma = fit_periodic(day_indices, root, fourier_order);
  std::vector<double> resid(root.size());
  for (std::size_t i = 0; i < root.size(); ++i) resid[i] = root[i] - out.gamma(day_indices[i]);
  out.arma = fit_arma11(resid);
  return out;
}

LogArParams fit_correction_model(const std::vector<std::vector<double>>& chains) {
  return fit_log_ar(chains);
}

MultiplierDraw sample_multiplier(const DayState& state, const PvStochasticModel& model,
                                 Rng& rng) {
  const auto& a = model.arma;
  MultiplierDraw d;
  d.zeta = a.sigma > 0.0 ? std::normal_distribution<double>(0.0, a.sigma)(rng) : 0.0;
  d.epsilon = prior_epsilon_mean(state, a) + d.zeta;
  const double s = model.gamma_fit(static_cast<double>(state.day)) + d.epsilon;
  d.p = s * s;
  return d;
}

double consistency_residual(std::span<const double> y, std::span<const double> delta) {
  double r = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) r += y[i] * y[i] * (delta[i] - 1.0);
  return r;
}

double default_tolerance(std::span<const double> y) { return 0.01 * sum_sq(y); }

namespace {

// Rolls ln δ over [from, sundown] starting at ln δ^{from-1} = start.
void roll_chain(std::vector<double>& delta, int from, int to, double start,
                const LogArParams& c, Rng& rng) {
  std::normal_distribution<double> z(0.0, 1.0);
  double l = start;
  for (int i = from; i <= to; ++i) {
    l = c.mu + c.phi * l + (c.sigma > 0.0 ? c.sigma * z(rng) : 0.0);
    delta[i] = std::exp(l);
  }
}

CorrectionSample reject_loop(const DayState& state, std::vector<double> delta, int from,
                             double start, const LogArParams& c, Rng& rng, double tol,
                             std::size_t max_attempts) {
  if (!(tol > 0.0)) throw ParameterError("rejection tolerance must be positive");
  const auto& w = state.window;
  for (std::size_t attempt = 1; attempt <= max_attempts; ++attempt) {
    roll_chain(delta, from, w.sundown, start, c, rng);
    const double r = consistency_residual(state.profile, delta);
    if (std::abs(r) < tol) return {std::move(delta), attempt};
    if (from > w.sundown) break;
  }
  throw SamplingError("correction sampler: no draw within tolerance " + std::to_string(tol) +
                          " after " + std::to_string(max_attempts) + " attempts",
                      max_attempts);
}

}  // namespace

CorrectionSample sample_corrections_presunrise(const DayState& state,
                                               const PvStochasticModel& model, Rng& rng,
                                               double tol, std::size_t max_attempts) {
  std::vector<double> delta(state.profile.size(), 1.0);
  if (!state.window.valid()) {
    if (!(tol > 0.0)) throw ParameterError("rejection tolerance must be positive");
    return {std::move(delta), 1};
  }
  return reject_loop(state, std::move(delta), state.window.sunrise,
                     model.logar.stationary_mean(), model.logar, rng, tol, max_attempts);
}

std::size_t MultiplierPosterior::mode() const {
  return static_cast<std::size_t>(
      std::max_element(probability.begin(), probability.end()) - probability.begin());
}

double MultiplierPosterior::sample(Rng& rng) const {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double target = u(rng);
  double acc = 0.0;
  std::size_t k = 0;
  for (; k + 1 < probability.size(); ++k) {
    acc += probability[k];
    if (target < acc) break;
  }
  const double x = grid[k] + (u(rng) - 0.5) * cell_width;
  return std::max(x, 0.0);
}

MultiplierPosterior update_multiplier_density_postsunrise(const DayState& state,
                                                          const PvStochasticModel& model,
                                                          std::span<const double> observed,
                                                          int grid_size) {
  if (grid_size < 2) throw ParameterError("posterior grid needs at least 2 points");
  check_observed(state, observed);
  const auto& c = model.logar;
  const auto& a = model.arma;
  if (!(c.sigma > 0.0)) {
    throw ModelError("post-sunrise density needs a positive correction noise sigma");
  }
  const double m = model.gamma_fit(static_cast<double>(state.day)) + prior_epsilon_mean(state, a);

  MultiplierPosterior post;
  if (!(a.sigma > 0.0)) {
    post.grid = {m * m};
    post.probability = {1.0};
    post.log_density = {0.0};
    return post;
  }
  const double upper = std::pow(std::abs(m) + 4.0 * a.sigma, 2);
  post.cell_width = upper / grid_size;
  post.grid.resize(grid_size);
  post.log_density.resize(grid_size);
  for (int k = 0; k < grid_size; ++k) {
    post.grid[k] = post.cell_width * (k + 0.5);
    post.log_density[k] = log_prior_p(post.grid[k], m, a.sigma);
  }

  const auto& w = state.window;
  const int n_obs = observed_daylight(state, observed.size());
  const auto& y = state.profile;
  if (n_obs > 0) {
    const int prefix_end = w.sunrise + n_obs;  // exclusive
    const int tail_len = w.sundown + 1 - prefix_end;
    double window_sq = 0.0, prefix_yx = 0.0;
    for (int i = w.sunrise; i <= w.sundown; ++i) window_sq += y[i] * y[i];
    for (int i = w.sunrise; i < prefix_end; ++i) prefix_yx += y[i] * observed[i];

    std::vector<double> log_ratio(n_obs);  // ln(X/Y) on the prefix
    for (int j = 0; j < n_obs; ++j) {
      const int i = w.sunrise + j;
      log_ratio[j] = std::log(observed[i]) - std::log(y[i]);
    }

    ArChainMoments moments;
    std::unique_ptr<LognormalChainSum> tail;
    std::vector<double> means;
    if (tail_len > 0) {
      moments = ar_chain_moments(tail_len, c.mu, c.phi, c.sigma);
      std::vector<double> weights(tail_len);
      for (int j = 0; j < tail_len; ++j) weights[j] = y[prefix_end + j] * y[prefix_end + j];
      tail = std::make_unique<LognormalChainSum>(std::move(weights), moments.cov);
      means.resize(tail_len);
    }

    const double inv_var = 1.0 / (c.sigma * c.sigma);
    for (int k = 0; k < grid_size; ++k) {
      if (post.log_density[k] == kNegInf) continue;
      const double x = post.grid[k];
      const double lx = std::log(x);
      double ll = 0.0;
      double prev = c.stationary_mean();
      for (int j = 0; j < n_obs; ++j) {
        const double l = log_ratio[j] - lx;
        const double kres = l - c.mu - c.phi * prev;
        ll -= 0.5 * kres * kres * inv_var;
        prev = l;
      }
      if (tail) {
        const double r = window_sq - prefix_yx / x;
        if (!(r > 0.0)) {
          post.log_density[k] = kNegInf;
          continue;
        }
        for (int j = 0; j < tail_len; ++j) {
          means[j] = moments.mean_offset[j] + moments.start_gain[j] * prev;
        }
        ll += tail->approx(means).log_pdf(r);
      }
      post.log_density[k] += ll;
    }
  }

  const double peak = *std::max_element(post.log_density.begin(), post.log_density.end());
  if (!std::isfinite(peak)) {
    throw NumericalError("multiplier posterior underflows on every grid point");
  }
  post.probability.resize(grid_size);
  double total = 0.0;
  for (int k = 0; k < grid_size; ++k) {
    post.probability[k] = std::exp(post.log_density[k] - peak);
    total += post.probability[k];
  }
  for (auto& pr : post.probability) pr /= total;
  return post;
}

CorrectionSample sample_corrections_postsunrise(const DayState& state,
                                                const PvStochasticModel& model, double p_sample,
                                                std::span<const double> observed, Rng& rng,
                                                double tol, std::size_t max_attempts) {
  if (!(p_sample > 0.0)) throw ParameterError("multiplier sample must be positive");
  check_observed(state, observed);
  std::vector<double> delta(state.profile.size(), 1.0);
  const auto& w = state.window;
  if (!w.valid()) return {std::move(delta), 1};
  const int n_obs = observed_daylight(state, observed.size());
  double start = model.logar.stationary_mean();
  for (int j = 0; j < n_obs; ++j) {
    const int i = w.sunrise + j;
    delta[i] = observed[i] / (p_sample * state.profile[i]);
    start = std::log(delta[i]);
  }
  return reject_loop(state, std::move(delta), w.sunrise + n_obs, start, model.logar, rng, tol,
                     max_attempts);
}

std::vector<std::vector<double>> sample_scenarios_fast(const DayState& state,
                                                       const PvStochasticModel& model,
                                                       std::span<const double> observed,
                                                       int scenarios, Rng& rng) {
  if (scenarios < 1) throw ParameterError("scenario count must be >= 1");
  check_observed(state, observed);
  const auto& y = state.profile;
  const int n = static_cast<int>(y.size());
  const int ic = static_cast<int>(observed.size());
  const auto& w = state.window;
  const auto& c = model.logar;
  const int n_obs = observed_daylight(state, observed.size());
  const bool use_posterior = n_obs > 0 && c.sigma > 0.0;

  MultiplierPosterior post;
  if (use_posterior) post = update_multiplier_density_postsunrise(state, model, observed);

  std::vector<std::vector<double>> out(scenarios);
  std::vector<double> delta(n, 1.0);
  for (int s = 0; s < scenarios; ++s) {
    double p = 0.0;
    double start = c.stationary_mean();
    int from = w.sunrise;
    if (use_posterior) {
      p = post.sample(rng);
      from = w.sunrise + n_obs;
      if (p > 0.0) start = std::log(observed[from - 1] / (p * y[from - 1]));
    } else {
      p = sample_multiplier(state, model, rng).p;
    }
    std::fill(delta.begin(), delta.end(), 1.0);
    if (w.valid()) roll_chain(delta, std::max(from, ic), w.sundown, start, c, rng);
    auto& x = out[s];
    x.resize(n - ic);
    for (int i = ic; i < n; ++i) x[i - ic] = p * y[i] * delta[i];
  }
  return out;
}

SampledYear sample_year(const PvStochasticModel& model, std::span<const double> y_init,
                        std::int64_t first_day, int days, Rng& rng,
                        const RejectionOptions& options) {
  if (days < 1) throw InputError("sample_year needs days >= 1");
  if (static_cast<int>(y_init.size()) != model.n_pv) {
    throw InputError("initial profile length " + std::to_string(y_init.size()) +
                     " does not match n_pv = " + std::to_string(model.n_pv));
  }
  SampledYear out;
  out.power.start_day = first_day;
  out.power.samples_per_day = model.n_pv;
  out.power.values.reserve(static_cast<std::size_t>(days) * model.n_pv);
  out.states.reserve(days);
  out.multipliers.reserve(days);

  std::vector<double> y(y_init.begin(), y_init.end());
  double eps = 0.0, zeta = 0.0;
  for (int d = 0; d < days; ++d) {
    DayState state =
        make_day_state(first_day + d, std::move(y), eps, zeta, model.sunrise_threshold);
    const auto draw = sample_multiplier(state, model, rng);

    double tol = options.tol_fraction * sum_sq(state.profile);
    CorrectionSample corr;
    for (int widen = 0;; ++widen) {
      try {
        corr = sample_corrections_presunrise(state, model, rng,
                                             tol > 0.0 ? tol : 1e-300, options.max_attempts);
        break;
      } catch (const SamplingError&) {
        if (widen >= options.max_widenings) throw;
        tol *= 2.0;
      }
    }

    std::vector<double> x(model.n_pv);
    for (int i = 0; i < model.n_pv; ++i) x[i] = draw.p * state.profile[i] * corr.delta[i];
    out.power.values.insert(out.power.values.end(), x.begin(), x.end());
    out.multipliers.push_back(draw.p);

    const auto* anchor = options.anchor_profile ? model.history_profile(state.day + 1) : nullptr;
    if (anchor) {
      DayState memory = state;
      memory.profile = *anchor;
      y = update_profile(memory, x, model);
    } else {
      y = update_profile(state, x, model);
    }
    eps = draw.epsilon;
    zeta = draw.zeta;
    out.states.push_back(std::move(state));
  }
  return out;
}

PvStochasticModel fit_stochastic_model(const PvPowerSeries& series, const FitOptions& options,
                                       FitReport* report) {
  if (options.alpha < 0.0 || options.alpha > 1.0) {
    throw ParameterError("EWMA alpha must lie in [0, 1]");
  }
  const int spd = series.samples_per_day;
  if (spd < 2) throw InputError("need at least 2 samples per day");
  if (series.values.size() % spd != 0) throw InputError("power series has a ragged last day");
  const auto ndays = series.days();
  if (ndays < 366) {
    throw FitError("need at least 366 days of power data, got " + std::to_string(ndays));
  }
  for (double v : series.values) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw InputError("power values must be finite and >= 0");
  }

  PvStochasticModel model;
  model.alpha = options.alpha;
  model.n_pv = spd;
  model.sunrise_threshold = options.sunrise_threshold;

  std::vector<double> t(ndays), peak(ndays);
  for (std::size_t d = 0; d < ndays; ++d) {
    const auto day = series.day(d);
    t[d] = static_cast<double>(series.start_day + static_cast<std::int64_t>(d));
    peak[d] = *std::max_element(day.begin(), day.end());
  }
  model.g_fit = fit_periodic(t, peak, options.g_order);

  std::vector<std::vector<double>> profiles(ndays);
  {
    const double g0 = model.g_fit(t[0]);
    if (!(g0 > 0.0)) throw ModelError("smoothed daily maximum is not positive on the first day");
    const auto x0 = series.day(0);
    profiles[0].resize(spd);
    for (int i = 0; i < spd; ++i) profiles[0][i] = x0[i] / g0;
  }
  for (std::size_t d = 1; d < ndays; ++d) {
    DayState prev;
    prev.day = static_cast<std::int64_t>(t[d - 1]);
    prev.profile = profiles[d - 1];
    profiles[d] = update_profile(prev, series.day(d - 1), model);
  }

  std::vector<double> p, p_days;
  std::vector<std::vector<double>> chains;
  for (std::size_t d = 1; d < ndays; ++d) {
    const auto x = series.day(d);
    const auto& y = profiles[d];
    if (!(sum_sq(y) > 0.0)) continue;
    const double pd = optimal_multiplier(y, x);
    p.push_back(pd);
    p_days.push_back(t[d]);
    if (!(pd > 0.0)) continue;
    const auto w = daylight_window(y, options.sunrise_threshold);
    const auto delta = correction_terms(y, x, pd);
    std::vector<double> chain;
    for (int i = w.sunrise; i <= w.sundown; ++i) {
      if (delta[i] > 0.0) {
        chain.push_back(delta[i]);
      } else if (!chain.empty()) {
        chains.push_back(std::move(chain));
        chain.clear();
      }
    }
    if (!chain.empty()) chains.push_back(std::move(chain));
  }

  auto mult = fit_multiplier_model(p, p_days, options.gamma_order);
  model.gamma_fit = mult.gamma;
  model.arma = mult.arma.params;
  model.arma_structure = mult.arma.structure;
  model.logar = fit_correction_model(chains);

  model.first_day = series.start_day + static_cast<std::int64_t>(ndays);
  model.y_init = profiles[ndays - 365];
  model.y_history.assign(profiles.end() - 365, profiles.end());

  if (report) {
    report->multipliers = p;
    report->profiles = profiles;
    report->correction_pairs = 0;
    for (const auto& ch : chains) report->correction_pairs += ch.size() - 1;
    report->arma = std::move(mult.arma);
  }
  return model;
}

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_list(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += fmt(v[i]);
  }
  return s;
}

void write_periodic(std::ostream& os, const std::string& key, const PeriodicFit& f) {
  os << key << ".period=" << fmt(f.period) << '\n';
  os << key << ".mean=" << fmt(f.mean) << '\n';
  os << key << ".cos=" << fmt_list(f.cos_coef) << '\n';
  os << key << ".sin=" << fmt_list(f.sin_coef) << '\n';
}

class KeyValues {
 public:
  explicit KeyValues(const std::string& path) : path_(path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open model file '" + path + "'");
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty() || line[0] == '#') continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        throw InputError(path + ":" + std::to_string(lineno) + ": expected key=value");
      }
      values_[line.substr(0, eq)] = line.substr(eq + 1);
    }
  }

  const std::string& raw(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw InputError(path_ + ": missing key '" + key + "'");
    return it->second;
  }

  double number(const std::string& key) const {
    const auto& s = raw(key);
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw InputError(path_ + ": key '" + key + "' is not a number: '" + s + "'");
    }
  }

  std::vector<double> list(const std::string& key) const {
    std::vector<double> out;
    std::stringstream ss(raw(key));
    std::string item;
    while (std::getline(ss, item, ',')) {
      try {
        out.push_back(std::stod(item));
      } catch (const std::exception&) {
        throw InputError(path_ + ": key '" + key + "' has a bad entry '" + item + "'");
      }
    }
    return out;
  }

  PeriodicFit periodic(const std::string& key) const {
    PeriodicFit f;
    f.period = number(key + ".period");
    f.mean = number(key + ".mean");
    f.cos_coef = list(key + ".cos");
    f.sin_coef = list(key + ".sin");
    if (f.cos_coef.size() != f.sin_coef.size()) {
      throw InputError(path_ + ": " + key + " cosine and sine orders differ");
    }
    return f;
  }

 private:
  std::string path_;
  std::map<std::string, std::string> values_;
};

}  // namespace

void save_model(const std::string& path, const PvStochasticModel& m) {
  std::ofstream os(path);
  if (!os) throw InputError("cannot write model file '" + path + "'");
  os << "# pvsizing stochastic PV model\n";
  os << "alpha=" << fmt(m.alpha) << '\n';
  os << "n_pv=" << m.n_pv << '\n';
  os << "sunrise_threshold=" << fmt(m.sunrise_threshold) << '\n';
  write_periodic(os, "g_fit", m.g_fit);
  write_periodic(os, "gamma_fit", m.gamma_fit);
  os << "arma.structure=" << m.arma_structure << '\n';
  os << "arma.mu=" << fmt(m.arma.mu) << '\n';
  os << "arma.phi=" << fmt(m.arma.phi) << '\n';
  os << "arma.theta=" << fmt(m.arma.theta) << '\n';
  os << "arma.sigma=" << fmt(m.arma.sigma) << '\n';
  os << "logar.mu=" << fmt(m.logar.mu) << '\n';
  os << "logar.phi=" << fmt(m.logar.phi) << '\n';
  os << "logar.sigma=" << fmt(m.logar.sigma) << '\n';
  os << "first_day=" << m.first_day << '\n';
  os << "y_init=" << fmt_list(m.y_init) << '\n';
  os << "y_history.days=" << m.y_history.size() << '\n';
  for (std::size_t k = 0; k < m.y_history.size(); ++k) {
    os << "y_history." << k << '=' << fmt_list(m.y_history[k]) << '\n';
  }
  if (!os) throw InputError("failed writing model file '" + path + "'");
}

PvStochasticModel load_model(const std::string& path) {
  const KeyValues kv(path);
  PvStochasticModel m;
  m.alpha = kv.number("alpha");
  m.n_pv = static_cast<int>(kv.number("n_pv"));
  m.sunrise_threshold = kv.number("sunrise_threshold");
  m.g_fit = kv.periodic("g_fit");
  m.gamma_fit = kv.periodic("gamma_fit");
  m.arma_structure = kv.raw("arma.structure");
  m.arma.mu = kv.number("arma.mu");
  m.arma.phi = kv.number("arma.phi");
  m.arma.theta = kv.number("arma.theta");
  m.arma.sigma = kv.number("arma.sigma");
  m.logar.mu = kv.number("logar.mu");
  m.logar.phi = kv.number("logar.phi");
  m.logar.sigma = kv.number("logar.sigma");
  m.first_day = static_cast<std::int64_t>(kv.number("first_day"));
  m.y_init = kv.list("y_init");
  const auto hist = static_cast<std::size_t>(kv.number("y_history.days"));
  for (std::size_t k = 0; k < hist; ++k) {
    m.y_history.push_back(kv.list("y_history." + std::to_string(k)));
    if (static_cast<int>(m.y_history.back().size()) != m.n_pv) {
      throw InputError(path + ": y_history." + std::to_string(k) + " has the wrong length");
    }
  }
  if (m.alpha < 0.0 || m.alpha > 1.0) throw InputError(path + ": alpha outside [0, 1]");
  if (m.n_pv < 2) throw InputError(path + ": n_pv must be >= 2");
  if (static_cast<int>(m.y_init.size()) != m.n_pv) {
    throw InputError(path + ": y_init has " + std::to_string(m.y_init.size()) +
                     " entries, expected " + std::to_string(m.n_pv));
  }
  return m;
}

}  // namespace pvsizing
