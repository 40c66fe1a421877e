#include <doctest.h>

#include <cmath>
#include <random>

#include "pvsizing/errors.hpp"
#include "pvsizing/pv_physical.hpp"

using namespace pvsizing;

namespace {

// Power law written out longhand with the crystalline-silicon constants.
double reference_power(double g_wm2, double t_amb, double wind, double p_stc) {
  const double tmod = t_amb + g_wm2 / (25.0 + 6.84 * wind);
  const double g = g_wm2 / 1000.0;
  const double t = tmod - 25.0;
  const double l = std::log(g);
  const double rel = 1.0 - 0.017237 * l - 0.040465 * l * l - 0.004702 * t + 0.000149 * t * l +
                     0.000170 * t * l * l + 0.000005 * t * t;
  return std::max(0.0, g * p_stc * rel);
}

}  // namespace

TEST_CASE("standard test conditions return the nameplate power exactly") {
  for (double p : {1.0, 7.5, 100.0, 262.4}) {
    const auto panel = PvPanelParams::crystalline_silicon(p);
    // Ambient chosen so the module sits at 25 °C with no wind.
    const WeatherSample w{0.0, 1000.0, 25.0 - 1000.0 / 25.0, 0.0};
    CHECK(module_temperature(w, panel) == 25.0);
    CHECK(panel_power(w, panel) == p);
  }
}

TEST_CASE("night samples produce zero power") {
  const auto panel = PvPanelParams::crystalline_silicon(50.0);
  CHECK(panel_power({0.0, 0.0, 10.0, 3.0}, panel) == 0.0);
  CHECK(panel_power({0.0, 0.999, 10.0, 3.0}, panel) == 0.0);
  CHECK(panel_power({0.0, 50.0, 10.0, 3.0}, panel) > 0.0);
}

TEST_CASE("panel power agrees with the longhand formula") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> g(1.0, 1200.0), t(-20.0, 35.0), v(0.0, 15.0);
  const auto panel = PvPanelParams::crystalline_silicon(80.0);
  for (int i = 0; i < 500; ++i) {
    const WeatherSample w{0.0, g(rng), t(rng), v(rng)};
    CHECK(panel_power(w, panel) ==
          doctest::Approx(reference_power(w.irradiance, w.ambient_temp, w.wind_speed, 80.0))
              .epsilon(1e-12));
  }
}

TEST_CASE("power is non-negative and linear in capacity") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> g(0.0, 1400.0), t(-30.0, 45.0), v(0.0, 25.0);
  const auto one = PvPanelParams::crystalline_silicon(1.0);
  const auto big = one.scaled_to(37.0);
  for (int i = 0; i < 1000; ++i) {
    const WeatherSample w{0.0, g(rng), t(rng), v(rng)};
    const double p1 = panel_power(w, one);
    CHECK(p1 >= 0.0);
    CHECK(panel_power(w, big) == doctest::Approx(37.0 * p1).epsilon(1e-12));
  }
}

TEST_CASE("Faiman denominator must be positive") {
  auto panel = PvPanelParams::crystalline_silicon(1.0);
  panel.mu0 = 0.0;
  panel.mu1 = 0.0;
  CHECK_THROWS_AS(module_temperature({0.0, 500.0, 10.0, 2.0}, panel), ParameterError);
}

TEST_CASE("synthetic series needs whole days") {
  std::vector<WeatherSample> w(95);
  CHECK_THROWS_AS(generate_synthetic_series(w, PvPanelParams::crystalline_silicon(1.0), 96),
                  InputError);
  w.resize(192);
  const auto s = generate_synthetic_series(w, PvPanelParams::crystalline_silicon(1.0), 96, 5);
  CHECK(s.days() == 2);
  CHECK(s.start_day == 5);
}

TEST_CASE("synthetic weather is seed-deterministic and physically plausible") {
  const ClimateParams c;
  const auto a = synth_weather(9, 10, 96, c);
  const auto b = synth_weather(9, 10, 96, c);
  const auto d = synth_weather(10, 10, 96, c);
  REQUIRE(a.size() == 960);
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].irradiance == b[i].irradiance);
    CHECK(a[i].irradiance >= 0.0);
    CHECK(a[i].irradiance <= 1.05 * clear_sky_irradiance(c, static_cast<int>(i / 96), (i % 96 + 0.5) / 4.0) + 1e-9);
    CHECK(a[i].wind_speed >= 0.0);
    differs = differs || a[i].irradiance != d[i].irradiance;
  }
  CHECK(differs);
  CHECK(a[0].irradiance == 0.0);  // midnight
}
