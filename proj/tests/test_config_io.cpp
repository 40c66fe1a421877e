#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "pvsizing/config.hpp"
#include "pvsizing/errors.hpp"
#include "pvsizing/io.hpp"

using namespace pvsizing;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "pvsizing_test_config_io";
  fs::create_directories(dir);
  return dir / name;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

std::vector<std::string> violations_of(const std::string& text) {
  try {
    parse_config(text, "<test>");
  } catch (const ConfigError& e) {
    return e.violations();
  }
  return {};
}

bool any_contains(const std::vector<std::string>& v, const std::string& needle) {
  for (const auto& s : v) {
    if (s.find(needle) != std::string::npos) return true;
  }
  return false;
}

}  // namespace

TEST_CASE("minimal shipped config loads with defaults") {
  const RunConfig c = load_config(PVSIZING_DATA_DIR "/minimal.cfg");
  const RunConfig d;
  CHECK(c.seed == 42);
  CHECK(c.days == d.days);
  CHECK(c.fit.alpha == d.fit.alpha);
  CHECK(c.mpc.barrier_a == 80.0);
  CHECK(c.cost.a_ins == 2.0);
  CHECK(c.lifespans == std::vector<double>{25.0});
  CHECK(c.network_file.empty());
}

TEST_CASE("full shipped config loads") {
  const RunConfig c = load_config(PVSIZING_DATA_DIR "/default.cfg");
  CHECK(fs::exists(c.network_file));
  CHECK(c.lifespans == std::vector<double>{25.0, 30.0, 35.0});
  CHECK(c.network().num_states() == 2);
}

TEST_CASE("default text round trips") {
  const RunConfig c = parse_config(default_config_text(), "<defaults>");
  CHECK(default_config_text() == default_config_text());
  CHECK(c.search.max_evals == 15);
  CHECK(c.x0 == 100.0);
}

TEST_CASE("EWMA weight outside its range is rejected") {
  const auto v = violations_of("[stochastic]\nalpha = 1.5\n");
  REQUIRE(v.size() == 1);
  CHECK(v[0].find("EWMA") != std::string::npos);
  CHECK(v[0].find("1.5") != std::string::npos);
}

TEST_CASE("missing price file is reported with its path") {
  const auto v = violations_of("[data]\nprice_file = /nonexistent/prices.csv\n");
  CHECK(any_contains(v, "/nonexistent/prices.csv"));
}

TEST_CASE("every violation is reported together") {
  const auto v = violations_of(
      "[stochastic]\nalpha = 0\n[mpc]\nbeta = -1\n[cost]\na_m = -3\n[run]\ndays = 0\n");
  CHECK(v.size() >= 4);
  CHECK(any_contains(v, "alpha"));
  CHECK(any_contains(v, "beta"));
  CHECK(any_contains(v, "a_m"));
  CHECK(any_contains(v, "run.days"));
}

TEST_CASE("unknown keys and malformed values carry context") {
  const auto v = violations_of("[mpc]\nbogus = 1\nbeta = abc\n[nosuch]\nx = 2\n");
  CHECK(any_contains(v, "[mpc] bogus"));
  CHECK(any_contains(v, "beta = 'abc'"));
  CHECK(any_contains(v, "[nosuch] x"));
}

TEST_CASE("syntax errors name the line") {
  const auto v = violations_of("[run]\nseed = 1\n[broken\n");
  REQUIRE(v.size() == 1);
  CHECK(v[0].find("<test>:3") != std::string::npos);
}

TEST_CASE("relative paths resolve against the config directory") {
  const fs::path prices = scratch("p.csv");
  write_hourly_csv(prices.string(), "eur_per_kwh", {0.1, 0.2});
  const fs::path cfg = scratch("rel.cfg");
  write_text(cfg, "[data]\nprice_file = p.csv\n");
  const RunConfig c = load_config(cfg.string());
  CHECK(fs::equivalent(c.price_file, prices));
}

TEST_CASE("weather CSV round trip") {
  std::vector<WeatherSample> w = {{0, 0, 1.5, 3}, {900, 12.25, 2, 4.5}};
  const auto p = scratch("w.csv").string();
  write_weather_csv(p, w);
  const auto r = read_weather_csv(p);
  REQUIRE(r.size() == 2);
  CHECK(r[1].timestamp == 900);
  CHECK(r[1].irradiance == 12.25);
  CHECK(r[1].wind_speed == 4.5);
}

TEST_CASE("hourly CSV round trip and sequence check") {
  const auto p = scratch("h.csv").string();
  write_hourly_csv(p, "m3_per_s", {0.07, 0.0625, 0.1});
  CHECK(read_hourly_csv(p, "m3_per_s") == std::vector<double>{0.07, 0.0625, 0.1});
  CHECK_THROWS_AS(read_hourly_csv(p, "eur_per_kwh"), InputError);
  write_text(p, "time_index,m3_per_s\n0,1\n2,1\n");
  CHECK_THROWS_WITH_AS(read_hourly_csv(p, "m3_per_s"), doctest::Contains(":3:"), InputError);
  write_text(p, "time_index,m3_per_s\n0,x\n");
  CHECK_THROWS_WITH_AS(read_hourly_csv(p, "m3_per_s"), doctest::Contains("not a number"),
                       InputError);
}

TEST_CASE("power CSV needs whole days") {
  const auto p = scratch("pw.csv").string();
  PvPowerSeries s;
  s.samples_per_day = 4;
  s.values = {0, 1, 2, 0, 0, 3, 1, 0};
  write_power_csv(p, s, 0.0);
  CHECK(read_power_csv(p, 4).values == s.values);
  CHECK_THROWS_AS(read_power_csv(p, 3), InputError);
}

TEST_CASE("scenario and sizing logs have the documented headers") {
  const auto p = scratch("s.csv").string();
  write_scenarios_csv(p, {{1, 2}, {3, 4}});
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  CHECK(line == "scenario_id,time_index,power_kw");
  std::getline(in, line);
  CHECK(line == "0,0,1");

  const auto q = scratch("log.csv").string();
  CostEvaluation e;
  e.x = 100;
  e.total = 5;
  e.seed = 9;
  e.evals = 1;
  write_sizing_log(q, {e});
  std::ifstream in2(q);
  std::getline(in2, line);
  CHECK(line == "x_kw,total_eur,opex_eur,capex_eur,seed,evals");
  std::getline(in2, line);
  CHECK(line == "100.000000,5.00,0.00,0.00,9,1");
}
