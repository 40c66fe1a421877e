#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pvsizing/empc.hpp"
#include "pvsizing/pv_physical.hpp"
#include "pvsizing/pv_stochastic.hpp"
#include "pvsizing/sizing.hpp"
#include "pvsizing/wdn_network.hpp"

namespace pvsizing {

/// Everything a CLI run needs. Relative paths are resolved against the
/// directory of the configuration file.
struct RunConfig {
  std::string origin = "<defaults>";
  std::uint64_t seed = 42;
  int days = 365;
  PlantKind plant = PlantKind::truth;

  std::string weather_file;  // empty: the synth output
  std::string price_file;
  std::string demand_file;
  std::string network_file;  // empty: built-in toy network
  int history_days = 730;
  int samples_per_day = 96;

  ClimateParams climate;
  // Per-kW panel coefficients; scaled to the installed capacity at run time.
  PvPanelParams panel = PvPanelParams::crystalline_silicon(1.0);
  FitOptions fit;
  RejectionOptions rejection;
  ExcitationPlan excitation;
  MpcConfig mpc;
  bool w_from_identification = false;  // use the measured one-step box instead of mpc.w_box
  WorkloadOptions workload;
  CostParams cost;
  std::vector<double> lifespans = {25.0};
  double x0 = 100.0;
  NelderMeadOptions search{25.0, 2.0, 15, 0.0};
  bool pooled_fit = true;

  ToyNetworkSpec network() const;
};

/// Parses sectioned key = value text. Unknown keys, malformed numbers and
/// every violated invariant are reported together in one ConfigError.
RunConfig parse_config(const std::string& text, const std::string& origin,
                       const std::string& base_dir = ".");
RunConfig load_config(const std::string& path);

/// Throws ConfigError listing every problem (parameter ranges, missing files).
void validate_config(const RunConfig& config);

/// Text of a configuration with every key at its default value.
std::string default_config_text();

}  // namespace pvsizing
