#pragma once

#include "pvsizing/pv_physical.hpp"
#include "pvsizing/random.hpp"
#include "pvsizing/sizing.hpp"
#include "pvsizing/wdn_network.hpp"

namespace fixture {

// Toy-network OPEX stack built the same way as the CLI defaults.
inline pvsizing::OpexStack toy_stack(std::uint64_t seed, int days, int history_days = 400) {
  using namespace pvsizing;
  OpexStack st;
  st.network = default_toy_network();
  ExcitationPlan plan;
  plan.seed = derive_seed(seed, "identification");
  plan.hold = st.mpc.dt;
  st.model = discretize(identify_linear_model(st.network, plan).model, st.mpc.dt);
  st.mpc.validate(st.model.n());
  st.weather = synth_weather(derive_seed(seed, "weather"), history_days, 96, ClimateParams{});
  st.samples_per_day = 96;
  st.panel = PvPanelParams::crystalline_silicon(1.0);
  st.workload = synth_workload(seed, WorkloadOptions{});
  st.days = days;
  return st;
}

}  // namespace fixture
