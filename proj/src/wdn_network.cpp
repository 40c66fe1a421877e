#include "pvsizing/wdn_network.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <map>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "pvsizing/errors.hpp"
#include "pvsizing/random.hpp"

namespace pvsizing {

double hazen_williams_headloss(double k, double q) {
  return k * q * std::pow(std::abs(q), kHazenWilliamsExponent - 1.0);
}

namespace {

struct NodeRef {
  bool tank = false;
  int index = -1;
};

std::map<std::string, NodeRef> node_index(const ToyNetworkSpec& s) {
  std::map<std::string, NodeRef> idx;
  for (int i = 0; i < static_cast<int>(s.tanks.size()); ++i) idx[s.tanks[i].name] = {true, i};
  for (int i = 0; i < static_cast<int>(s.junctions.size()); ++i) {
    idx[s.junctions[i].name] = {false, i};
  }
  return idx;
}

// Pipe/node incidence split into junction (unknown head) and tank (fixed
// head) parts. Row k: -1 at the upstream node, +1 downstream.
struct Topology {
  Eigen::MatrixXd a12;  // pipes x junctions
  Eigen::MatrixXd a10;  // pipes x tanks
  std::vector<int> pump_junction;
};

Topology topology(const ToyNetworkSpec& s) {
  const auto idx = node_index(s);
  const auto np = static_cast<Eigen::Index>(s.pipes.size());
  Topology t;
  t.a12 = Eigen::MatrixXd::Zero(np, static_cast<Eigen::Index>(s.junctions.size()));
  t.a10 = Eigen::MatrixXd::Zero(np, static_cast<Eigen::Index>(s.tanks.size()));
  for (Eigen::Index k = 0; k < np; ++k) {
    const auto& p = s.pipes[k];
    const auto& a = idx.at(p.from);
    const auto& b = idx.at(p.to);
    (a.tank ? t.a10 : t.a12)(k, a.index) -= 1.0;
    (b.tank ? t.a10 : t.a12)(k, b.index) += 1.0;
  }
  for (const auto& p : s.pumps) t.pump_junction.push_back(idx.at(p.node).index);
  return t;
}

}  // namespace

void ToyNetworkSpec::validate() const {
  std::vector<std::string> v;
  std::map<std::string, int> names;
  for (const auto& t : tanks) names[t.name]++;
  for (const auto& j : junctions) names[j.name]++;
  for (const auto& [n, c] : names) {
    if (c > 1) v.push_back("node name '" + n + "' is used " + std::to_string(c) + " times");
  }
  if (tanks.empty()) v.push_back("network needs at least one tank");
  if (states.empty()) v.push_back("network needs at least one state");
  std::vector<int> tanks_per_state(states.size(), 0);
  for (const auto& t : tanks) {
    if (!(t.area > 0.0)) v.push_back("tank " + t.name + ": area must be > 0");
    if (t.state < 0 || t.state >= num_states()) {
      v.push_back("tank " + t.name + ": state " + std::to_string(t.state) + " does not exist");
    } else {
      tanks_per_state[t.state]++;
    }
  }
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (tanks_per_state[i] == 0) v.push_back("state " + std::to_string(i) + " has no tanks");
    if (!(states[i].min_level >= 0.0 && states[i].min_level < states[i].max_level)) {
      v.push_back("state " + std::to_string(i) + ": need 0 <= min_level < max_level");
    }
  }
  double weight = 0.0;
  for (const auto& j : junctions) {
    if (j.demand_weight < 0.0) v.push_back("junction " + j.name + ": negative demand weight");
    weight += j.demand_weight;
  }
  if (std::abs(weight - 1.0) > 1e-9) {
    v.push_back("junction demand weights must sum to 1 (got " + std::to_string(weight) + ")");
  }
  for (const auto& p : pipes) {
    if (!(p.resistance > 0.0)) v.push_back("pipe " + p.name + ": resistance must be > 0");
    if (!names.count(p.from)) v.push_back("pipe " + p.name + ": unknown node '" + p.from + "'");
    if (!names.count(p.to)) v.push_back("pipe " + p.name + ": unknown node '" + p.to + "'");
    if (p.from == p.to) v.push_back("pipe " + p.name + ": both ends on one node");
  }
  std::map<std::string, bool> is_junction;
  for (const auto& j : junctions) is_junction[j.name] = true;
  for (const auto& p : pumps) {
    if (!(p.max_flow > 0.0)) v.push_back("pump " + p.name + ": max_flow must be > 0");
    if (!is_junction.count(p.node)) {
      v.push_back("pump " + p.name + ": node '" + p.node + "' is not a junction");
    }
  }
  if (!(efficiency > 0.0 && efficiency <= 1.0)) v.push_back("efficiency must lie in (0, 1]");
  if (!(headloss_exponent > 0.0)) v.push_back("headloss_exponent must be > 0");
  if (!(rho_g > 0.0)) v.push_back("rho_g must be > 0");

  // Every junction must reach a tank, or its head is undetermined.
  if (v.empty()) {
    std::map<std::string, std::vector<std::string>> adj;
    for (const auto& p : pipes) {
      adj[p.from].push_back(p.to);
      adj[p.to].push_back(p.from);
    }
    std::map<std::string, bool> seen;
    std::deque<std::string> queue;
    for (const auto& t : tanks) {
      seen[t.name] = true;
      queue.push_back(t.name);
    }
    while (!queue.empty()) {
      const auto n = queue.front();
      queue.pop_front();
      for (const auto& m : adj[n]) {
        if (!seen[m]) {
          seen[m] = true;
          queue.push_back(m);
        }
      }
    }
    for (const auto& j : junctions) {
      if (!seen[j.name]) v.push_back("junction " + j.name + " is not connected to any tank");
    }
  }
  if (!v.empty()) {
    std::string msg = "invalid network:";
    for (const auto& s : v) msg += "\n  - " + s;
    throw ParameterError(msg);
  }
}

Eigen::VectorXd ToyNetworkSpec::states_from_levels(const Eigen::VectorXd& levels) const {
  Eigen::VectorXd vol = Eigen::VectorXd::Zero(num_states());
  Eigen::VectorXd area = Eigen::VectorXd::Zero(num_states());
  for (std::size_t j = 0; j < tanks.size(); ++j) {
    vol[tanks[j].state] += tanks[j].area * levels[static_cast<Eigen::Index>(j)];
    area[tanks[j].state] += tanks[j].area;
  }
  return vol.cwiseQuotient(area);
}

Eigen::VectorXd ToyNetworkSpec::levels_from_states(const Eigen::VectorXd& s) const {
  Eigen::VectorXd levels(static_cast<Eigen::Index>(tanks.size()));
  for (std::size_t j = 0; j < tanks.size(); ++j) {
    levels[static_cast<Eigen::Index>(j)] = s[tanks[j].state];
  }
  return levels;
}

Eigen::VectorXd ToyNetworkSpec::initial_levels() const {
  Eigen::VectorXd levels(static_cast<Eigen::Index>(tanks.size()));
  for (std::size_t j = 0; j < tanks.size(); ++j) {
    levels[static_cast<Eigen::Index>(j)] = tanks[j].init_level;
  }
  return levels;
}

Eigen::VectorXd ToyNetworkSpec::max_flows() const {
  Eigen::VectorXd u(num_pumps());
  for (int i = 0; i < num_pumps(); ++i) u[i] = pumps[i].max_flow;
  return u;
}

ToyNetworkSpec parse_network_spec(const std::string& text, const std::string& origin) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw InputError(origin + ":" + std::to_string(e.line()) + ": " + e.message());
  }

  ToyNetworkSpec spec;
  std::vector<std::string> v;
  auto number = [&](const pt::ptree& sec, const std::string& section, const std::string& key,
                    double fallback, bool required) {
    const auto node = sec.get_optional<std::string>(key);
    if (!node) {
      if (required) v.push_back(origin + ": [" + section + "] missing key '" + key + "'");
      return fallback;
    }
    try {
      std::size_t used = 0;
      const double x = std::stod(*node, &used);
      if (used != node->size()) throw std::invalid_argument(*node);
      return x;
    } catch (const std::exception&) {
      v.push_back(origin + ": [" + section + "] " + key + " = '" + *node + "' is not a number");
      return fallback;
    }
  };
  auto text_key = [&](const pt::ptree& sec, const std::string& section, const std::string& key) {
    const auto node = sec.get_optional<std::string>(key);
    if (!node) {
      v.push_back(origin + ": [" + section + "] missing key '" + key + "'");
      return std::string();
    }
    return *node;
  };

  std::map<int, StateBounds> states;
  for (const auto& [section, sec] : tree) {
    const auto space = section.find(' ');
    const std::string kind = section.substr(0, space);
    const std::string name = space == std::string::npos ? "" : section.substr(space + 1);
    if (kind == "network") {
      spec.rho_g = number(sec, section, "rho_g", spec.rho_g, false);
      spec.efficiency = number(sec, section, "efficiency", spec.efficiency, false);
      spec.headloss_exponent =
          number(sec, section, "headloss_exponent", spec.headloss_exponent, false);
    } else if (name.empty()) {
      v.push_back(origin + ": section [" + section + "] needs a name");
    } else if (kind == "tank") {
      TankSpec t;
      t.name = name;
      t.area = number(sec, section, "area", 0.0, true);
      t.elevation = number(sec, section, "elevation", 0.0, false);
      t.init_level = number(sec, section, "init_level", 0.0, true);
      t.state = static_cast<int>(number(sec, section, "state", 0.0, true));
      spec.tanks.push_back(t);
    } else if (kind == "junction") {
      JunctionSpec j;
      j.name = name;
      j.elevation = number(sec, section, "elevation", 0.0, false);
      j.demand_weight = number(sec, section, "demand_weight", 0.0, false);
      spec.junctions.push_back(j);
    } else if (kind == "pipe") {
      PipeSpec p;
      p.name = name;
      p.from = text_key(sec, section, "from");
      p.to = text_key(sec, section, "to");
      p.resistance = number(sec, section, "resistance", 0.0, true);
      spec.pipes.push_back(p);
    } else if (kind == "pump") {
      PumpSpec p;
      p.name = name;
      p.node = text_key(sec, section, "node");
      p.inlet_pressure = number(sec, section, "inlet_pressure", 0.0, true);
      p.max_flow = number(sec, section, "max_flow", 0.0, true);
      spec.pumps.push_back(p);
    } else if (kind == "state") {
      int index = -1;
      try {
        index = std::stoi(name);
      } catch (const std::exception&) {
      }
      if (index < 0) {
        v.push_back(origin + ": [" + section + "] state index must be a non-negative integer");
        continue;
      }
      StateBounds b;
      b.min_level = number(sec, section, "min_level", 0.0, true);
      b.max_level = number(sec, section, "max_level", 0.0, true);
      states[index] = b;
    } else {
      v.push_back(origin + ": unknown section kind '" + kind + "'");
    }
  }
  for (int i = 0; i < static_cast<int>(states.size()); ++i) {
    if (!states.count(i)) {
      v.push_back(origin + ": state indices must be contiguous from 0");
      break;
    }
    spec.states.push_back(states[i]);
  }
  if (!v.empty()) throw ConfigError(v);
  spec.validate();
  return spec;
}

ToyNetworkSpec load_network_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open network spec '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_network_spec(ss.str(), path);
}

std::string format_network_spec(const ToyNetworkSpec& s) {
  std::ostringstream os;
  os.precision(17);
  os << "[network]\nrho_g = " << s.rho_g << "\nefficiency = " << s.efficiency
     << "\nheadloss_exponent = " << s.headloss_exponent << "\n";
  for (std::size_t i = 0; i < s.states.size(); ++i) {
    os << "\n[state " << i << "]\nmin_level = " << s.states[i].min_level
       << "\nmax_level = " << s.states[i].max_level << "\n";
  }
  for (const auto& t : s.tanks) {
    os << "\n[tank " << t.name << "]\narea = " << t.area << "\nelevation = " << t.elevation
       << "\ninit_level = " << t.init_level << "\nstate = " << t.state << "\n";
  }
  for (const auto& j : s.junctions) {
    os << "\n[junction " << j.name << "]\nelevation = " << j.elevation
       << "\ndemand_weight = " << j.demand_weight << "\n";
  }
  for (const auto& p : s.pipes) {
    os << "\n[pipe " << p.name << "]\nfrom = " << p.from << "\nto = " << p.to
       << "\nresistance = " << p.resistance << "\n";
  }
  for (const auto& p : s.pumps) {
    os << "\n[pump " << p.name << "]\nnode = " << p.node
       << "\ninlet_pressure = " << p.inlet_pressure << "\nmax_flow = " << p.max_flow << "\n";
  }
  return os.str();
}

ToyNetworkSpec default_toy_network() {
  ToyNetworkSpec s;
  s.states = {{1.5, 3.0}, {1.4, 2.8}};
  s.tanks = {{"T1", 600.0, 30.0, 2.25, 0}, {"T2", 400.0, 30.0, 2.25, 0},
             {"T3", 800.0, 30.0, 2.1, 1}};
  s.junctions = {{"J1", 0.0, 0.0}, {"J2", 0.0, 0.0}, {"J3", 0.0, 0.6}, {"J4", 0.0, 0.4}};
  s.pipes = {{"P1", "J1", "T1", 30.0},  {"P2", "T1", "T2", 0.5},   {"P3", "J1", "J3", 200.0},
             {"P4", "J2", "T3", 40.0},  {"P5", "J2", "J4", 200.0}, {"P6", "J3", "J4", 400.0},
             {"P7", "T2", "J3", 300.0}};
  s.pumps = {{"PU1", "J1", 9810.0 * 5.0, 0.1}, {"PU2", "J2", 9810.0 * 5.0, 0.1}};
  return s;
}

HydraulicState solve_hydraulics(const ToyNetworkSpec& spec, const Eigen::VectorXd& levels,
                                const Eigen::VectorXd& u, double demand,
                                const Eigen::VectorXd* warm_flows) {
  const auto topo = topology(spec);
  const auto np = topo.a12.rows();
  const auto nj = topo.a12.cols();
  const double e = spec.headloss_exponent;

  Eigen::VectorXd h0(static_cast<Eigen::Index>(spec.tanks.size()));
  for (Eigen::Index t = 0; t < h0.size(); ++t) h0[t] = spec.tanks[t].elevation + levels[t];
  // Net required inflow at each junction: demand minus pump injection.
  Eigen::VectorXd c(nj);
  for (Eigen::Index j = 0; j < nj; ++j) c[j] = spec.junctions[j].demand_weight * demand;
  for (std::size_t i = 0; i < spec.pumps.size(); ++i) {
    c[topo.pump_junction[i]] -= u[static_cast<Eigen::Index>(i)];
  }
  Eigen::VectorXd k(np);
  for (Eigen::Index p = 0; p < np; ++p) k[p] = spec.pipes[p].resistance;

  Eigen::VectorXd q = (warm_flows && warm_flows->size() == np)
                          ? *warm_flows
                          : Eigen::VectorXd::Constant(np, 0.01);
  Eigen::VectorXd head = Eigen::VectorXd::Zero(nj);
  const Eigen::VectorXd fixed = topo.a10 * h0;

  HydraulicState out;
  constexpr int kMaxIter = 100;
  constexpr double kFloor = 1e-7;
  bool converged = false;
  for (int it = 1; it <= kMaxIter; ++it) {
    Eigen::VectorXd loss(np), grad(np);
    for (Eigen::Index p = 0; p < np; ++p) {
      const double a = std::pow(std::abs(q[p]), e - 1.0);
      loss[p] = k[p] * q[p] * a;
      grad[p] = std::max(e * k[p] * a, e * k[p] * std::pow(kFloor, e - 1.0));
    }
    const Eigen::VectorXd f1 = loss + topo.a12 * head + fixed;
    const Eigen::VectorXd f2 = topo.a12.transpose() * q - c;
    if (it > 1 && f1.lpNorm<Eigen::Infinity>() < 1e-10 && f2.lpNorm<Eigen::Infinity>() < 1e-13) {
      converged = true;
      break;
    }
    const Eigen::VectorXd ginv = grad.cwiseInverse();
    Eigen::VectorXd dh(nj);
    if (nj > 0) {
      const Eigen::MatrixXd schur = topo.a12.transpose() * ginv.asDiagonal() * topo.a12;
      const Eigen::VectorXd rhs = f2 - topo.a12.transpose() * ginv.cwiseProduct(f1);
      dh = schur.ldlt().solve(rhs);
    }
    const Eigen::VectorXd dq = -ginv.cwiseProduct(f1 + topo.a12 * dh);
    q += dq;
    head += dh;
    out.iterations = it;
    if (!q.allFinite() || !head.allFinite()) break;
  }
  if (!converged) {
    throw SimulationError("hydraulic solver did not converge in " + std::to_string(kMaxIter) +
                          " iterations");
  }
  out.pipe_flow = q;
  out.junction_head = head;
  out.tank_inflow = topo.a10.transpose() * q;
  out.outlet_pressure.resize(spec.num_pumps());
  for (int i = 0; i < spec.num_pumps(); ++i) {
    const int j = topo.pump_junction[i];
    out.outlet_pressure[i] = spec.rho_g * (head[j] - spec.junctions[j].elevation);
  }
  return out;
}

Eigen::VectorXd truth_step(const ToyNetworkSpec& spec, const Eigen::VectorXd& levels,
                           const Eigen::VectorXd& u, double demand, double dt) {
  if (!(dt > 0.0 && dt <= 60.0)) throw ParameterError("truth_step needs 0 < dt <= 60 s");
  const auto hyd = solve_hydraulics(spec, levels, u, demand);
  Eigen::VectorXd next = levels;
  for (Eigen::Index j = 0; j < next.size(); ++j) {
    next[j] += dt * hyd.tank_inflow[j] / spec.tanks[j].area;
  }
  return next;
}

const std::vector<double>& default_demand_shape() {
  // Morning and evening peaks, night minimum; mean exactly 1.
  static const std::vector<double> shape = [] {
    std::vector<double> s = {0.55, 0.5,  0.48, 0.48, 0.52, 0.7,  1.05, 1.45,
                             1.5,  1.35, 1.2,  1.15, 1.15, 1.1,  1.05, 1.05,
                             1.1,  1.25, 1.4,  1.35, 1.2,  1.0,  0.8,  0.62};
    double mean = 0.0;
    for (double v : s) mean += v;
    mean /= static_cast<double>(s.size());
    for (double& v : s) v /= mean;
    return s;
  }();
  return shape;
}

namespace {

// State each pump mainly feeds: that of the tank fewest pipes away.
std::vector<int> pump_states(const ToyNetworkSpec& spec) {
  std::map<std::string, std::vector<std::string>> adj;
  for (const auto& p : spec.pipes) {
    adj[p.from].push_back(p.to);
    adj[p.to].push_back(p.from);
  }
  std::map<std::string, int> tank_state;
  for (const auto& t : spec.tanks) tank_state[t.name] = t.state;
  std::vector<int> out;
  for (const auto& pump : spec.pumps) {
    std::map<std::string, bool> seen{{pump.node, true}};
    std::deque<std::string> queue{pump.node};
    int state = 0;
    while (!queue.empty()) {
      const auto n = queue.front();
      queue.pop_front();
      if (tank_state.count(n)) {
        state = tank_state[n];
        break;
      }
      for (const auto& m : adj[n]) {
        if (!seen[m]) {
          seen[m] = true;
          queue.push_back(m);
        }
      }
    }
    out.push_back(state);
  }
  return out;
}

double r_squared(const Eigen::VectorXd& y, const Eigen::VectorXd& resid) {
  const double tss = (y.array() - y.mean()).square().sum();
  return tss > 0.0 ? 1.0 - resid.squaredNorm() / tss : 1.0;
}

}  // namespace

IdentificationReport identify_linear_model(const ToyNetworkSpec& spec,
                                           const ExcitationPlan& plan) {
  spec.validate();
  if (plan.days < 2 || plan.train_days < 1 || plan.train_days >= plan.days) {
    throw ParameterError("excitation plan needs 1 <= train_days < days");
  }
  if (!(plan.sim_dt > 0.0 && plan.sim_dt <= 60.0)) throw ParameterError("sim_dt must be in (0, 60]");
  const int substeps_per_record = static_cast<int>(std::lround(plan.record_dt / plan.sim_dt));
  const int records_per_hold = static_cast<int>(std::lround(plan.hold / plan.record_dt));
  const int holds_per_day = static_cast<int>(std::lround(86400.0 / plan.hold));
  if (substeps_per_record < 1 || records_per_hold < 1 || holds_per_day < 1 ||
      std::abs(substeps_per_record * plan.sim_dt - plan.record_dt) > 1e-9 ||
      std::abs(records_per_hold * plan.record_dt - plan.hold) > 1e-9) {
    throw ParameterError("excitation time steps must nest: sim_dt | record_dt | hold");
  }

  const int n = spec.num_states();
  const int m = spec.num_pumps();
  const auto umax = spec.max_flows();
  const auto feeds = pump_states(spec);
  const auto& shape = default_demand_shape();
  Rng rng(derive_seed(plan.seed, "wdn_network.excitation"));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  struct Record {
    Eigen::VectorXd s, u, ds, p;
    double d;
  };
  struct Interval {
    Eigen::VectorXd s0, s1, u;
    double d;
  };
  std::vector<Record> train;
  std::vector<Interval> held;
  Eigen::VectorXd area = Eigen::VectorXd::Zero(n);
  for (const auto& t : spec.tanks) area[t.state] += t.area;

  for (int day = 0; day < plan.days; ++day) {
    Eigen::VectorXd s0(n);
    for (int i = 0; i < n; ++i) {
      s0[i] = spec.states[i].min_level +
              unif(rng) * (spec.states[i].max_level - spec.states[i].min_level);
    }
    Eigen::VectorXd levels = spec.levels_from_states(s0);
    Eigen::VectorXd warm;
    for (int hold = 0; hold < holds_per_day; ++hold) {
      const Eigen::VectorXd s_start = spec.states_from_levels(levels);
      Eigen::VectorXd u(m);
      for (int i = 0; i < m; ++i) {
        u[i] = unif(rng) * umax[i];
        const auto& b = spec.states[feeds[i]];
        if (s_start[feeds[i]] < b.min_level - plan.level_margin) u[i] = umax[i];
        if (s_start[feeds[i]] > b.max_level + plan.level_margin) u[i] = 0.0;
      }
      const double hour = std::fmod(hold * plan.hold / 3600.0, 24.0);
      const double d = plan.demand_mean * shape[static_cast<std::size_t>(hour) % shape.size()] *
                       std::max(0.0, 1.0 + plan.demand_noise * normal(rng));
      for (int r = 0; r < records_per_hold; ++r) {
        for (int sub = 0; sub < substeps_per_record; ++sub) {
          const auto hyd = solve_hydraulics(spec, levels, u, d, warm.size() ? &warm : nullptr);
          warm = hyd.pipe_flow;
          if (sub == 0 && day < plan.train_days) {
            Record rec;
            rec.s = spec.states_from_levels(levels);
            rec.u = u;
            rec.d = d;
            rec.ds = Eigen::VectorXd::Zero(n);
            for (std::size_t j = 0; j < spec.tanks.size(); ++j) {
              rec.ds[spec.tanks[j].state] += hyd.tank_inflow[static_cast<Eigen::Index>(j)];
            }
            rec.ds = rec.ds.cwiseQuotient(area);
            rec.p = hyd.outlet_pressure;
            train.push_back(std::move(rec));
          }
          for (Eigen::Index j = 0; j < levels.size(); ++j) {
            levels[j] += plan.sim_dt * hyd.tank_inflow[j] / spec.tanks[j].area;
          }
        }
      }
      if (day >= plan.train_days) {
        held.push_back({s_start, spec.states_from_levels(levels), u, d});
      }
    }
  }

  const auto rows = static_cast<Eigen::Index>(train.size());
  const Eigen::Index cols = n + m + 2;
  Eigen::MatrixXd x(rows, cols);
  Eigen::MatrixXd y(rows, n);
  Eigen::MatrixXd xp(rows, n + m + 1);
  Eigen::MatrixXd yp(rows, m);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& rec = train[r];
    x.row(r) << rec.s.transpose(), rec.u.transpose(), rec.d, 1.0;
    xp.row(r) << rec.s.transpose(), rec.u.transpose(), 1.0;
    y.row(r) = rec.ds.transpose();
    yp.row(r) = rec.p.transpose();
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  qr.setThreshold(1e-10);
  if (qr.rank() < cols) {
    throw IdentificationError("state regressors are rank deficient (rank " +
                              std::to_string(qr.rank()) + " < " + std::to_string(cols) + ")");
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qrp(xp);
  qrp.setThreshold(1e-10);
  if (qrp.rank() < xp.cols()) {
    throw IdentificationError("pressure regressors are rank deficient");
  }
  const Eigen::MatrixXd theta = qr.solve(y);     // cols x n
  const Eigen::MatrixXd theta_p = qrp.solve(yp);  // (n+m+1) x m

  IdentificationReport rep;
  auto& lm = rep.model;
  lm.A = theta.topRows(n).transpose();
  lm.B1 = theta.middleRows(n, m).transpose();
  lm.B2 = theta.row(n + m).transpose();
  lm.drift = theta.row(n + m + 1).transpose();
  lm.C = theta_p.topRows(n).transpose();
  lm.D = theta_p.middleRows(n, m).transpose();
  lm.p0 = theta_p.row(n + m).transpose();
  lm.p_in.resize(m);
  for (int i = 0; i < m; ++i) lm.p_in[i] = spec.pumps[i].inlet_pressure;
  lm.efficiency = spec.efficiency;
  lm.u_max = umax;
  lm.h_min.resize(n);
  lm.h_max.resize(n);
  for (int i = 0; i < n; ++i) {
    lm.h_min[i] = spec.states[i].min_level;
    lm.h_max[i] = spec.states[i].max_level;
  }

  const Eigen::MatrixXd resid = y - x * theta;
  const Eigen::MatrixXd resid_p = yp - xp * theta_p;
  for (int i = 0; i < n; ++i) {
    rep.r2_state.push_back(r_squared(y.col(i), resid.col(i)));
    rep.residual_mean.push_back(resid.col(i).mean());
  }
  for (int i = 0; i < m; ++i) rep.r2_pressure.push_back(r_squared(yp.col(i), resid_p.col(i)));
  rep.samples = train.size();

  const auto disc = discretize(lm, plan.hold);
  rep.one_step_error.assign(n, 0.0);
  for (const auto& iv : held) {
    const Eigen::VectorXd err = iv.s1 - linear_step(disc, iv.s0, iv.u, iv.d);
    for (int i = 0; i < n; ++i) {
      rep.one_step_error[i] = std::max(rep.one_step_error[i], std::abs(err[i]));
    }
  }
  for (double e : rep.one_step_error) {
    rep.w_box.push_back(std::max(0.1, std::ceil(e * 10.0 - 1e-9) / 10.0));
  }
  lm = disc;
  return rep;
}

Eigen::MatrixXd matrix_exponential(const Eigen::MatrixXd& mat, double tol) {
  const auto dim = mat.rows();
  const double norm = mat.cwiseAbs().rowwise().sum().maxCoeff();
  int squarings = 0;
  if (norm > 0.5) squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
  const Eigen::MatrixXd scaled = mat / std::ldexp(1.0, squarings);
  Eigen::MatrixXd sum = Eigen::MatrixXd::Identity(dim, dim);
  Eigen::MatrixXd term = Eigen::MatrixXd::Identity(dim, dim);
  for (int k = 1; k < 60; ++k) {
    term = term * scaled / static_cast<double>(k);
    sum += term;
    if (term.cwiseAbs().maxCoeff() <= tol * 1e-4) break;
  }
  for (int i = 0; i < squarings; ++i) sum = sum * sum;
  return sum;
}

LinearWdnModel discretize(LinearWdnModel model, double dt) {
  if (!(dt > 0.0)) throw ParameterError("discretize needs dt > 0");
  const int n = model.n();
  const int m = model.m();
  const int dim = n + m + 2;
  Eigen::MatrixXd aug = Eigen::MatrixXd::Zero(dim, dim);
  aug.topLeftCorner(n, n) = model.A;
  aug.block(0, n, n, m) = model.B1;
  aug.col(n + m).head(n) = model.B2;
  aug.col(n + m + 1).head(n) = model.drift;
  const Eigen::MatrixXd e = matrix_exponential(aug * dt);
  model.dt = dt;
  model.Ad = e.topLeftCorner(n, n);
  model.Bd1 = e.block(0, n, n, m);
  model.Bd2 = e.col(n + m).head(n);
  model.fd = e.col(n + m + 1).head(n);
  return model;
}

Eigen::VectorXd linear_step(const LinearWdnModel& model, const Eigen::VectorXd& h,
                            const Eigen::VectorXd& u, double demand) {
  if (model.dt <= 0.0) throw ModelError("linear_step needs a discretized model");
  return model.Ad * h + model.Bd1 * u + model.Bd2 * demand + model.fd;
}

Eigen::VectorXd pump_power(const LinearWdnModel& model, const Eigen::VectorXd& h,
                           const Eigen::VectorXd& u) {
  const Eigen::VectorXd p_out = model.C * h + model.D * u + model.p0;
  Eigen::VectorXd kw(u.size());
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    kw[i] = std::max(0.0, u[i] * (p_out[i] - model.p_in[i]) / model.efficiency / 1000.0);
  }
  return kw;
}

double grid_power(double pump_kw, double pv_kw) { return std::max(0.0, pump_kw - pv_kw); }

}  // namespace pvsizing
