#pragma once

#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "flsim/agents.hpp"
#include "flsim/convergence.hpp"
#include "flsim/errors.hpp"
#include "flsim/wireless.hpp"

namespace flsim::harness {

using nlohmann::json;

struct SweepAxis {
  std::string name = "none";  // none | tau | L | varrho | U | p_max
  std::vector<double> values;
};

struct ExperimentSpec {
  int schema_version = 1;
  std::string name;
  std::string output_dir = "out";
  std::vector<std::uint64_t> seeds;
  SweepAxis sweep;
  wireless::NetworkConfig net;
  std::pair<double, double> cycles_per_sample_range{1e4, 3e4};
  std::pair<double, double> samples_per_user_range{400, 600};
  convergence::LearningParams learn;
  convergence::GapParams gap;
  rl::AgentConfig agent;
  std::vector<rl::AgentKind> agents{rl::AgentKind::a2c_ei};
  std::string config_hash;  // hex of the canonical serialized form

  rl::TrainInputs train_inputs() const {
    return {net, learn, gap, agent, cycles_per_sample_range, samples_per_user_range};
  }

  // Substitutes one sweep-axis value into a copy of this experiment spec.
  ExperimentSpec with_axis_value(double value) const {
    ExperimentSpec s = *this;
    if (sweep.name == "tau") s.net.tau_s = value;
    else if (sweep.name == "L") s.learn.smoothness_l = value;
    else if (sweep.name == "varrho") s.learn.global_accuracy = value;
    else if (sweep.name == "U") s.net.num_users = static_cast<int>(value);
    else if (sweep.name == "p_max") s.net.p_max_w = value;
    else throw ValidationError("unknown sweep axis: " + sweep.name);
    return s;
  }
};

namespace detail {

inline void reject_unknown_keys(const json& obj, const std::set<std::string>& known,
                                const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (known.find(key) == known.end())
      throw ValidationError("config: unknown key '" + key + "' in " + where);
  }
}

template <typename T>
T get_or(const json& obj, const std::string& key, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ValidationError("config: bad value for '" + key + "': " + e.what());
  }
}

inline std::pair<double, double> get_range(const json& obj, const std::string& key,
                                           std::pair<double, double> fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_array() || v.size() != 2)
    throw ValidationError("config: '" + key + "' must be a [lo, hi] pair");
  const std::pair<double, double> range{v[0].get<double>(), v[1].get<double>()};
  if (!(range.first <= range.second))
    throw ValidationError("config: '" + key + "' must satisfy lo <= hi");
  return range;
}

inline double dbm_per_hz_to_w_per_hz(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

}  // namespace detail

inline ExperimentSpec parse_config(const json& root) {
  ExperimentSpec spec;
  detail::reject_unknown_keys(root,
                              {"schema_version", "name", "output_dir", "seeds", "sweep", "network",
                               "population", "learning", "gap", "agent"},
                              "top level");
  spec.schema_version = detail::get_or(root, "schema_version", 1);
  if (spec.schema_version != 1)
    throw ValidationError("config: unsupported schema_version " +
                          std::to_string(spec.schema_version));
  spec.name = detail::get_or<std::string>(root, "name", "experiment");
  spec.output_dir = detail::get_or<std::string>(root, "output_dir", "out/" + spec.name);
  spec.seeds = detail::get_or<std::vector<std::uint64_t>>(root, "seeds", {1});
  if (spec.seeds.empty()) throw ValidationError("config: need at least one seed");

  if (root.contains("sweep")) {
    const auto& sw = root.at("sweep");
    detail::reject_unknown_keys(sw, {"axis", "values"}, "sweep");
    spec.sweep.name = detail::get_or<std::string>(sw, "axis", "none");
    spec.sweep.values = detail::get_or<std::vector<double>>(sw, "values", {});
    const std::set<std::string> axes = {"none", "tau", "L", "varrho", "U", "p_max"};
    if (axes.find(spec.sweep.name) == axes.end())
      throw ValidationError("config: sweep axis must be one of none|tau|L|varrho|U|p_max");
    if (spec.sweep.name != "none" && spec.sweep.values.empty())
      throw ValidationError("config: sweep values must not be empty");
  }

  if (root.contains("network")) {
    const auto& net = root.at("network");
    detail::reject_unknown_keys(
        net,
        {"num_users", "bandwidth_hz", "noise_dbm_per_hz", "cell_radius_km", "min_distance_km",
         "shadow_sigma_db", "pathloss_a_db", "pathloss_b_db", "model_size_bits", "t_max_round_s",
         "f_max_hz", "p_max_w", "k_min", "k_max", "kappa", "sample_energy_j", "tau_s"},
        "network");
    auto& n = spec.net;
    n.num_users = detail::get_or(net, "num_users", n.num_users);
    n.bandwidth_hz = detail::get_or(net, "bandwidth_hz", n.bandwidth_hz);
    if (net.contains("noise_dbm_per_hz"))
      n.noise_psd_w_per_hz = detail::dbm_per_hz_to_w_per_hz(net.at("noise_dbm_per_hz").get<double>());
    n.cell_radius_km = detail::get_or(net, "cell_radius_km", n.cell_radius_km);
    n.min_distance_km = detail::get_or(net, "min_distance_km", n.min_distance_km);
    n.shadow_sigma_db = detail::get_or(net, "shadow_sigma_db", n.shadow_sigma_db);
    n.pathloss_a_db = detail::get_or(net, "pathloss_a_db", n.pathloss_a_db);
    n.pathloss_b_db = detail::get_or(net, "pathloss_b_db", n.pathloss_b_db);
    n.model_bits = detail::get_or(net, "model_size_bits", n.model_bits);
    n.t_max_round_s = detail::get_or(net, "t_max_round_s", n.t_max_round_s);
    n.f_max_hz = detail::get_or(net, "f_max_hz", n.f_max_hz);
    n.p_max_w = detail::get_or(net, "p_max_w", n.p_max_w);
    n.k_min = detail::get_or(net, "k_min", n.k_min);
    n.k_max = detail::get_or(net, "k_max", n.k_max);
    n.kappa = detail::get_or(net, "kappa", n.kappa);
    n.sample_energy_j = detail::get_or(net, "sample_energy_j", n.sample_energy_j);
    n.tau_s = detail::get_or(net, "tau_s", n.tau_s);
  }

  if (root.contains("population")) {
    const auto& pop = root.at("population");
    detail::reject_unknown_keys(pop, {"cycles_per_sample", "samples_per_user"}, "population");
    spec.cycles_per_sample_range =
        detail::get_range(pop, "cycles_per_sample", spec.cycles_per_sample_range);
    spec.samples_per_user_range =
        detail::get_range(pop, "samples_per_user", spec.samples_per_user_range);
    if (!(spec.cycles_per_sample_range.first > 0))
      throw ValidationError("config: cycles_per_sample must be positive");
    if (!(spec.samples_per_user_range.first >= 1))
      throw ValidationError("config: samples_per_user must be >= 1");
  }

  if (root.contains("learning")) {
    const auto& lp = root.at("learning");
    detail::reject_unknown_keys(lp,
                                {"smoothness", "strong_convexity", "aggregation_xi",
                                 "step_size_delta", "local_accuracy", "global_accuracy"},
                                "learning");
    auto& l = spec.learn;
    l.smoothness_l = detail::get_or(lp, "smoothness", l.smoothness_l);
    l.strong_convexity_mu = detail::get_or(lp, "strong_convexity", l.strong_convexity_mu);
    l.aggregation_xi = detail::get_or(lp, "aggregation_xi", l.aggregation_xi);
    l.step_size_delta = detail::get_or(lp, "step_size_delta", l.step_size_delta);
    l.local_accuracy = detail::get_or(lp, "local_accuracy", l.local_accuracy);
    l.global_accuracy = detail::get_or(lp, "global_accuracy", l.global_accuracy);
  }

  if (root.contains("gap")) {
    const auto& gp = root.at("gap");
    detail::reject_unknown_keys(
        gp, {"c0", "c1", "sigma2", "entropy_hz_bits", "entropy_pz_nats", "samples_per_user"},
        "gap");
    auto& g = spec.gap;
    g.c0 = detail::get_or(gp, "c0", g.c0);
    g.c1 = detail::get_or(gp, "c1", g.c1);
    g.sigma2 = detail::get_or(gp, "sigma2", g.sigma2);
    g.entropy_hz_bits = detail::get_or(gp, "entropy_hz_bits", g.entropy_hz_bits);
    // Default couples H_pz to c0 so the gap statement vanishes at k = 0.
    g.entropy_pz_nats = detail::get_or(gp, "entropy_pz_nats", g.c0);
    if (gp.contains("samples_per_user")) {
      const auto& m = gp.at("samples_per_user");
      if (m.is_array()) {
        g.samples_per_user = m.get<std::vector<double>>();
      } else {
        g.samples_per_user.assign(static_cast<std::size_t>(spec.net.num_users), m.get<double>());
      }
    }
  } else {
    spec.gap.entropy_pz_nats = spec.gap.c0;
  }
  if (spec.gap.samples_per_user.empty())
    spec.gap.samples_per_user.assign(static_cast<std::size_t>(spec.net.num_users), 500.0);

  if (root.contains("agent")) {
    const auto& ag = root.at("agent");
    detail::reject_unknown_keys(
        ag, {"discount",       "temperature",     "polyak",           "lr_actor",
             "lr_critic",      "batch_size",      "buffer_capacity",  "lambda_time",
             "lambda_data",    "lambda_bandwidth", "episode_length",  "total_steps",
             "warmup_steps",   "updates_per_step", "hidden",          "activation",
             "optimizer",      "reward_scale",    "exploration_noise", "log_std_min",
             "log_std_max",    "action_mode",     "fixed_k",          "reward_includes_sampling",
             "normalize_obs",  "kinds"},
        "agent");
    auto& a = spec.agent;
    a.discount = detail::get_or(ag, "discount", a.discount);
    a.temperature = detail::get_or(ag, "temperature", a.temperature);
    a.polyak = detail::get_or(ag, "polyak", a.polyak);
    a.lr_actor = detail::get_or(ag, "lr_actor", a.lr_actor);
    a.lr_critic = detail::get_or(ag, "lr_critic", a.lr_critic);
    a.batch_size = detail::get_or(ag, "batch_size", a.batch_size);
    a.buffer_capacity = detail::get_or(ag, "buffer_capacity", a.buffer_capacity);
    a.lambda_time = detail::get_or(ag, "lambda_time", a.lambda_time);
    a.lambda_data = detail::get_or(ag, "lambda_data", a.lambda_data);
    a.lambda_bandwidth = detail::get_or(ag, "lambda_bandwidth", a.lambda_bandwidth);
    a.episode_length = detail::get_or(ag, "episode_length", a.episode_length);
    a.total_steps = detail::get_or(ag, "total_steps", a.total_steps);
    a.warmup_steps = detail::get_or(ag, "warmup_steps", a.warmup_steps);
    a.updates_per_step = detail::get_or(ag, "updates_per_step", a.updates_per_step);
    a.hidden = detail::get_or(ag, "hidden", a.hidden);
    a.activation = detail::get_or(ag, "activation", a.activation);
    a.optimizer = detail::get_or(ag, "optimizer", a.optimizer);
    a.reward_scale = detail::get_or(ag, "reward_scale", a.reward_scale);
    a.exploration_noise = detail::get_or(ag, "exploration_noise", a.exploration_noise);
    a.log_std_min = detail::get_or(ag, "log_std_min", a.log_std_min);
    a.log_std_max = detail::get_or(ag, "log_std_max", a.log_std_max);
    a.action_mode = detail::get_or(ag, "action_mode", a.action_mode);
    a.fixed_k = detail::get_or(ag, "fixed_k", a.fixed_k);
    a.reward_includes_sampling =
        detail::get_or(ag, "reward_includes_sampling", a.reward_includes_sampling);
    a.normalize_obs = detail::get_or(ag, "normalize_obs", a.normalize_obs);
    if (ag.contains("kinds")) {
      spec.agents.clear();
      for (const auto& k : ag.at("kinds"))
        spec.agents.push_back(rl::parse_agent_kind(k.get<std::string>()));
      if (spec.agents.empty()) throw ValidationError("config: agent.kinds must not be empty");
    }
  }
  return spec;
}

// Checks every module-level invariant plus contractive-regime feasibility of
// the analytic bound at the configured parameters (and at every sweep cell
// that shifts them).
inline void validate_spec(const ExperimentSpec& spec) {
  spec.net.validate();
  spec.learn.validate();
  spec.gap.validate();
  spec.agent.validate();
  if (spec.net.k_min > spec.net.k_max) throw ValidationError("config: k_min > k_max");
  if (spec.gap.samples_per_user.size() != static_cast<std::size_t>(spec.net.num_users) &&
      spec.gap.samples_per_user.size() != 1)
    throw ValidationError("config: gap.samples_per_user must be scalar or one entry per user");
  if (spec.agent.fixed_k < spec.net.k_min || spec.agent.fixed_k > spec.net.k_max)
    throw ValidationError("config: agent.fixed_k outside [k_min, k_max]");

  // Contractive-regime check on the base parameter set. The smallest k gives
  // the smallest gap statement, hence the tightest denominator; if the bound
  // is contractive there it is contractive for every admissible k. Sweep
  // cells are checked by their operations: analytic sweeps record divergent
  // cells as sentinel rows, training sweeps propagate the error.
  convergence::global_iterations(spec.learn, spec.gap, static_cast<double>(spec.net.k_min),
                                 spec.net.tau_s, spec.net.num_users);
  for (double v : spec.sweep.values) {
    ExperimentSpec cell = spec.with_axis_value(v);
    cell.net.validate();
    cell.learn.validate();
  }
}

inline std::string hash_hex(const json& canonical) {
  const std::string dump = canonical.dump();
  const std::uint64_t h = fnv1a64(dump);
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

inline ExperimentSpec load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("config: cannot open " + path);
  json root;
  try {
    root = json::parse(is);
  } catch (const json::exception& e) {
    throw ValidationError("config: parse error in " + path + ": " + e.what());
  }
  ExperimentSpec spec = parse_config(root);
  validate_spec(spec);
  spec.config_hash = hash_hex(root);
  return spec;
}

}  // namespace flsim::harness
