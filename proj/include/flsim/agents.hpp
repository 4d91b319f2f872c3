#pragma once

#include <memory>
#include <string>
#include <vector>

#include "flsim/ddpg.hpp"
#include "flsim/env.hpp"
#include "flsim/errors.hpp"
#include "flsim/sac.hpp"

namespace flsim::rl {

enum class AgentKind { a2c_ei, sac_plain, ddpg, random_action };

inline AgentKind parse_agent_kind(const std::string& name) {
  if (name == "a2c_ei") return AgentKind::a2c_ei;
  if (name == "sac_plain") return AgentKind::sac_plain;
  if (name == "ddpg") return AgentKind::ddpg;
  if (name == "random") return AgentKind::random_action;
  throw ValidationError("unknown agent kind: " + name);
}

inline std::string agent_kind_name(AgentKind kind) {
  switch (kind) {
    case AgentKind::a2c_ei:
      return "a2c_ei";
    case AgentKind::sac_plain:
      return "sac_plain";
    case AgentKind::ddpg:
      return "ddpg";
    case AgentKind::random_action:
      return "random";
  }
  return "?";
}

struct AgentConfig {
  double discount = 0.95;
  double temperature = 0.2;
  double polyak = 0.995;
  double lr_actor = 3e-4;
  double lr_critic = 3e-4;
  int batch_size = 64;
  std::size_t buffer_capacity = 100000;
  double lambda_time = -1.0;
  double lambda_data = -1e-6;
  double lambda_bandwidth = -1e-6;
  int episode_length = 200;
  long total_steps = 20000;
  long warmup_steps = 1000;
  int updates_per_step = 1;
  std::vector<int> hidden = {64, 64};
  std::string activation = "softplus";
  std::string optimizer = "adam";
  double reward_scale = 1.0;
  double exploration_noise = 0.2;
  double log_std_min = -20.0;
  double log_std_max = 2.0;
  std::string action_mode = "sampling_control";  // or "paper_strict"
  int fixed_k = 0;                               // k outside sampling control
  bool reward_includes_sampling = false;
  bool normalize_obs = true;

  bool sampling_control() const { return action_mode == "sampling_control"; }

  void validate() const {
    if (discount < 0 || discount > 1) throw ValidationError("agent: discount must be in [0,1]");
    if (temperature < 0) throw ValidationError("agent: temperature must be >= 0");
    if (polyak < 0 || polyak >= 1) throw ValidationError("agent: polyak must be in [0,1)");
    if (!(lr_actor > 0) || !(lr_critic > 0)) throw ValidationError("agent: learn rates must be > 0");
    if (batch_size < 1) throw ValidationError("agent: batch_size must be >= 1");
    if (buffer_capacity < static_cast<std::size_t>(batch_size))
      throw ValidationError("agent: buffer_capacity must hold at least one batch");
    if (lambda_time > 0 || lambda_data > 0 || lambda_bandwidth > 0)
      throw ValidationError("agent: penalty coefficients must be <= 0");
    if (episode_length < 1) throw ValidationError("agent: episode_length must be >= 1");
    if (total_steps < 1) throw ValidationError("agent: total_steps must be >= 1");
    if (warmup_steps < batch_size)
      throw ValidationError("agent: warmup_steps must be >= batch_size");
    if (updates_per_step < 0) throw ValidationError("agent: updates_per_step must be >= 0");
    if (hidden.empty()) throw ValidationError("agent: hidden layer list must not be empty");
    if (action_mode != "sampling_control" && action_mode != "paper_strict")
      throw ValidationError("agent: action_mode must be sampling_control or paper_strict");
    if (optimizer != "adam" && optimizer != "sgd")
      throw ValidationError("agent: optimizer must be adam or sgd");
    nn::parse_activation(activation);
    if (log_std_min >= log_std_max) throw ValidationError("agent: log_std clamp inverted");
  }
};

// Per-episode learning-curve record emitted by train().
struct EpisodeRecord {
  int episode = 0;
  int steps = 0;
  double total_reward = 0.0;
  double sampling_j = 0.0;
  double compute_j = 0.0;
  double transmit_j = 0.0;
  double p1_s = 0.0;         // summed over the episode
  double p2_bits = 0.0;      // summed over the episode
  double completion_s = 0.0; // summed max-user round times
  double episode_budget = 0.0;
};

struct TrainInputs {
  wireless::NetworkConfig net;
  convergence::LearningParams learn;
  convergence::GapParams gap;
  AgentConfig agent;
  std::pair<double, double> cycles_per_sample_range{1e4, 3e4};
  std::pair<double, double> samples_per_user_range{400, 600};
};

namespace detail {

inline Eigen::VectorXd to_eigen(const constraints::RawAction& raw) {
  return Eigen::Map<const Eigen::VectorXd>(raw.data(), static_cast<Eigen::Index>(raw.size()));
}

inline constraints::RawAction to_raw(const Eigen::VectorXd& v) {
  return constraints::RawAction(v.data(), v.data() + v.size());
}

}  // namespace detail

// Runs one seeded training (or evaluation, for the random baseline) session
// and returns the per-episode records. Only completed episodes are recorded.
inline std::vector<EpisodeRecord> train(AgentKind kind, const TrainInputs& in,
                                        std::uint64_t master_seed) {
  in.agent.validate();
  const RngStream master(master_seed);

  EnvOptions eopt;
  eopt.sampling_control = in.agent.sampling_control();
  eopt.mapping = kind == AgentKind::sac_plain ? ActionMapping::clip : ActionMapping::ecs;
  eopt.default_k = in.agent.fixed_k;
  eopt.default_varpi = in.learn.local_accuracy;
  eopt.reward.lambda_time = in.agent.lambda_time;
  eopt.reward.lambda_data = in.agent.lambda_data;
  eopt.reward.lambda_bandwidth = in.agent.lambda_bandwidth;
  eopt.reward.include_sampling_energy = in.agent.reward_includes_sampling;
  eopt.reward.penalize_bandwidth_sum = kind == AgentKind::sac_plain;
  eopt.episode_length = in.agent.episode_length;
  eopt.normalize_obs = in.agent.normalize_obs;

  Environment env(in.net, in.learn, in.gap, eopt, in.cycles_per_sample_range,
                  in.samples_per_user_range, master);
  const auto& layout = env.layout();

  RngStream explore = master.child("explore");
  RngStream noise = master.child("noise");
  RngStream buffer_rng = master.child("buffer");

  const nn::Activation act_fn = nn::parse_activation(in.agent.activation);
  const bool use_adam = in.agent.optimizer == "adam";
  std::unique_ptr<SacAgent> sac;
  std::unique_ptr<DdpgAgent> ddpg;
  if (kind == AgentKind::a2c_ei || kind == AgentKind::sac_plain) {
    SacOptions sopt;
    sopt.discount = in.agent.discount;
    sopt.temperature = in.agent.temperature;
    sopt.polyak = in.agent.polyak;
    sopt.lr_actor = in.agent.lr_actor;
    sopt.lr_critic = in.agent.lr_critic;
    sopt.hidden = in.agent.hidden;
    sopt.activation = act_fn;
    sopt.log_std_clamp = {in.agent.log_std_min, in.agent.log_std_max};
    sopt.adam = use_adam;
    sopt.reward_scale = in.agent.reward_scale;
    sac = std::make_unique<SacAgent>(env.obs_dim(), env.action_dim(), sopt, master);
  } else if (kind == AgentKind::ddpg) {
    DdpgOptions dopt;
    dopt.discount = in.agent.discount;
    dopt.polyak = in.agent.polyak;
    dopt.lr_actor = in.agent.lr_actor;
    dopt.lr_critic = in.agent.lr_critic;
    dopt.hidden = in.agent.hidden;
    dopt.activation = act_fn;
    dopt.adam = use_adam;
    dopt.reward_scale = in.agent.reward_scale;
    dopt.exploration_noise = in.agent.exploration_noise;
    ddpg = std::make_unique<DdpgAgent>(env.obs_dim(), env.action_dim(), dopt, master);
  }

  ReplayBuffer buffer(in.agent.buffer_capacity);
  const bool learns = sac != nullptr || ddpg != nullptr;

  std::vector<EpisodeRecord> records;
  EpisodeRecord current;
  Observation obs = env.reset();
  for (long step = 0; step < in.agent.total_steps; ++step) {
    Eigen::VectorXd raw_vec;
    if (!learns || step < in.agent.warmup_steps) {
      const auto fa = constraints::sample_uniform_feasible(env.network(), layout, eopt.default_k,
                                                           eopt.default_varpi, explore);
      const auto raw = eopt.mapping == ActionMapping::ecs
                           ? constraints::unsquash_action(fa, env.network(), layout)
                           : constraints::unclip_action(fa, env.network(), layout);
      raw_vec = detail::to_eigen(raw);
    } else if (sac) {
      raw_vec = sac->act(obs, noise);
    } else {
      raw_vec = ddpg->act_explore(obs, noise);
    }

    auto res = env.step(detail::to_raw(raw_vec));
    buffer.push({obs, raw_vec, res.applied, res.reward, res.next_obs, res.done});

    current.steps += 1;
    current.total_reward += res.reward;
    current.sampling_j += res.totals.total.sampling_j;
    current.compute_j += res.totals.total.compute_j;
    current.transmit_j += res.totals.total.transmit_j;
    current.p1_s += res.terms.p1_s;
    current.p2_bits += res.terms.p2_bits;
    current.completion_s += res.totals.max_completion_s;
    current.episode_budget = res.episode_budget;

    if (learns && step + 1 >= in.agent.warmup_steps &&
        buffer.size() >= static_cast<std::size_t>(in.agent.batch_size)) {
      for (int j = 0; j < in.agent.updates_per_step; ++j) {
        const auto batch = buffer.sample(static_cast<std::size_t>(in.agent.batch_size), buffer_rng);
        if (sac) {
          sac->update(batch, noise);
        } else {
          ddpg->update(batch);
        }
      }
    }

    if (res.done) {
      current.episode = static_cast<int>(records.size());
      records.push_back(current);
      current = EpisodeRecord{};
      obs = env.reset();
    } else {
      obs = res.next_obs;
    }
  }
  return records;
}

}  // namespace flsim::rl
