#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <vector>

#include "flsim/constraints.hpp"
#include "flsim/convergence.hpp"
#include "flsim/rng.hpp"
#include "flsim/wireless.hpp"

namespace flsim::rl {

using Observation = Eigen::VectorXd;

enum class ActionMapping { ecs, clip };

struct EnvOptions {
  bool sampling_control = false;
  ActionMapping mapping = ActionMapping::ecs;
  int default_k = 0;              // k when the action does not carry it
  double default_varpi = 0.1;     // varpi when the action does not carry it
  constraints::RewardOptions reward;
  int episode_length = 200;       // fixed horizon; also caps budget-driven episodes
  bool normalize_obs = true;
};

// State/step/reset adapter over the wireless model. The observation is the
// current per-user channel gain vector; gains are redrawn every step
// (heterogeneous network), user positions and compute characteristics are
// redrawn on reset.
class Environment {
 public:
  Environment(wireless::NetworkConfig net, convergence::LearningParams learn,
              convergence::GapParams gap, EnvOptions opt,
              std::pair<double, double> cycles_per_sample_range,
              std::pair<double, double> samples_per_user_range, const RngStream& master)
      : net_(std::move(net)),
        learn_(learn),
        gap_(std::move(gap)),
        opt_(opt),
        channel_(master.child("channel")),
        layout_{net_.num_users, opt.sampling_control} {
    net_.validate();
    learn_.validate();
    users_.resize(net_.num_users);
    RngStream population = master.child("population");
    for (auto& u : users_) {
      u.cycles_per_sample =
          population.uniform(cycles_per_sample_range.first, cycles_per_sample_range.second);
      u.num_samples = std::floor(
          population.uniform(samples_per_user_range.first, samples_per_user_range.second + 1.0));
    }
  }

  int obs_dim() const { return net_.num_users; }
  int action_dim() const { return layout_.dim(); }
  const constraints::ActionLayout& layout() const { return layout_; }
  const wireless::NetworkConfig& network() const { return net_; }
  const std::vector<wireless::UserState>& users() const { return users_; }

  Observation reset() {
    for (auto& u : users_) {
      u.distance_km = wireless::draw_user_distance_km(net_, channel_);
      u.gain = wireless::draw_channel_gain(net_, u.distance_km, channel_);
    }
    steps_in_episode_ = 0;
    return observe();
  }

  struct StepResult {
    Observation next_obs;
    double reward = 0.0;
    bool done = false;
    constraints::RewardTerms terms;
    wireless::RoundTotals totals;
    constraints::FeasibleAction applied;
    double episode_budget = 0.0;  // step budget in effect for this episode
  };

  StepResult step(const constraints::RawAction& raw) {
    if (static_cast<int>(raw.size()) != layout_.dim())
      throw std::invalid_argument("env step: action dimension mismatch");
    StepResult res;
    res.applied = opt_.mapping == ActionMapping::ecs
                      ? constraints::squash_action(raw, net_, layout_, opt_.default_k,
                                                   opt_.default_varpi)
                      : constraints::clip_action(raw, net_, layout_, opt_.default_k,
                                                 opt_.default_varpi);
    auto outcome = constraints::step_reward(net_, learn_, users_, res.applied, opt_.reward);
    res.terms = outcome.terms;
    res.totals = std::move(outcome.totals);
    res.reward = res.terms.reward;

    res.episode_budget = episode_budget(res.applied);
    steps_in_episode_ += 1;
    res.done = static_cast<double>(steps_in_episode_) >= res.episode_budget;

    for (auto& u : users_) u.gain = wireless::draw_channel_gain(net_, u.distance_km, channel_);
    res.next_obs = observe();
    return res;
  }

 private:
  Observation observe() const {
    Observation obs(net_.num_users);
    for (int u = 0; u < net_.num_users; ++u) {
      const double g = users_[u].gain;
      obs(u) = opt_.normalize_obs ? (10.0 * std::log10(g) + 100.0) / 30.0 : g;
    }
    return obs;
  }

  // Fixed horizon in the base mode. Under sampling control the episode ends
  // when the round budget implied by the action's (k, varpi) is exhausted;
  // a divergent combination means the bound gives no guarantee, which we
  // treat as an unbounded budget, so the horizon cap binds.
  double episode_budget(const constraints::FeasibleAction& fa) const {
    if (!opt_.sampling_control) return static_cast<double>(opt_.episode_length);
    double mean_k = 0.0;
    for (int k : fa.k) mean_k += k;
    mean_k /= static_cast<double>(fa.k.size());
    convergence::LearningParams effective = learn_;
    effective.local_accuracy = fa.varpi;
    double budget;
    try {
      budget = static_cast<double>(
          convergence::global_iterations(effective, gap_, mean_k, net_.tau_s, net_.num_users));
    } catch (const DivergentRegimeError&) {
      budget = std::numeric_limits<double>::infinity();
    }
    return std::min(budget, static_cast<double>(opt_.episode_length));
  }

  wireless::NetworkConfig net_;
  convergence::LearningParams learn_;
  convergence::GapParams gap_;
  EnvOptions opt_;
  RngStream channel_;
  constraints::ActionLayout layout_;
  std::vector<wireless::UserState> users_;
  long steps_in_episode_ = 0;
};

}  // namespace flsim::rl
