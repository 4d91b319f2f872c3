#pragma once

#include <Eigen/Dense>

#include "flsim/checkpoint.hpp"
#include "flsim/mlp.hpp"
#include "flsim/policy.hpp"
#include "flsim/replay.hpp"
#include "flsim/rng.hpp"

namespace flsim::rl {

inline Eigen::MatrixXd hcat(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd out(a.rows(), a.cols() + b.cols());
  out << a, b;
  return out;
}

struct SacOptions {
  double discount = 0.95;
  double temperature = 0.2;  // entropy coefficient, fixed
  double polyak = 0.995;
  double lr_actor = 3e-4;
  double lr_critic = 3e-4;
  std::vector<int> hidden = {64, 64};
  nn::Activation activation = nn::Activation::softplus;
  nn::LogStdClamp log_std_clamp;
  bool adam = true;
  double reward_scale = 1.0;
};

// Soft Bellman target for one transition; the next action is sampled fresh
// from the current policy.
inline double sac_target(double reward, const Eigen::VectorXd& next_obs, bool done,
                         const nn::Mlp& q1_target, const nn::Mlp& q2_target,
                         const nn::Mlp& policy, const nn::LogStdClamp& clamp, double gamma,
                         double alpha, RngStream& rng) {
  if (done) return reward;
  const auto pol = nn::sample_policy_single(policy, next_obs, clamp, rng);
  const Eigen::VectorXd action = pol.pre_squash.array().tanh().matrix();
  Eigen::VectorXd input(next_obs.size() + action.size());
  input << next_obs, action;
  const double q1 = nn::forward_vec(q1_target, input)(0);
  const double q2 = nn::forward_vec(q2_target, input)(0);
  return reward + gamma * (std::min(q1, q2) - alpha * pol.log_prob);
}

// Soft actor-critic with twin critics, min-target and a fixed temperature.
// Actions live in pre-squash space; the critics consume tanh of it, and the
// environment applies its own explicit-constraint mapping on top.
class SacAgent {
 public:
  SacAgent(int obs_dim, int act_dim, SacOptions opt, const RngStream& master)
      : opt_(std::move(opt)), obs_dim_(obs_dim), act_dim_(act_dim) {
    std::vector<int> pol_dims = {obs_dim};
    std::vector<int> q_dims = {obs_dim + act_dim};
    for (int h : opt_.hidden) {
      pol_dims.push_back(h);
      q_dims.push_back(h);
    }
    pol_dims.push_back(2 * act_dim);
    q_dims.push_back(1);

    RngStream init_policy = master.child("init.policy");
    RngStream init_q1 = master.child("init.q1");
    RngStream init_q2 = master.child("init.q2");
    policy_ = nn::make_mlp(pol_dims, opt_.activation, nn::Activation::identity, init_policy);
    // Small head so initial actions sit mid-range with unit exploration std.
    policy_.weights.back() *= 0.01;
    q1_ = nn::make_mlp(q_dims, opt_.activation, nn::Activation::identity, init_q1);
    q2_ = nn::make_mlp(q_dims, opt_.activation, nn::Activation::identity, init_q2);
    q1_target_ = q1_;
    q2_target_ = q2_;
    policy_adam_ = nn::AdamState::zeros_like(policy_);
    q1_adam_ = nn::AdamState::zeros_like(q1_);
    q2_adam_ = nn::AdamState::zeros_like(q2_);
  }

  int obs_dim() const { return obs_dim_; }
  int act_dim() const { return act_dim_; }
  const SacOptions& options() const { return opt_; }
  const nn::Mlp& policy() const { return policy_; }
  const nn::Mlp& q1() const { return q1_; }
  const nn::Mlp& q2() const { return q2_; }
  const nn::Mlp& q1_target() const { return q1_target_; }
  const nn::Mlp& q2_target() const { return q2_target_; }

  // Stochastic pre-squash action.
  Eigen::VectorXd act(const Eigen::VectorXd& obs, RngStream& rng) const {
    return nn::sample_policy_single(policy_, obs, opt_.log_std_clamp, rng).pre_squash;
  }

  // Mean action (evaluation).
  Eigen::VectorXd act_mean(const Eigen::VectorXd& obs) const {
    const Eigen::MatrixXd head = nn::forward(policy_, Eigen::MatrixXd(obs.transpose()));
    Eigen::MatrixXd mean, log_std_raw;
    nn::split_policy_output(head, mean, log_std_raw);
    return mean.row(0).transpose();
  }

  struct UpdateDiag {
    double critic_loss = 0.0;
    double actor_loss = 0.0;
    double mean_q = 0.0;
    double mean_log_prob = 0.0;
  };

  UpdateDiag update(const ReplayBuffer::Batch& batch, RngStream& rng) {
    const auto batch_n = batch.states.rows();
    const double inv_b = 1.0 / static_cast<double>(batch_n);
    const double alpha = opt_.temperature;

    // Targets y = r + gamma (1-d) (min Q_targ(s', a') - alpha log pi(a'|s')).
    Eigen::MatrixXd mean2, log_std_raw2;
    nn::split_policy_output(nn::forward(policy_, batch.next_states), mean2, log_std_raw2);
    const Eigen::MatrixXd log_std2 = nn::clamp_log_std(log_std_raw2, opt_.log_std_clamp);
    const nn::SquashedSample next = nn::sample_squashed_gaussian(mean2, log_std2, rng);
    const Eigen::MatrixXd x2 = hcat(batch.next_states, next.action);
    const Eigen::VectorXd q1_next = nn::forward(q1_target_, x2).col(0);
    const Eigen::VectorXd q2_next = nn::forward(q2_target_, x2).col(0);
    const Eigen::VectorXd q_next = q1_next.cwiseMin(q2_next) - alpha * next.log_prob;
    const Eigen::VectorXd y = opt_.reward_scale * batch.rewards +
                              opt_.discount * (1.0 - batch.done.array()).matrix().cwiseProduct(q_next);

    // Critic regression toward y.
    const Eigen::MatrixXd actions = batch.raw_actions.array().tanh().matrix();
    const Eigen::MatrixXd x = hcat(batch.states, actions);
    UpdateDiag diag;
    for (nn::Mlp* q : {&q1_, &q2_}) {
      nn::Trace trace;
      const Eigen::VectorXd pred = nn::forward(*q, x, trace).col(0);
      const Eigen::VectorXd err = pred - y;
      diag.critic_loss += err.squaredNorm() * inv_b * 0.5;
      nn::Gradients grads;
      nn::backward(*q, trace, Eigen::MatrixXd(2.0 * inv_b * err), grads);
      apply(*q, grads, q == &q1_ ? q1_adam_ : q2_adam_, opt_.lr_critic);
    }

    // Actor ascent on E[min Q(s, a~) - alpha log pi(a~|s)] via reparameterized
    // samples; implemented as descent on the negation.
    nn::Trace pol_trace;
    Eigen::MatrixXd mean, log_std_raw;
    nn::split_policy_output(nn::forward(policy_, batch.states, pol_trace), mean, log_std_raw);
    const Eigen::MatrixXd log_std = nn::clamp_log_std(log_std_raw, opt_.log_std_clamp);
    const Eigen::ArrayXXd pass_through = ((log_std_raw.array() > opt_.log_std_clamp.lo) &&
                                          (log_std_raw.array() < opt_.log_std_clamp.hi))
                                             .cast<double>();
    const nn::SquashedSample cur = nn::sample_squashed_gaussian(mean, log_std, rng);
    const Eigen::ArrayXXd tanh_u = cur.action.array();
    const Eigen::MatrixXd xa = hcat(batch.states, cur.action);

    nn::Trace q1_trace, q2_trace;
    const Eigen::VectorXd q1_val = nn::forward(q1_, xa, q1_trace).col(0);
    const Eigen::VectorXd q2_val = nn::forward(q2_, xa, q2_trace).col(0);
    const Eigen::VectorXd q_min = q1_val.cwiseMin(q2_val);

    Eigen::MatrixXd up1 = Eigen::MatrixXd::Zero(batch_n, 1);
    Eigen::MatrixXd up2 = Eigen::MatrixXd::Zero(batch_n, 1);
    for (Eigen::Index i = 0; i < batch_n; ++i) {
      (q1_val(i) <= q2_val(i) ? up1 : up2)(i, 0) = -inv_b;
    }
    nn::Gradients scratch;  // critic gradients from the actor step are discarded
    const Eigen::MatrixXd dx1 = nn::backward(q1_, q1_trace, up1, scratch);
    const Eigen::MatrixXd dx2 = nn::backward(q2_, q2_trace, up2, scratch);
    const Eigen::ArrayXXd d_action =
        dx1.rightCols(act_dim_).array() + dx2.rightCols(act_dim_).array();

    const Eigen::ArrayXXd std = log_std.array().exp();
    const Eigen::ArrayXXd d_pre =
        alpha * inv_b * 2.0 * tanh_u + d_action * (1.0 - tanh_u.square());
    const Eigen::MatrixXd d_mean = d_pre.matrix();
    const Eigen::MatrixXd d_log_std =
        ((d_pre * std * cur.noise.array() - alpha * inv_b) * pass_through).matrix();

    nn::Gradients pol_grads;
    nn::backward(policy_, pol_trace, hcat(d_mean, d_log_std), pol_grads);
    apply(policy_, pol_grads, policy_adam_, opt_.lr_actor);

    nn::polyak_update(q1_target_, q1_, opt_.polyak);
    nn::polyak_update(q2_target_, q2_, opt_.polyak);

    diag.actor_loss = (alpha * cur.log_prob - q_min).mean();
    diag.mean_q = q_min.mean();
    diag.mean_log_prob = cur.log_prob.mean();
    return diag;
  }

  std::vector<nn::NamedTensor> checkpoint_tensors() const {
    std::vector<nn::NamedTensor> out;
    nn::append_mlp_tensors(out, "policy", policy_);
    nn::append_mlp_tensors(out, "q1", q1_);
    nn::append_mlp_tensors(out, "q2", q2_);
    nn::append_mlp_tensors(out, "q1_target", q1_target_);
    nn::append_mlp_tensors(out, "q2_target", q2_target_);
    return out;
  }

  void restore(const std::vector<nn::NamedTensor>& tensors) {
    nn::restore_mlp_tensors(tensors, "policy", policy_);
    nn::restore_mlp_tensors(tensors, "q1", q1_);
    nn::restore_mlp_tensors(tensors, "q2", q2_);
    nn::restore_mlp_tensors(tensors, "q1_target", q1_target_);
    nn::restore_mlp_tensors(tensors, "q2_target", q2_target_);
  }

 private:
  void apply(nn::Mlp& net, const nn::Gradients& grads, nn::AdamState& state, double lr) {
    if (opt_.adam) {
      nn::adam_step(net, grads, state, lr);
    } else {
      nn::sgd_step(net, grads, lr);
    }
  }

  SacOptions opt_;
  int obs_dim_;
  int act_dim_;
  nn::Mlp policy_, q1_, q2_, q1_target_, q2_target_;
  nn::AdamState policy_adam_, q1_adam_, q2_adam_;
};

}  // namespace flsim::rl
