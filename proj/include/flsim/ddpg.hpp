#pragma once

#include <Eigen/Dense>

#include "flsim/checkpoint.hpp"
#include "flsim/mlp.hpp"
#include "flsim/replay.hpp"
#include "flsim/rng.hpp"
#include "flsim/sac.hpp"

namespace flsim::rl {

struct DdpgOptions {
  double discount = 0.95;
  double polyak = 0.995;
  double lr_actor = 3e-4;
  double lr_critic = 3e-4;
  std::vector<int> hidden = {64, 64};
  nn::Activation activation = nn::Activation::softplus;
  bool adam = true;
  double reward_scale = 1.0;
  double exploration_noise = 0.2;  // std of Gaussian noise on the pre-squash action
};

// Deterministic actor-critic baseline with target networks and Gaussian
// exploration noise in pre-squash space.
class DdpgAgent {
 public:
  DdpgAgent(int obs_dim, int act_dim, DdpgOptions opt, const RngStream& master)
      : opt_(std::move(opt)), obs_dim_(obs_dim), act_dim_(act_dim) {
    std::vector<int> actor_dims = {obs_dim};
    std::vector<int> q_dims = {obs_dim + act_dim};
    for (int h : opt_.hidden) {
      actor_dims.push_back(h);
      q_dims.push_back(h);
    }
    actor_dims.push_back(act_dim);
    q_dims.push_back(1);
    RngStream init_actor = master.child("init.policy");
    RngStream init_q = master.child("init.q1");
    actor_ = nn::make_mlp(actor_dims, opt_.activation, nn::Activation::identity, init_actor);
    actor_.weights.back() *= 0.01;
    critic_ = nn::make_mlp(q_dims, opt_.activation, nn::Activation::identity, init_q);
    actor_target_ = actor_;
    critic_target_ = critic_;
    actor_adam_ = nn::AdamState::zeros_like(actor_);
    critic_adam_ = nn::AdamState::zeros_like(critic_);
  }

  const nn::Mlp& actor() const { return actor_; }
  const nn::Mlp& critic() const { return critic_; }

  Eigen::VectorXd act(const Eigen::VectorXd& obs) const { return nn::forward_vec(actor_, obs); }

  Eigen::VectorXd act_explore(const Eigen::VectorXd& obs, RngStream& rng) const {
    Eigen::VectorXd u = act(obs);
    for (Eigen::Index i = 0; i < u.size(); ++i) u(i) += opt_.exploration_noise * rng.normal();
    return u;
  }

  struct UpdateDiag {
    double critic_loss = 0.0;
    double actor_loss = 0.0;
  };

  UpdateDiag update(const ReplayBuffer::Batch& batch) {
    const auto batch_n = batch.states.rows();
    const double inv_b = 1.0 / static_cast<double>(batch_n);

    const Eigen::MatrixXd next_action =
        nn::forward(actor_target_, batch.next_states).array().tanh().matrix();
    const Eigen::VectorXd q_next =
        nn::forward(critic_target_, hcat(batch.next_states, next_action)).col(0);
    const Eigen::VectorXd y =
        opt_.reward_scale * batch.rewards +
        opt_.discount * (1.0 - batch.done.array()).matrix().cwiseProduct(q_next);

    UpdateDiag diag;
    {
      nn::Trace trace;
      const Eigen::MatrixXd x = hcat(batch.states, batch.raw_actions.array().tanh().matrix());
      const Eigen::VectorXd pred = nn::forward(critic_, x, trace).col(0);
      const Eigen::VectorXd err = pred - y;
      diag.critic_loss = err.squaredNorm() * inv_b;
      nn::Gradients grads;
      nn::backward(critic_, trace, Eigen::MatrixXd(2.0 * inv_b * err), grads);
      apply(critic_, grads, critic_adam_, opt_.lr_critic);
    }
    {
      nn::Trace actor_trace;
      const Eigen::MatrixXd u = nn::forward(actor_, batch.states, actor_trace);
      const Eigen::ArrayXXd tanh_u = u.array().tanh();
      nn::Trace q_trace;
      const Eigen::VectorXd q_val =
          nn::forward(critic_, hcat(batch.states, tanh_u.matrix()), q_trace).col(0);
      diag.actor_loss = -q_val.mean();
      nn::Gradients scratch;
      const Eigen::MatrixXd dx = nn::backward(
          critic_, q_trace, Eigen::MatrixXd::Constant(batch_n, 1, -inv_b), scratch);
      const Eigen::MatrixXd d_u =
          (dx.rightCols(act_dim_).array() * (1.0 - tanh_u.square())).matrix();
      nn::Gradients actor_grads;
      nn::backward(actor_, actor_trace, d_u, actor_grads);
      apply(actor_, actor_grads, actor_adam_, opt_.lr_actor);
    }

    nn::polyak_update(actor_target_, actor_, opt_.polyak);
    nn::polyak_update(critic_target_, critic_, opt_.polyak);
    return diag;
  }

  std::vector<nn::NamedTensor> checkpoint_tensors() const {
    std::vector<nn::NamedTensor> out;
    nn::append_mlp_tensors(out, "actor", actor_);
    nn::append_mlp_tensors(out, "critic", critic_);
    nn::append_mlp_tensors(out, "actor_target", actor_target_);
    nn::append_mlp_tensors(out, "critic_target", critic_target_);
    return out;
  }

  void restore(const std::vector<nn::NamedTensor>& tensors) {
    nn::restore_mlp_tensors(tensors, "actor", actor_);
    nn::restore_mlp_tensors(tensors, "critic", critic_);
    nn::restore_mlp_tensors(tensors, "actor_target", actor_target_);
    nn::restore_mlp_tensors(tensors, "critic_target", critic_target_);
  }

 private:
  void apply(nn::Mlp& net, const nn::Gradients& grads, nn::AdamState& state, double lr) {
    if (opt_.adam) {
      nn::adam_step(net, grads, state, lr);
    } else {
      nn::sgd_step(net, grads, lr);
    }
  }

  DdpgOptions opt_;
  int obs_dim_;
  int act_dim_;
  nn::Mlp actor_, critic_, actor_target_, critic_target_;
  nn::AdamState actor_adam_, critic_adam_;
};

}  // namespace flsim::rl
