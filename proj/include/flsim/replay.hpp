#pragma once

#include <Eigen/Dense>
#include <vector>

#include "flsim/constraints.hpp"
#include "flsim/rng.hpp"

namespace flsim::rl {

struct Transition {
  Eigen::VectorXd state;
  Eigen::VectorXd raw_action;            // pre-squash action as sent to the env
  constraints::FeasibleAction applied;   // what the env executed
  double reward = 0.0;
  Eigen::VectorXd next_state;
  bool done = false;
};

// Bounded FIFO with uniform sampling.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity_ == 0) throw ValidationError("ReplayBuffer: capacity must be >= 1");
  }

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return data_.size(); }

  void push(Transition t) {
    if (data_.size() < capacity_) {
      data_.push_back(std::move(t));
    } else {
      data_[head_] = std::move(t);
      head_ = (head_ + 1) % capacity_;
    }
  }

  const Transition& at(std::size_t i) const { return data_[i]; }

  struct Batch {
    Eigen::MatrixXd states;       // B x obs
    Eigen::MatrixXd raw_actions;  // B x act
    Eigen::VectorXd rewards;
    Eigen::MatrixXd next_states;
    Eigen::VectorXd done;         // 0/1
  };

  Batch sample(std::size_t batch_size, RngStream& rng) const {
    if (batch_size == 0 || batch_size > data_.size())
      throw std::domain_error("ReplayBuffer: batch size exceeds stored transitions");
    const auto obs_dim = data_.front().state.size();
    const auto act_dim = data_.front().raw_action.size();
    Batch b;
    b.states.resize(batch_size, obs_dim);
    b.raw_actions.resize(batch_size, act_dim);
    b.rewards.resize(batch_size);
    b.next_states.resize(batch_size, obs_dim);
    b.done.resize(batch_size);
    for (std::size_t i = 0; i < batch_size; ++i) {
      const auto& t = data_[static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<std::int64_t>(data_.size()) - 1))];
      b.states.row(i) = t.state.transpose();
      b.raw_actions.row(i) = t.raw_action.transpose();
      b.rewards(i) = t.reward;
      b.next_states.row(i) = t.next_state.transpose();
      b.done(i) = t.done ? 1.0 : 0.0;
    }
    return b;
  }

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;
  std::vector<Transition> data_;
};

}  // namespace flsim::rl
