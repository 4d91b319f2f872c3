#pragma once

#include <Eigen/Dense>

#include "flsim/mathutil.hpp"
#include "flsim/mlp.hpp"
#include "flsim/rng.hpp"

namespace flsim::nn {

// The policy trunk emits [mean | log_std] per action dimension; the log-std
// half is hard-clamped for numerical stability of the tanh-Gaussian density.
struct LogStdClamp {
  double lo = -20.0;
  double hi = 2.0;
};

// Single-state view of the policy head output plus one reparameterized draw.
struct GaussianPolicyOutput {
  Eigen::VectorXd mean;
  Eigen::VectorXd log_std;     // clamped
  Eigen::VectorXd pre_squash;  // mean + std .* noise
  double log_prob = 0.0;       // density of tanh(pre_squash)
};

// Batched sample: one row per state.
struct SquashedSample {
  Eigen::MatrixXd noise;    // standard normal draws
  Eigen::MatrixXd pre;      // mean + std .* noise
  Eigen::MatrixXd action;   // tanh(pre), in (-1,1)
  Eigen::VectorXd log_prob; // per row, with the tanh change-of-variables term
};

inline void split_policy_output(const Eigen::MatrixXd& head, Eigen::MatrixXd& mean,
                                Eigen::MatrixXd& log_std_raw) {
  const int act_dim = static_cast<int>(head.cols()) / 2;
  mean = head.leftCols(act_dim);
  log_std_raw = head.rightCols(act_dim);
}

inline Eigen::MatrixXd clamp_log_std(const Eigen::MatrixXd& raw, const LogStdClamp& clamp) {
  return raw.array().min(clamp.hi).max(clamp.lo).matrix();
}

// log pi(a) for a = tanh(pre) under N(mean, diag(std^2)), written with the
// stable log1p form of the tanh correction.
inline Eigen::VectorXd squashed_log_prob(const Eigen::MatrixXd& mean,
                                         const Eigen::MatrixXd& log_std,
                                         const Eigen::MatrixXd& pre) {
  const Eigen::ArrayXXd std = log_std.array().exp();
  const Eigen::ArrayXXd z = (pre.array() - mean.array()) / std;
  Eigen::ArrayXXd terms = -0.5 * z.square() - log_std.array() - 0.5 * kLn2Pi;
  terms -= pre.unaryExpr([](double u) { return log_one_minus_tanh_sq(u); }).array();
  return terms.rowwise().sum().matrix();
}

inline SquashedSample sample_squashed_gaussian(const Eigen::MatrixXd& mean,
                                               const Eigen::MatrixXd& log_std, RngStream& rng) {
  SquashedSample s;
  s.noise.resize(mean.rows(), mean.cols());
  for (Eigen::Index i = 0; i < s.noise.rows(); ++i)
    for (Eigen::Index j = 0; j < s.noise.cols(); ++j) s.noise(i, j) = rng.normal();
  s.pre = mean + log_std.array().exp().matrix().cwiseProduct(s.noise);
  s.action = s.pre.array().tanh().matrix();
  s.log_prob = squashed_log_prob(mean, log_std, s.pre);
  return s;
}

inline GaussianPolicyOutput sample_policy_single(const Mlp& policy, const Eigen::VectorXd& state,
                                                 const LogStdClamp& clamp, RngStream& rng) {
  const Eigen::MatrixXd head = forward(policy, Eigen::MatrixXd(state.transpose()));
  Eigen::MatrixXd mean, log_std_raw;
  split_policy_output(head, mean, log_std_raw);
  const Eigen::MatrixXd log_std = clamp_log_std(log_std_raw, clamp);
  const SquashedSample s = sample_squashed_gaussian(mean, log_std, rng);
  GaussianPolicyOutput out;
  out.mean = mean.row(0).transpose();
  out.log_std = log_std.row(0).transpose();
  out.pre_squash = s.pre.row(0).transpose();
  out.log_prob = s.log_prob(0);
  return out;
}

}  // namespace flsim::nn
