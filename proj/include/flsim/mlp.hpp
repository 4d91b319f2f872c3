#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "flsim/errors.hpp"
#include "flsim/mathutil.hpp"
#include "flsim/rng.hpp"

namespace flsim::nn {

enum class Activation { identity, relu, tanh_act, softplus };

inline Activation parse_activation(const std::string& name) {
  if (name == "identity") return Activation::identity;
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh_act;
  if (name == "softplus") return Activation::softplus;
  throw ValidationError("unknown activation: " + name);
}

// Dense feed-forward network. Weights are (out x in); batches are stored
// row-wise, so a layer computes act(X * W^T + b^T).
struct Mlp {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
  std::vector<Activation> activations;

  int num_layers() const { return static_cast<int>(weights.size()); }
  int input_dim() const { return static_cast<int>(weights.front().cols()); }
  int output_dim() const { return static_cast<int>(weights.back().rows()); }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (int l = 0; l < num_layers(); ++l) n += weights[l].size() + biases[l].size();
    return n;
  }
};

// Xavier-uniform initialization.
inline Mlp make_mlp(const std::vector<int>& dims, Activation hidden, Activation output,
                    RngStream& rng) {
  if (dims.size() < 2) throw ValidationError("make_mlp: need at least input and output dims");
  Mlp net;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const int in = dims[l];
    const int out = dims[l + 1];
    if (in < 1 || out < 1) throw ValidationError("make_mlp: layer dims must be >= 1");
    const double limit = std::sqrt(6.0 / (in + out));
    Eigen::MatrixXd w(out, in);
    for (int i = 0; i < out; ++i)
      for (int j = 0; j < in; ++j) w(i, j) = rng.uniform(-limit, limit);
    net.weights.push_back(std::move(w));
    net.biases.push_back(Eigen::VectorXd::Zero(out));
    net.activations.push_back(l + 2 < dims.size() ? hidden : output);
  }
  return net;
}

namespace detail {

inline void apply_activation(Activation act, Eigen::MatrixXd& x) {
  switch (act) {
    case Activation::identity:
      return;
    case Activation::relu:
      x = x.cwiseMax(0.0);
      return;
    case Activation::tanh_act:
      x = x.array().tanh().matrix();
      return;
    case Activation::softplus:
      x = x.unaryExpr([](double v) { return softplus(v); });
      return;
  }
}

// Derivative evaluated from the pre-activation.
inline Eigen::MatrixXd activation_grad(Activation act, const Eigen::MatrixXd& pre) {
  switch (act) {
    case Activation::identity:
      return Eigen::MatrixXd::Ones(pre.rows(), pre.cols());
    case Activation::relu:
      return pre.unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; });
    case Activation::tanh_act: {
      Eigen::MatrixXd t = pre.array().tanh().matrix();
      return (1.0 - t.array().square()).matrix();
    }
    case Activation::softplus:
      return pre.unaryExpr([](double v) { return sigmoid(v); });
  }
  return {};
}

}  // namespace detail

// Cached per-layer values from a forward pass; post[0] is the input batch.
struct Trace {
  std::vector<Eigen::MatrixXd> pre;
  std::vector<Eigen::MatrixXd> post;
};

inline const Eigen::MatrixXd& forward(const Mlp& net, const Eigen::MatrixXd& x, Trace& trace) {
  if (x.cols() != net.input_dim())
    throw std::invalid_argument("forward: input dim mismatch (got " + std::to_string(x.cols()) +
                                ", expected " + std::to_string(net.input_dim()) + ")");
  const int layers = net.num_layers();
  trace.pre.resize(layers);
  trace.post.resize(layers + 1);
  trace.post[0] = x;
  for (int l = 0; l < layers; ++l) {
    trace.pre[l].noalias() = trace.post[l] * net.weights[l].transpose();
    trace.pre[l].rowwise() += net.biases[l].transpose();
    trace.post[l + 1] = trace.pre[l];
    detail::apply_activation(net.activations[l], trace.post[l + 1]);
  }
  return trace.post.back();
}

inline Eigen::MatrixXd forward(const Mlp& net, const Eigen::MatrixXd& x) {
  Trace trace;
  return forward(net, x, trace);
}

inline Eigen::VectorXd forward_vec(const Mlp& net, const Eigen::VectorXd& x) {
  return forward(net, Eigen::MatrixXd(x.transpose())).row(0).transpose();
}

struct Gradients {
  std::vector<Eigen::MatrixXd> d_weights;
  std::vector<Eigen::VectorXd> d_biases;

  static Gradients zeros_like(const Mlp& net) {
    Gradients g;
    for (int l = 0; l < net.num_layers(); ++l) {
      g.d_weights.emplace_back(Eigen::MatrixXd::Zero(net.weights[l].rows(), net.weights[l].cols()));
      g.d_biases.emplace_back(Eigen::VectorXd::Zero(net.biases[l].size()));
    }
    return g;
  }
};

// Exact reverse-mode pass. `d_out` is dLoss/d(output), batch x out_dim.
// Fills `grads` (overwriting) and returns dLoss/d(input).
inline Eigen::MatrixXd backward(const Mlp& net, const Trace& trace, const Eigen::MatrixXd& d_out,
                                Gradients& grads) {
  const int layers = net.num_layers();
  if (d_out.rows() != trace.post[0].rows() || d_out.cols() != net.output_dim())
    throw std::invalid_argument("backward: upstream gradient shape mismatch");
  grads.d_weights.resize(layers);
  grads.d_biases.resize(layers);
  Eigen::MatrixXd delta = d_out;
  for (int l = layers - 1; l >= 0; --l) {
    delta = delta.cwiseProduct(detail::activation_grad(net.activations[l], trace.pre[l]));
    grads.d_weights[l].noalias() = delta.transpose() * trace.post[l];
    grads.d_biases[l] = delta.colwise().sum().transpose();
    delta = (delta * net.weights[l]).eval();
  }
  return delta;  // dLoss/d(input)
}

// params <- params - lr * grads
inline void sgd_step(Mlp& net, const Gradients& grads, double lr) {
  for (int l = 0; l < net.num_layers(); ++l) {
    net.weights[l] -= lr * grads.d_weights[l];
    net.biases[l] -= lr * grads.d_biases[l];
  }
}

struct AdamState {
  std::vector<Eigen::MatrixXd> m_w, v_w;
  std::vector<Eigen::VectorXd> m_b, v_b;
  long step = 0;

  static AdamState zeros_like(const Mlp& net) {
    AdamState s;
    for (int l = 0; l < net.num_layers(); ++l) {
      s.m_w.emplace_back(Eigen::MatrixXd::Zero(net.weights[l].rows(), net.weights[l].cols()));
      s.v_w.emplace_back(Eigen::MatrixXd::Zero(net.weights[l].rows(), net.weights[l].cols()));
      s.m_b.emplace_back(Eigen::VectorXd::Zero(net.biases[l].size()));
      s.v_b.emplace_back(Eigen::VectorXd::Zero(net.biases[l].size()));
    }
    return s;
  }
};

inline void adam_step(Mlp& net, const Gradients& grads, AdamState& state, double lr,
                      double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
  state.step += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (int l = 0; l < net.num_layers(); ++l) {
    state.m_w[l] = beta1 * state.m_w[l] + (1.0 - beta1) * grads.d_weights[l];
    state.v_w[l] = beta2 * state.v_w[l] +
                   (1.0 - beta2) * grads.d_weights[l].cwiseProduct(grads.d_weights[l]);
    state.m_b[l] = beta1 * state.m_b[l] + (1.0 - beta1) * grads.d_biases[l];
    state.v_b[l] =
        beta2 * state.v_b[l] + (1.0 - beta2) * grads.d_biases[l].cwiseProduct(grads.d_biases[l]);
    net.weights[l].array() -=
        lr * (state.m_w[l].array() / bc1) / ((state.v_w[l].array() / bc2).sqrt() + eps);
    net.biases[l].array() -=
        lr * (state.m_b[l].array() / bc1) / ((state.v_b[l].array() / bc2).sqrt() + eps);
  }
}

// Elementwise convex combination: target <- rho * target + (1 - rho) * online.
inline void polyak_update(Mlp& target, const Mlp& online, double rho) {
  if (target.num_layers() != online.num_layers())
    throw std::invalid_argument("polyak_update: layer count mismatch");
  for (int l = 0; l < target.num_layers(); ++l) {
    if (target.weights[l].rows() != online.weights[l].rows() ||
        target.weights[l].cols() != online.weights[l].cols())
      throw std::invalid_argument("polyak_update: shape mismatch");
    target.weights[l] = rho * target.weights[l] + (1.0 - rho) * online.weights[l];
    target.biases[l] = rho * target.biases[l] + (1.0 - rho) * online.biases[l];
  }
}

}  // namespace flsim::nn
