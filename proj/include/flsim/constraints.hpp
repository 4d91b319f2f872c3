#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "flsim/convergence.hpp"
#include "flsim/mathutil.hpp"
#include "flsim/rng.hpp"
#include "flsim/wireless.hpp"

namespace flsim::constraints {

// Unconstrained agent output, length 4U in the base mode and 5U+1 when the
// per-user skip count k and the global local-accuracy target are controlled
// by the agent as well.
using RawAction = std::vector<double>;

// Blocked layout: [t | b | f | p] (+ [k | varpi]).
struct ActionLayout {
  int num_users = 1;
  bool sampling_control = false;

  int dim() const { return sampling_control ? 5 * num_users + 1 : 4 * num_users; }
  int t_off() const { return 0; }
  int b_off() const { return num_users; }
  int f_off() const { return 2 * num_users; }
  int p_off() const { return 3 * num_users; }
  int k_off() const { return 4 * num_users; }
  int varpi_off() const { return 5 * num_users; }
};

struct FeasibleAction {
  std::vector<double> t_trans_s;
  std::vector<double> b_hz;
  std::vector<double> f_hz;
  std::vector<double> p_w;
  std::vector<int> k;
  double varpi = 0.1;
};

// Strict-positivity lower bounds are realized as a 1e-6 fraction of the
// upper bound so the sigmoid image stays inside the admissible interval
// even after floating-point rounding.
inline constexpr double kPositiveLowerFraction = 1e-6;
inline constexpr double kVarpiMargin = 1e-6;

namespace detail {

inline double bounded(double raw, double lo, double hi) { return lo + (hi - lo) * sigmoid(raw); }

inline double bounded_inverse(double value, double lo, double hi) {
  double frac = (value - lo) / (hi - lo);
  frac = std::clamp(frac, 1e-15, 1.0 - 1e-15);
  return logit(frac);
}

inline void softmax_scaled(const double* raw, int n, double scale, std::vector<double>& out) {
  double max_logit = raw[0];
  for (int i = 1; i < n; ++i) max_logit = std::max(max_logit, raw[i]);
  double denom = 0.0;
  out.resize(n);
  for (int i = 0; i < n; ++i) {
    out[i] = std::exp(raw[i] - max_logit);
    denom += out[i];
  }
  for (int i = 0; i < n; ++i) out[i] = out[i] / denom * scale;
}

}  // namespace detail

// Explicit-constraint squashing: sigmoid + affine rescale for box-bounded
// scalars, softmax over the bandwidth block so the shares sum to B exactly.
// Total function: any finite raw vector maps to a feasible action.
//
// In the base mode `k` and `varpi` are not part of the action and are filled
// from the supplied defaults.
inline FeasibleAction squash_action(const RawAction& raw, const wireless::NetworkConfig& cfg,
                                    const ActionLayout& layout, int default_k,
                                    double default_varpi) {
  const int u_count = layout.num_users;
  FeasibleAction fa;
  fa.t_trans_s.resize(u_count);
  fa.f_hz.resize(u_count);
  fa.p_w.resize(u_count);
  fa.k.assign(u_count, default_k);
  fa.varpi = default_varpi;

  const double f_lo = kPositiveLowerFraction * cfg.f_max_hz;
  const double p_lo = kPositiveLowerFraction * cfg.p_max_w;
  for (int u = 0; u < u_count; ++u) {
    fa.t_trans_s[u] = detail::bounded(raw[layout.t_off() + u], 0.0, cfg.t_max_round_s);
    fa.f_hz[u] = detail::bounded(raw[layout.f_off() + u], f_lo, cfg.f_max_hz);
    fa.p_w[u] = detail::bounded(raw[layout.p_off() + u], p_lo, cfg.p_max_w);
  }
  detail::softmax_scaled(raw.data() + layout.b_off(), u_count, cfg.bandwidth_hz, fa.b_hz);

  if (layout.sampling_control) {
    for (int u = 0; u < u_count; ++u) {
      const double k_cont = detail::bounded(raw[layout.k_off() + u],
                                            static_cast<double>(cfg.k_min),
                                            static_cast<double>(cfg.k_max));
      fa.k[u] = std::clamp(static_cast<int>(std::lround(k_cont)), cfg.k_min, cfg.k_max);
    }
    fa.varpi = detail::bounded(raw[layout.varpi_off()], kVarpiMargin, 1.0 - kVarpiMargin);
  }
  return fa;
}

// Inverse of squash_action on the feasible set (up to saturation clamping).
inline RawAction unsquash_action(const FeasibleAction& fa, const wireless::NetworkConfig& cfg,
                                 const ActionLayout& layout) {
  const int u_count = layout.num_users;
  RawAction raw(layout.dim(), 0.0);
  const double f_lo = kPositiveLowerFraction * cfg.f_max_hz;
  const double p_lo = kPositiveLowerFraction * cfg.p_max_w;
  for (int u = 0; u < u_count; ++u) {
    raw[layout.t_off() + u] = detail::bounded_inverse(fa.t_trans_s[u], 0.0, cfg.t_max_round_s);
    raw[layout.f_off() + u] = detail::bounded_inverse(fa.f_hz[u], f_lo, cfg.f_max_hz);
    raw[layout.p_off() + u] = detail::bounded_inverse(fa.p_w[u], p_lo, cfg.p_max_w);
    const double share = std::max(fa.b_hz[u] / cfg.bandwidth_hz, 1e-300);
    raw[layout.b_off() + u] = std::log(share);
  }
  if (layout.sampling_control) {
    for (int u = 0; u < u_count; ++u) {
      if (cfg.k_max == cfg.k_min) continue;  // logit undefined on a degenerate range
      raw[layout.k_off() + u] =
          detail::bounded_inverse(static_cast<double>(fa.k[u]), static_cast<double>(cfg.k_min),
                                  static_cast<double>(cfg.k_max));
    }
    raw[layout.varpi_off()] = detail::bounded_inverse(fa.varpi, kVarpiMargin, 1.0 - kVarpiMargin);
  }
  return raw;
}

// Naive per-dimension mapping used by the unconstrained baseline: every
// coordinate is tanh-bounded then affinely rescaled on its own, including
// each bandwidth share over [0, B]. Box bounds still hold, but the shares
// do not sum to B; the overflow is charged through the reward instead.
inline FeasibleAction clip_action(const RawAction& raw, const wireless::NetworkConfig& cfg,
                                  const ActionLayout& layout, int default_k,
                                  double default_varpi) {
  const int u_count = layout.num_users;
  FeasibleAction fa;
  fa.t_trans_s.resize(u_count);
  fa.b_hz.resize(u_count);
  fa.f_hz.resize(u_count);
  fa.p_w.resize(u_count);
  fa.k.assign(u_count, default_k);
  fa.varpi = default_varpi;

  const auto affine01 = [](double raw_v) { return 0.5 * (std::tanh(raw_v) + 1.0); };
  const double f_lo = kPositiveLowerFraction * cfg.f_max_hz;
  const double p_lo = kPositiveLowerFraction * cfg.p_max_w;
  for (int u = 0; u < u_count; ++u) {
    fa.t_trans_s[u] = cfg.t_max_round_s * affine01(raw[layout.t_off() + u]);
    fa.b_hz[u] = cfg.bandwidth_hz * affine01(raw[layout.b_off() + u]);
    fa.f_hz[u] = f_lo + (cfg.f_max_hz - f_lo) * affine01(raw[layout.f_off() + u]);
    fa.p_w[u] = p_lo + (cfg.p_max_w - p_lo) * affine01(raw[layout.p_off() + u]);
  }
  if (layout.sampling_control) {
    for (int u = 0; u < u_count; ++u) {
      const double k_cont = cfg.k_min + (cfg.k_max - cfg.k_min) * affine01(raw[layout.k_off() + u]);
      fa.k[u] = std::clamp(static_cast<int>(std::lround(k_cont)), cfg.k_min, cfg.k_max);
    }
    fa.varpi = kVarpiMargin + (1.0 - 2.0 * kVarpiMargin) * affine01(raw[layout.varpi_off()]);
  }
  return fa;
}

// Inverse of clip_action on non-saturated actions.
inline RawAction unclip_action(const FeasibleAction& fa, const wireless::NetworkConfig& cfg,
                               const ActionLayout& layout) {
  const int u_count = layout.num_users;
  RawAction raw(layout.dim(), 0.0);
  const auto inv = [](double v, double lo, double hi) {
    double t = 2.0 * (v - lo) / (hi - lo) - 1.0;
    t = std::clamp(t, -1.0 + 1e-15, 1.0 - 1e-15);
    return std::atanh(t);
  };
  const double f_lo = kPositiveLowerFraction * cfg.f_max_hz;
  const double p_lo = kPositiveLowerFraction * cfg.p_max_w;
  for (int u = 0; u < u_count; ++u) {
    raw[layout.t_off() + u] = inv(fa.t_trans_s[u], 0.0, cfg.t_max_round_s);
    raw[layout.b_off() + u] = inv(fa.b_hz[u], 0.0, cfg.bandwidth_hz);
    raw[layout.f_off() + u] = inv(fa.f_hz[u], f_lo, cfg.f_max_hz);
    raw[layout.p_off() + u] = inv(fa.p_w[u], p_lo, cfg.p_max_w);
  }
  if (layout.sampling_control) {
    for (int u = 0; u < u_count; ++u) {
      if (cfg.k_max == cfg.k_min) continue;
      raw[layout.k_off() + u] = inv(static_cast<double>(fa.k[u]), static_cast<double>(cfg.k_min),
                                    static_cast<double>(cfg.k_max));
    }
    raw[layout.varpi_off()] = inv(fa.varpi, kVarpiMargin, 1.0 - kVarpiMargin);
  }
  return raw;
}

// Uniform draw over the feasible set; bandwidth shares come from a flat
// Dirichlet so they sum to B exactly.
inline FeasibleAction sample_uniform_feasible(const wireless::NetworkConfig& cfg,
                                              const ActionLayout& layout, int default_k,
                                              double default_varpi, RngStream& rng) {
  const int u_count = layout.num_users;
  FeasibleAction fa;
  fa.t_trans_s.resize(u_count);
  fa.b_hz.resize(u_count);
  fa.f_hz.resize(u_count);
  fa.p_w.resize(u_count);
  fa.k.assign(u_count, default_k);
  fa.varpi = default_varpi;

  const double f_lo = kPositiveLowerFraction * cfg.f_max_hz;
  const double p_lo = kPositiveLowerFraction * cfg.p_max_w;
  double share_sum = 0.0;
  for (int u = 0; u < u_count; ++u) {
    fa.t_trans_s[u] = rng.uniform(0.0, cfg.t_max_round_s);
    fa.f_hz[u] = rng.uniform(f_lo, cfg.f_max_hz);
    fa.p_w[u] = rng.uniform(p_lo, cfg.p_max_w);
    fa.b_hz[u] = -std::log(1.0 - rng.uniform01());  // Exp(1)
    share_sum += fa.b_hz[u];
  }
  for (int u = 0; u < u_count; ++u) fa.b_hz[u] *= cfg.bandwidth_hz / share_sum;
  if (layout.sampling_control) {
    for (int u = 0; u < u_count; ++u)
      fa.k[u] = static_cast<int>(rng.uniform_int(cfg.k_min, cfg.k_max));
    fa.varpi = rng.uniform(kVarpiMargin, 1.0 - kVarpiMargin);
  }
  return fa;
}

// A_u log2(1/varpi) / f_u is the computation time implied by the continuous
// local-iteration bound, with A_u = 2 / ((2 - L d) d mu) * C_u * D_u.
inline double penalty_time(const wireless::NetworkConfig& cfg,
                           const convergence::LearningParams& learn,
                           const std::vector<wireless::UserState>& users,
                           const FeasibleAction& fa) {
  const double coeff = 2.0 / learn.step_margin();
  const double log_acc = std::log2(1.0 / fa.varpi);
  double worst = 0.0;
  for (std::size_t u = 0; u < users.size(); ++u) {
    const double a_u = coeff * users[u].cycles_per_sample * users[u].num_samples;
    const double overshoot = a_u * log_acc / fa.f_hz[u] + fa.t_trans_s[u] - cfg.t_max_round_s;
    worst = std::max(worst, std::max(overshoot, 0.0));
  }
  return worst;
}

// Shortfall of delivered bits against the model payload D0.
inline double penalty_data(const wireless::NetworkConfig& cfg,
                           const std::vector<wireless::UserState>& users,
                           const FeasibleAction& fa) {
  double worst = 0.0;
  for (std::size_t u = 0; u < users.size(); ++u) {
    const double rate = wireless::achievable_rate(fa.b_hz[u], users[u].gain, fa.p_w[u],
                                                  cfg.noise_psd_w_per_hz);
    const double shortfall = cfg.model_bits - fa.t_trans_s[u] * rate;
    worst = std::max(worst, std::max(shortfall, 0.0));
  }
  return worst;
}

inline double bandwidth_overflow(const wireless::NetworkConfig& cfg, const FeasibleAction& fa) {
  double sum = 0.0;
  for (double b : fa.b_hz) sum += b;
  return std::max(sum - cfg.bandwidth_hz, 0.0);
}

struct RewardTerms {
  double energy_j = 0.0;    // energy charged to the reward
  double p1_s = 0.0;        // completion-time overflow
  double p2_bits = 0.0;     // payload shortfall
  double p_bw_hz = 0.0;     // bandwidth-sum overflow (naive mapping only)
  double reward = 0.0;
};

struct RewardOptions {
  double lambda_time = -1.0;
  double lambda_data = -1e-6;
  double lambda_bandwidth = -1e-6;
  bool include_sampling_energy = false;
  bool penalize_bandwidth_sum = false;

  void validate() const {
    if (lambda_time > 0 || lambda_data > 0 || lambda_bandwidth > 0)
      throw ValidationError("penalty coefficients must be <= 0 so violations reduce reward");
  }
};

struct StepOutcome {
  RewardTerms terms;
  wireless::RoundTotals totals;
};

// Reward for one communication round: negative energy plus penalty terms.
// The local-iteration count entering the computation energy follows the
// action's accuracy target.
inline StepOutcome step_reward(const wireless::NetworkConfig& cfg,
                               const convergence::LearningParams& learn,
                               const std::vector<wireless::UserState>& users,
                               const FeasibleAction& fa, const RewardOptions& opt) {
  opt.validate();
  convergence::LearningParams effective = learn;
  effective.local_accuracy = fa.varpi;
  const double iters = static_cast<double>(convergence::local_iterations(effective));

  StepOutcome out;
  out.totals = wireless::round_totals(cfg, users, fa.t_trans_s, fa.f_hz, fa.p_w, fa.k, iters);
  auto& terms = out.terms;
  terms.energy_j = out.totals.total.compute_j + out.totals.total.transmit_j;
  if (opt.include_sampling_energy) terms.energy_j += out.totals.total.sampling_j;
  terms.p1_s = penalty_time(cfg, effective, users, fa);
  terms.p2_bits = penalty_data(cfg, users, fa);
  terms.p_bw_hz = opt.penalize_bandwidth_sum ? bandwidth_overflow(cfg, fa) : 0.0;
  terms.reward = -terms.energy_j + opt.lambda_time * terms.p1_s + opt.lambda_data * terms.p2_bits +
                 opt.lambda_bandwidth * terms.p_bw_hz;
  return out;
}

}  // namespace flsim::constraints
