#pragma once

#include <cmath>
#include <sstream>
#include <vector>

#include "flsim/errors.hpp"
#include "flsim/rng.hpp"

namespace flsim::wireless {

// Static network parameters. All fields are SI internally (Hz, W, J, s,
// bits, km for distances); the dBm/Hz noise figure from configs is converted
// once at load time.
struct NetworkConfig {
  int num_users = 1;
  double bandwidth_hz = 20e6;            // B, shared uplink bandwidth
  double noise_psd_w_per_hz = 3.9810717055349695e-21;  // n0 (-174 dBm/Hz)
  double cell_radius_km = 1.0;
  double min_distance_km = 0.01;
  double shadow_sigma_db = 8.0;
  double pathloss_a_db = 128.1;
  double pathloss_b_db = 37.6;
  double model_bits = 2.24e8;            // D0, uplink payload per round
  double t_max_round_s = 20.0;           // per-round completion budget
  double f_max_hz = 2e9;
  double p_max_w = 10.0;
  int k_min = 0;
  int k_max = 100;
  double kappa = 1e-28;                  // effective switched capacitance
  double sample_energy_j = 0.01;         // P_u, per captured sample
  double tau_s = 0.01;                   // minimum device sampling interval

  void validate() const {
    std::ostringstream err;
    if (num_users < 1) err << "num_users must be >= 1; ";
    if (!(bandwidth_hz > 0)) err << "bandwidth_hz must be > 0; ";
    if (!(noise_psd_w_per_hz > 0)) err << "noise psd must be > 0; ";
    if (!(cell_radius_km > 0)) err << "cell_radius_km must be > 0; ";
    if (!(min_distance_km > 0) || min_distance_km > cell_radius_km)
      err << "min_distance_km must lie in (0, cell_radius_km]; ";
    if (shadow_sigma_db < 0) err << "shadow_sigma_db must be >= 0; ";
    if (!(model_bits > 0)) err << "model_bits must be > 0; ";
    if (!(t_max_round_s > 0)) err << "t_max_round_s must be > 0; ";
    if (!(f_max_hz > 0)) err << "f_max_hz must be > 0; ";
    if (!(p_max_w > 0)) err << "p_max_w must be > 0; ";
    if (k_min < 0 || k_min > k_max) err << "need 0 <= k_min <= k_max; ";
    if (!(kappa > 0)) err << "kappa must be > 0; ";
    if (sample_energy_j < 0) err << "sample_energy_j must be >= 0; ";
    if (!(tau_s > 0)) err << "tau_s must be > 0; ";
    const std::string msg = err.str();
    if (!msg.empty()) throw ValidationError("NetworkConfig: " + msg);
  }
};

// Per-user dynamic state.
struct UserState {
  double distance_km = 1.0;
  double gain = 1.0;               // g_u, linear power gain
  double cycles_per_sample = 1e4;  // C_u
  double num_samples = 100.0;      // D_u
};

struct EnergyBreakdown {
  double sampling_j = 0.0;
  double compute_j = 0.0;
  double transmit_j = 0.0;

  double total() const { return sampling_j + compute_j + transmit_j; }
};

inline double path_loss_db(const NetworkConfig& cfg, double d_km) {
  if (!(d_km > 0)) throw std::domain_error("path_loss_db: distance must be > 0");
  return cfg.pathloss_a_db + cfg.pathloss_b_db * std::log10(d_km);
}

// Log-normal shadowing on top of the distance path loss, returned as a
// linear power gain.
inline double draw_channel_gain(const NetworkConfig& cfg, double d_km, RngStream& rng) {
  const double shadow_db = cfg.shadow_sigma_db > 0 ? rng.normal(0.0, cfg.shadow_sigma_db) : 0.0;
  const double loss_db = path_loss_db(cfg, d_km) + shadow_db;
  return std::pow(10.0, -loss_db / 10.0);
}

// Area-uniform placement on the disk between min_distance and the cell edge.
inline double draw_user_distance_km(const NetworkConfig& cfg, RngStream& rng) {
  const double rmin2 = cfg.min_distance_km * cfg.min_distance_km;
  const double rmax2 = cfg.cell_radius_km * cfg.cell_radius_km;
  return std::sqrt(rmin2 + (rmax2 - rmin2) * rng.uniform01());
}

// r = b * log2(1 + g p / (n0 b)). A zero bandwidth share returns rate 0:
// that is the b -> 0 limit of the expression, and softmax allocation can
// drive a user's share arbitrarily close to zero.
inline double achievable_rate(double b_hz, double gain, double p_w, double n0) {
  if (b_hz < 0 || p_w < 0) throw std::domain_error("achievable_rate: negative input");
  if (b_hz == 0.0) return 0.0;
  return b_hz * std::log2(1.0 + gain * p_w / (n0 * b_hz));
}

inline double sampling_energy(double k, double sample_energy_j) {
  if (k < 0) throw std::domain_error("sampling_energy: k must be >= 0");
  return k * sample_energy_j;
}

struct ComputeResult {
  double time_s = 0.0;
  double energy_j = 0.0;
};

inline ComputeResult local_computation(double iterations, double cycles_per_sample,
                                       double num_samples, double f_hz, double kappa) {
  if (!(f_hz > 0)) throw std::domain_error("local_computation: f must be > 0");
  const double work_cycles = iterations * cycles_per_sample * num_samples;
  return {work_cycles / f_hz, kappa * work_cycles * f_hz * f_hz};
}

inline double transmission_energy(double p_w, double t_trans_s) {
  if (p_w < 0 || t_trans_s < 0) throw std::domain_error("transmission_energy: negative input");
  return p_w * t_trans_s;
}

// One communication round, evaluated per user and summed.
struct RoundTotals {
  std::vector<EnergyBreakdown> per_user;
  std::vector<double> completion_s;  // per-user compute + transmit time
  EnergyBreakdown total;
  double max_completion_s = 0.0;
};

// `local_iterations` is the per-user iteration count implied by the local
// accuracy target; it is the same for every user because the bound depends
// only on the learning constants.
inline RoundTotals round_totals(const NetworkConfig& cfg, const std::vector<UserState>& users,
                                const std::vector<double>& t_trans_s,
                                const std::vector<double>& f_hz, const std::vector<double>& p_w,
                                const std::vector<int>& k, double local_iterations) {
  const auto u_count = users.size();
  if (t_trans_s.size() != u_count || f_hz.size() != u_count || p_w.size() != u_count ||
      k.size() != u_count) {
    throw std::domain_error("round_totals: per-user vectors must match user count");
  }
  RoundTotals out;
  out.per_user.resize(u_count);
  out.completion_s.resize(u_count);
  for (std::size_t u = 0; u < u_count; ++u) {
    const auto comp = local_computation(local_iterations, users[u].cycles_per_sample,
                                        users[u].num_samples, f_hz[u], cfg.kappa);
    auto& e = out.per_user[u];
    e.sampling_j = sampling_energy(static_cast<double>(k[u]), cfg.sample_energy_j);
    e.compute_j = comp.energy_j;
    e.transmit_j = transmission_energy(p_w[u], t_trans_s[u]);
    out.completion_s[u] = comp.time_s + t_trans_s[u];
    out.total.sampling_j += e.sampling_j;
    out.total.compute_j += e.compute_j;
    out.total.transmit_j += e.transmit_j;
    out.max_completion_s = std::max(out.max_completion_s, out.completion_s[u]);
  }
  return out;
}

}  // namespace flsim::wireless
