#pragma once

#include <cmath>
#include <numeric>
#include <sstream>
#include <vector>

#include "flsim/errors.hpp"

namespace flsim::convergence {

// Analytic stand-ins for the federated training loop: smoothness/convexity
// constants, the aggregation coefficient, the local gradient step size and
// the two accuracy targets.
struct LearningParams {
  double smoothness_l = 100.0;      // L
  double strong_convexity_mu = 100.0;
  double aggregation_xi = 1.0;
  double step_size_delta = 0.005;
  double local_accuracy = 0.1;      // varpi, in (0,1)
  double global_accuracy = 0.1;     // varrho, in (0,1)

  // (2 - L*delta) * delta * mu; must be positive for the local-iteration
  // bound to make sense.
  double step_margin() const {
    return (2.0 - smoothness_l * step_size_delta) * step_size_delta * strong_convexity_mu;
  }

  void validate() const {
    std::ostringstream err;
    if (!(strong_convexity_mu > 0)) err << "strong_convexity must be > 0; ";
    if (smoothness_l < strong_convexity_mu) err << "smoothness L must be >= mu; ";
    if (!(local_accuracy > 0 && local_accuracy < 1)) err << "local_accuracy must be in (0,1); ";
    if (!(global_accuracy > 0 && global_accuracy <= 1)) err << "global_accuracy must be in (0,1]; ";
    if (!(aggregation_xi > 0)) err << "aggregation_xi must be > 0; ";
    if (!(step_size_delta > 0)) err << "step_size_delta must be > 0; ";
    if (!(step_margin() > 0)) err << "(2 - L*delta)*delta*mu must be > 0; ";
    const std::string msg = err.str();
    if (!msg.empty()) throw ValidationError("LearningParams: " + msg);
  }
};

// Constants of the sampling-induced generalization-gap model.
struct GapParams {
  double c0 = 1.0;                 // entropy-difference constant, nats
  double c1 = 1.0;                 // time-variant decay coefficient, 1/s
  double sigma2 = 1.0;             // loss variance
  double entropy_hz_bits = 1.0;    // H(Z)
  double entropy_pz_nats = 1.0;    // H(p(z|Z)); defaults to c0 at load time
  std::vector<double> samples_per_user;  // m_u

  double total_samples() const {
    return std::accumulate(samples_per_user.begin(), samples_per_user.end(), 0.0);
  }

  void validate() const {
    std::ostringstream err;
    if (!(c0 > 0)) err << "c0 must be > 0; ";
    if (!(c1 > 0)) err << "c1 must be > 0; ";
    if (!(sigma2 > 0)) err << "sigma2 must be > 0; ";
    if (entropy_pz_nats < 0) err << "entropy_pz_nats must be >= 0; ";
    for (double m : samples_per_user)
      if (!(m > 0)) {
        err << "samples_per_user entries must be > 0; ";
        break;
      }
    const std::string msg = err.str();
    if (!msg.empty()) throw ValidationError("GapParams: " + msg);
  }
};

// Model value of the information usage I(p(z|Z~), p(z|Z)); the exponential
// bound is taken with equality.
inline double information_usage(double c0, double c1, double k, double tau_s) {
  if (k < 0) throw std::domain_error("information_usage: k must be >= 0");
  if (!(tau_s > 0)) throw std::domain_error("information_usage: tau must be > 0");
  return c0 * std::exp(-c1 * k * tau_s);
}

// Per-user generalization-gap bound under the sampling model.
inline double local_gap_bound(const GapParams& gap, std::size_t user, double k, double tau_s) {
  if (user >= gap.samples_per_user.size())
    throw std::domain_error("local_gap_bound: user index out of range");
  const double m_u = gap.samples_per_user[user];
  if (!(m_u > 0)) throw std::domain_error("local_gap_bound: m_u must be > 0");
  return std::sqrt(2.0 * gap.sigma2 / m_u) * std::sqrt(gap.c0) *
         std::exp(-gap.c1 * k * tau_s / 2.0);
}

// Aggregated bound over all users (summed form).
inline double global_gap_bound(const GapParams& gap, const std::vector<double>& k,
                               const std::vector<double>& tau_s) {
  if (k.size() != gap.samples_per_user.size() || tau_s.size() != k.size())
    throw std::domain_error("global_gap_bound: per-user vectors must match");
  double sum = 0.0;
  for (std::size_t u = 0; u < k.size(); ++u) sum += local_gap_bound(gap, u, k[u], tau_s[u]);
  return sum;
}

// Generalization-gap statement entering the global-iteration bound.
inline double psi(const GapParams& gap, double k, double tau_s) {
  const double usage = information_usage(gap.c0, gap.c1, k, tau_s);
  const double radicand = gap.entropy_pz_nats - usage;
  if (radicand < 0) {
    std::ostringstream err;
    err << "psi: entropy_pz (" << gap.entropy_pz_nats << ") < information usage (" << usage
        << ") at k=" << k;
    throw std::domain_error(err.str());
  }
  return std::pow(2.0, gap.entropy_hz_bits) * std::sqrt(2.0 * radicand);
}

// Continuous lower bound on the local iteration count.
inline double local_iteration_bound(const LearningParams& p) {
  const double margin = p.step_margin();
  if (!(margin > 0)) throw ValidationError("local_iteration_bound: (2 - L*delta)*delta*mu <= 0");
  return 2.0 / margin * std::log2(1.0 / p.local_accuracy);
}

inline int local_iterations(const LearningParams& p) {
  return std::max(1, static_cast<int>(std::ceil(local_iteration_bound(p))));
}

// Denominator of the global-iteration bound; positive in the contractive
// regime only.
inline double iteration_bound_denominator(const LearningParams& p, const GapParams& gap, double k,
                                          double tau_s, int num_users) {
  const double xi = p.aggregation_xi;
  return xi * (p.smoothness_l + 2.0) * psi(gap, k, tau_s) + xi * p.smoothness_l / num_users -
         p.local_accuracy * p.strong_convexity_mu;
}

[[noreturn]] inline void throw_divergent(const LearningParams& p, const GapParams& gap, double k,
                                         double tau_s, int num_users, double denom) {
  std::ostringstream err;
  err << "divergent regime: xi*(L+2)*Psi + xi*L/U - varpi*mu = " << denom
      << " <= 0 (L=" << p.smoothness_l << ", mu=" << p.strong_convexity_mu
      << ", xi=" << p.aggregation_xi << ", varpi=" << p.local_accuracy << ", U=" << num_users
      << ", k=" << k << ", tau=" << tau_s << ", c0=" << gap.c0 << ", c1=" << gap.c1
      << ", H_pz=" << gap.entropy_pz_nats << ")";
  throw DivergentRegimeError(err.str());
}

// Continuous lower bound on the number of global rounds needed to reach the
// global accuracy target.
inline double global_iteration_bound(const LearningParams& p, const GapParams& gap, double k,
                                     double tau_s, int num_users) {
  const double denom = iteration_bound_denominator(p, gap, k, tau_s, num_users);
  if (!(denom > 0)) throw_divergent(p, gap, k, tau_s, num_users, denom);
  const double l = p.smoothness_l;
  return std::log(1.0 / p.global_accuracy) * 2.0 * num_users * l * l * p.aggregation_xi / denom;
}

inline long global_iterations(const LearningParams& p, const GapParams& gap, double k,
                              double tau_s, int num_users) {
  return static_cast<long>(std::ceil(global_iteration_bound(p, gap, k, tau_s, num_users)));
}

// Per-round multiplicative shrinkage of the loss gap; in (0,1) in the
// contractive regime.
inline double contraction_factor(const LearningParams& p, const GapParams& gap, double k,
                                 double tau_s, int num_users) {
  const double denom = iteration_bound_denominator(p, gap, k, tau_s, num_users);
  const double l = p.smoothness_l;
  const double factor = 1.0 - denom / (2.0 * num_users * l * l * p.aggregation_xi);
  if (!(factor > 0 && factor < 1)) {
    if (!(denom > 0)) throw_divergent(p, gap, k, tau_s, num_users, denom);
    std::ostringstream err;
    err << "contraction_factor " << factor << " outside (0,1)";
    throw DivergentRegimeError(err.str());
  }
  return factor;
}

}  // namespace flsim::convergence
