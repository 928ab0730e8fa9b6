#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <vector>

#include "secbeam/errors.hpp"

namespace secbeam {

// Bits-per-use conversion constant appearing in the normal approximation.
inline constexpr double kLog2E = std::numbers::log2e;

// Auxiliary-SINR floor used wherever a gradient divides by sqrt(sum of
// dispersions); keeps linearizations finite near the origin.
inline constexpr double kSinrFloor = 1e-6;

inline double gaussian_q(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

inline double gaussian_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

// Inverse of the Gaussian Q-function. Hastings rational starting point
// followed by Newton polish on Q itself; the iteration converges to
// machine-level |Q(x) - p|.
inline double q_inv(double p) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("q_inv: p must lie in (0,1)");
  if (p == 0.5) return 0.0;
  const bool flip = p > 0.5;
  const double pp = flip ? 1.0 - p : p;
  const double t = std::sqrt(-2.0 * std::log(pp));
  double x = t - (2.515517 + t * (0.802853 + t * 0.010328)) /
                     (1.0 + t * (1.432788 + t * (0.189269 + t * 0.001308)));
  for (int it = 0; it < 6; ++it) {
    const double err = gaussian_q(x) - pp;
    if (err == 0.0) break;
    x += err / gaussian_pdf(x);
  }
  return flip ? -x : x;
}

// Channel dispersion V(gamma) = 1 - (1+gamma)^-2.
inline double dispersion(double gamma) {
  if (gamma < 0.0) throw DomainError("dispersion: SINR must be nonnegative");
  const double s = 1.0 + gamma;
  return 1.0 - 1.0 / (s * s);
}

// d/dgamma of dispersion.
inline double dispersion_deriv(double gamma) {
  const double s = 1.0 + gamma;
  return 2.0 / (s * s * s);
}

// Normal approximation of the maximal secret bits over L symbols at equal
// SINRs. May be negative; callers clamp for reporting.
inline double secrecy_bits_equal_sinr(double L, double gamma_m, double gamma_e, double eps,
                                      double delta) {
  if (L < 1.0) throw UsageError("secrecy_bits_equal_sinr: L must be >= 1");
  if (gamma_m < 0.0 || gamma_e < 0.0)
    throw DomainError("secrecy_bits_equal_sinr: SINRs must be nonnegative");
  const double cs = std::log2(1.0 + gamma_m) - std::log2(1.0 + gamma_e);
  const double pen_m = kLog2E * q_inv(eps) * std::sqrt(L * dispersion(gamma_m));
  const double pen_e = kLog2E * q_inv(delta) * std::sqrt(L * dispersion(gamma_e));
  return L * cs - pen_m - pen_e;
}

// Per-user QoS targets.
struct QoSSpec {
  Eigen::VectorXd B_req;  // secure bits per frame, K
  Eigen::VectorXd eps;    // packet error probability, K
  Eigen::MatrixXd delta;  // leakage bound, J x K
  Eigen::VectorXi D;      // delay budget in slots, K

  int users() const { return static_cast<int>(B_req.size()); }
  int eves() const { return static_cast<int>(delta.rows()); }

  void validate(int K, int J, int N) const {
    if (B_req.size() != K || eps.size() != K || D.size() != K || delta.cols() != K ||
        delta.rows() != J)
      throw ConfigError("QoSSpec: dimension mismatch");
    for (int k = 0; k < K; ++k) {
      if (B_req[k] < 0.0) throw ConfigError("QoSSpec: B_req must be nonnegative");
      if (!(eps[k] > 0.0 && eps[k] < 0.5)) throw ConfigError("QoSSpec: eps must lie in (0,1/2)");
      if (D[k] < 1 || D[k] > N) throw ConfigError("QoSSpec: D must lie in [1,N]");
      for (int j = 0; j < J; ++j)
        if (!(delta(j, k) > 0.0 && delta(j, k) < 0.5))
          throw ConfigError("QoSSpec: delta must lie in (0,1/2)");
    }
  }

  // Same targets with both tail probabilities at 1/2, which zeroes every
  // dispersion penalty; used by the secrecy-capacity baseline.
  QoSSpec capacity_relaxation() const {
    QoSSpec q = *this;
    q.eps.setConstant(0.5);
    q.delta.setConstant(0.5);
    return q;
  }
};

// Exact per-slot SINRs of one candidate solution.
struct SinrProfile {
  Eigen::MatrixXd gamma_user;              // K x N
  std::vector<Eigen::MatrixXd> gamma_eve;  // J entries, each K x N

  int users() const { return static_cast<int>(gamma_user.rows()); }
  int slots() const { return static_cast<int>(gamma_user.cols()); }
  int eves() const { return static_cast<int>(gamma_eve.size()); }
};

// Total secret bits for user k over the frame; the eavesdropper bracket is
// maximized over j and vanishes when J == 0.
inline double secrecy_bits(const SinrProfile& profile, const QoSSpec& qos, int n_bar, int k) {
  const int K = profile.users();
  const int N = profile.slots();
  const int J = profile.eves();
  if (K == 0 || N == 0) throw UsageError("secrecy_bits: empty profile");
  if (qos.users() != K || qos.eves() != J) throw UsageError("secrecy_bits: QoS mismatch");
  if (k < 0 || k >= K) throw UsageError("secrecy_bits: bad user index");

  double rate = 0.0, disp = 0.0;
  for (int n = 0; n < N; ++n) {
    rate += std::log2(1.0 + profile.gamma_user(k, n));
    disp += dispersion(profile.gamma_user(k, n));
  }
  double bits = n_bar * rate - kLog2E * q_inv(qos.eps[k]) * std::sqrt(n_bar * disp);

  double worst = 0.0;
  for (int j = 0; j < J; ++j) {
    double erate = 0.0, edisp = 0.0;
    for (int n = 0; n < N; ++n) {
      erate += std::log2(1.0 + profile.gamma_eve[j](k, n));
      edisp += dispersion(profile.gamma_eve[j](k, n));
    }
    const double cj =
        n_bar * erate + kLog2E * q_inv(qos.delta(j, k)) * std::sqrt(n_bar * edisp);
    if (j == 0 || cj > worst) worst = cj;
  }
  return bits - worst;
}

// Dispersion penalty of the legitimate link evaluated at auxiliary SINRs:
// Q^-1(eps) * sqrt(n_bar * sum dispersion(a[n])).
inline double v_term(const Eigen::VectorXd& a, double eps, int n_bar) {
  double s = 0.0;
  for (int n = 0; n < a.size(); ++n) {
    if (a[n] < 0.0) throw DomainError("v_term: auxiliaries must be nonnegative");
    s += dispersion(a[n]);
  }
  return q_inv(eps) * std::sqrt(static_cast<double>(n_bar) * s);
}

inline Eigen::VectorXd grad_v_term(const Eigen::VectorXd& a, double eps, int n_bar) {
  const double qi = q_inv(eps);
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(a.size());
  if (qi == 0.0) return grad;
  double s = 0.0;
  for (int n = 0; n < a.size(); ++n) {
    if (a[n] < 0.0) throw DomainError("grad_v_term: auxiliaries must be nonnegative");
    s += dispersion(a[n]);
  }
  const double root = std::sqrt(static_cast<double>(n_bar) * s);
  if (root == 0.0)
    throw ExpansionPointError("grad_v_term: singular at all-zero auxiliaries");
  for (int n = 0; n < a.size(); ++n) {
    const double u = 1.0 + a[n];
    grad[n] = qi * static_cast<double>(n_bar) / (u * u * u) / root;
  }
  return grad;
}

// Worst-case eavesdropper capacity surrogate at auxiliary SINRs:
// n_bar * sum log2(1+b[n]) + Q^-1(delta) * sqrt(n_bar * sum dispersion(b[n])).
inline double eve_term(const Eigen::VectorXd& b, double delta, int n_bar) {
  double rate = 0.0, s = 0.0;
  for (int n = 0; n < b.size(); ++n) {
    if (b[n] < 0.0) throw DomainError("eve_term: auxiliaries must be nonnegative");
    rate += std::log2(1.0 + b[n]);
    s += dispersion(b[n]);
  }
  return n_bar * rate + q_inv(delta) * std::sqrt(static_cast<double>(n_bar) * s);
}

inline Eigen::VectorXd grad_eve_term(const Eigen::VectorXd& b, double delta, int n_bar) {
  const double qi = q_inv(delta);
  double s = 0.0;
  for (int n = 0; n < b.size(); ++n) {
    if (b[n] < 0.0) throw DomainError("grad_eve_term: auxiliaries must be nonnegative");
    s += dispersion(b[n]);
  }
  const double root = std::sqrt(static_cast<double>(n_bar) * s);
  if (qi != 0.0 && root == 0.0)
    throw ExpansionPointError("grad_eve_term: singular at all-zero auxiliaries");
  Eigen::VectorXd grad(b.size());
  for (int n = 0; n < b.size(); ++n) {
    const double u = 1.0 + b[n];
    double gn = static_cast<double>(n_bar) * kLog2E / u;
    if (qi != 0.0) gn += qi * static_cast<double>(n_bar) / (u * u * u) / root;
    grad[n] = gn;
  }
  return grad;
}

}  // namespace secbeam
