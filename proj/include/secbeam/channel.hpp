#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <vector>

#include "secbeam/errors.hpp"
#include "secbeam/rng.hpp"

namespace secbeam {

// Frame/system parameters. Powers are carried in mW throughout; channel
// vectors absorb path loss and noise power so that the per-receiver noise
// variance is exactly 1 in model units.
struct SystemConfig {
  int K = 4;    // URLLC users
  int J = 2;    // eavesdroppers
  int N_T = 8;  // BS antennas
  int N = 4;    // time slots per frame

  double W = 1e6;        // bandwidth, Hz
  double T_f = 0.25e-3;  // frame duration, s
  double r1 = 50.0;      // inner cell radius, m
  double r2 = 500.0;     // outer cell radius, m
  double noise_psd_dbm_hz = -173.0;

  // Symbols per slot. W*T_f/N need not be integral; the floor is taken and
  // never overstates the achievable bit count.
  int n_bar() const { return static_cast<int>(std::floor(W * T_f / static_cast<double>(N))); }

  bool n_bar_is_exact() const {
    const double x = W * T_f / static_cast<double>(N);
    return x == std::floor(x);
  }

  double noise_mw() const {
    return std::pow(10.0, (noise_psd_dbm_hz + 10.0 * std::log10(W)) / 10.0);
  }

  void validate() const {
    if (K < 1) throw ConfigError("SystemConfig: K must be >= 1");
    if (J < 0) throw ConfigError("SystemConfig: J must be >= 0");
    if (N_T < 1) throw ConfigError("SystemConfig: N_T must be >= 1");
    if (N < 1) throw ConfigError("SystemConfig: N must be >= 1");
    if (!(W > 0.0) || !(T_f > 0.0)) throw ConfigError("SystemConfig: W and T_f must be positive");
    if (!(r1 > 0.0 && r2 > r1)) throw ConfigError("SystemConfig: need 0 < r1 < r2");
    if (n_bar() < 1) throw ConfigError("SystemConfig: W*T_f/N must be at least one symbol");
  }
};

// One channel realization: user/eavesdropper vectors plus their Gram
// matrices, normalized so sigma2 == 1.
struct ChannelSet {
  std::vector<Eigen::VectorXcd> h;  // K channels, length N_T
  std::vector<Eigen::VectorXcd> g;  // J channels, length N_T
  std::vector<Eigen::MatrixXcd> H;  // h h^H
  std::vector<Eigen::MatrixXcd> G;  // g g^H
  std::vector<double> user_dist;    // m
  std::vector<double> eve_dist;     // m
  double sigma2 = 1.0;

  int users() const { return static_cast<int>(h.size()); }
  int eves() const { return static_cast<int>(g.size()); }
  int antennas() const { return h.empty() ? 0 : static_cast<int>(h.front().size()); }

  // Restriction to the first j eavesdroppers. Entity substreams make the
  // retained channels identical to a scenario generated with smaller J.
  ChannelSet truncated_eves(int j) const {
    if (j < 0 || j > eves()) throw UsageError("truncated_eves: bad count");
    ChannelSet out = *this;
    out.g.resize(j);
    out.G.resize(j);
    out.eve_dist.resize(j);
    return out;
  }
};

// Lifted candidate: one Hermitian PSD matrix per user per slot plus the AN
// covariance per slot. Beamformers are filled in by rank recovery.
struct CandidateSolution {
  std::vector<std::vector<Eigen::MatrixXcd>> W;  // [k][n]
  std::vector<Eigen::MatrixXcd> V;               // [n]
  std::vector<std::vector<Eigen::VectorXcd>> w;  // [k][n], empty until recovered

  double total_power_mw() const {
    double p = 0.0;
    for (const auto& wk : W)
      for (const auto& m : wk) p += m.real().trace();
    for (const auto& m : V) p += m.real().trace();
    return p;
  }
};

inline double path_loss_db(double d) { return 35.3 + 37.6 * std::log10(d); }

// Amplitude scaling applied to the unit-variance fading vector: channel
// gain over noise power, both linear.
inline double channel_amplitude(const SystemConfig& cfg, double d) {
  const double gain = std::pow(10.0, -path_loss_db(d) / 10.0);
  return std::sqrt(gain / cfg.noise_mw());
}

namespace detail {

constexpr std::uint64_t kSaltUser = 0x75736572ULL;  // stream tags
constexpr std::uint64_t kSaltEve = 0x65766573ULL;

inline Eigen::VectorXcd draw_entity_channel(const SystemConfig& cfg, std::uint64_t seed,
                                            std::uint64_t salt, int index, double* dist_out) {
  Rng rng(derive_seed(seed, salt, static_cast<std::uint64_t>(index)));
  // Uniform in area over the annulus [r1, r2].
  const double u = rng.uniform();
  const double d = std::sqrt(cfg.r1 * cfg.r1 + u * (cfg.r2 * cfg.r2 - cfg.r1 * cfg.r1));
  const double amp = channel_amplitude(cfg, d);
  Eigen::VectorXcd v(cfg.N_T);
  const double inv_sqrt2 = 1.0 / std::numbers::sqrt2;
  for (int i = 0; i < cfg.N_T; ++i) {
    const double re = rng.gaussian();
    const double im = rng.gaussian();
    v[i] = std::complex<double>(amp * inv_sqrt2 * re, amp * inv_sqrt2 * im);
  }
  if (dist_out) *dist_out = d;
  return v;
}

}  // namespace detail

inline ChannelSet make_channel_set(std::vector<Eigen::VectorXcd> h,
                                   std::vector<Eigen::VectorXcd> g) {
  ChannelSet ch;
  ch.h = std::move(h);
  ch.g = std::move(g);
  ch.H.reserve(ch.h.size());
  ch.G.reserve(ch.g.size());
  for (const auto& v : ch.h) ch.H.push_back(v * v.adjoint());
  for (const auto& v : ch.g) ch.G.push_back(v * v.adjoint());
  ch.user_dist.assign(ch.h.size(), 0.0);
  ch.eve_dist.assign(ch.g.size(), 0.0);
  ch.sigma2 = 1.0;
  return ch;
}

inline ChannelSet generate_scenario(const SystemConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  ChannelSet ch;
  ch.h.resize(cfg.K);
  ch.g.resize(cfg.J);
  ch.user_dist.resize(cfg.K);
  ch.eve_dist.resize(cfg.J);
  for (int k = 0; k < cfg.K; ++k)
    ch.h[k] = detail::draw_entity_channel(cfg, seed, detail::kSaltUser, k, &ch.user_dist[k]);
  for (int j = 0; j < cfg.J; ++j)
    ch.g[j] = detail::draw_entity_channel(cfg, seed, detail::kSaltEve, j, &ch.eve_dist[j]);
  ch.H.reserve(cfg.K);
  ch.G.reserve(cfg.J);
  for (const auto& v : ch.h) ch.H.push_back(v * v.adjoint());
  for (const auto& v : ch.g) ch.G.push_back(v * v.adjoint());
  ch.sigma2 = 1.0;
  return ch;
}

inline double trace_re(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  return (a.cwiseProduct(b.transpose())).sum().real();
}

namespace detail {

inline void check_solution_dims(const CandidateSolution& sol, const ChannelSet& ch) {
  if (sol.W.size() != static_cast<std::size_t>(ch.users()))
    throw UsageError("solution/channel user count mismatch");
  const int nt = ch.antennas();
  for (const auto& wk : sol.W)
    for (const auto& m : wk)
      if (m.rows() != nt || m.cols() != nt) throw UsageError("W block dimension mismatch");
  for (const auto& m : sol.V)
    if (m.rows() != nt || m.cols() != nt) throw UsageError("V block dimension mismatch");
}

}  // namespace detail

// Exact lifted SINR of user k in slot n.
inline double sinr_user(int k, int n, const CandidateSolution& sol, const ChannelSet& ch) {
  detail::check_solution_dims(sol, ch);
  if (k < 0 || k >= ch.users()) throw UsageError("sinr_user: bad user index");
  if (n < 0 || n >= static_cast<int>(sol.V.size())) throw UsageError("sinr_user: bad slot index");
  const Eigen::MatrixXcd& Hk = ch.H[k];
  const double num = trace_re(Hk, sol.W[k][n]);
  double den = ch.sigma2;
  for (int l = 0; l < ch.users(); ++l)
    if (l != k) den += trace_re(Hk, sol.W[l][n]);
  den += trace_re(Hk, sol.V[n]);
  return num / den;
}

// Exact lifted SINR of user k's signal at eavesdropper j in slot n.
inline double sinr_eve(int j, int k, int n, const CandidateSolution& sol, const ChannelSet& ch) {
  detail::check_solution_dims(sol, ch);
  if (j < 0 || j >= ch.eves()) throw UsageError("sinr_eve: bad eavesdropper index");
  if (k < 0 || k >= ch.users()) throw UsageError("sinr_eve: bad user index");
  if (n < 0 || n >= static_cast<int>(sol.V.size())) throw UsageError("sinr_eve: bad slot index");
  const Eigen::MatrixXcd& Gj = ch.G[j];
  const double num = trace_re(Gj, sol.W[k][n]);
  double den = ch.sigma2;
  for (int l = 0; l < ch.users(); ++l)
    if (l != k) den += trace_re(Gj, sol.W[l][n]);
  den += trace_re(Gj, sol.V[n]);
  return num / den;
}

}  // namespace secbeam
