#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "secbeam/channel.hpp"

using namespace secbeam;

namespace {

SystemConfig paper_config() {
  SystemConfig cfg;
  cfg.K = 4;
  cfg.J = 2;
  cfg.N_T = 8;
  cfg.N = 4;
  return cfg;
}

Eigen::MatrixXcd random_hermitian(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> g;
  Eigen::MatrixXcd a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = std::complex<double>(g(rng), g(rng));
  return 0.5 * (a + a.adjoint());
}

}  // namespace

TEST_CASE("config validation and derived symbol count") {
  SystemConfig cfg = paper_config();
  cfg.validate();
  // 1 MHz * 0.25 ms / 4 slots = 62.5 -> floor
  CHECK(cfg.n_bar() == 62);
  CHECK_FALSE(cfg.n_bar_is_exact());
  CHECK(cfg.noise_mw() == Catch::Approx(std::pow(10.0, -11.3)).epsilon(1e-12));

  SystemConfig bad = cfg;
  bad.K = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.r2 = 10.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.N = 4000000;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("unit path loss with all-ones fading gives |h|^2 = N_T / noise") {
  SystemConfig cfg = paper_config();
  // distance at which the path loss is exactly 0 dB
  const double d0 = std::pow(10.0, -35.3 / 37.6);
  const double amp = channel_amplitude(cfg, d0);
  const Eigen::VectorXcd ones = amp * Eigen::VectorXcd::Ones(cfg.N_T);
  CHECK(ones.squaredNorm() ==
        Catch::Approx(cfg.N_T / cfg.noise_mw()).epsilon(1e-12));
}

TEST_CASE("same config and seed produce a bitwise-identical scenario") {
  SystemConfig cfg = paper_config();
  const ChannelSet a = generate_scenario(cfg, 123456789ULL);
  const ChannelSet b = generate_scenario(cfg, 123456789ULL);
  REQUIRE(a.users() == b.users());
  for (int k = 0; k < a.users(); ++k) CHECK(a.h[k] == b.h[k]);
  for (int j = 0; j < a.eves(); ++j) CHECK(a.g[j] == b.g[j]);
  const ChannelSet c = generate_scenario(cfg, 987654321ULL);
  CHECK(a.h[0] != c.h[0]);
}

TEST_CASE("eavesdropper truncation matches a scenario generated with smaller J") {
  SystemConfig big = paper_config();
  big.J = 9;
  SystemConfig small = paper_config();
  small.J = 2;
  const ChannelSet cb = generate_scenario(big, 42).truncated_eves(2);
  const ChannelSet cs = generate_scenario(small, 42);
  REQUIRE(cb.eves() == 2);
  for (int j = 0; j < 2; ++j) CHECK(cb.g[j] == cs.g[j]);
  for (int k = 0; k < 4; ++k) CHECK(cb.h[k] == cs.h[k]);
}

TEST_CASE("scenario dimensions and mean channel energy match the closed form") {
  SystemConfig cfg = paper_config();
  const int trials = 100000;
  double acc = 0.0;
  long samples = 0;
  for (int t = 0; t < trials; ++t) {
    const ChannelSet ch = generate_scenario(cfg, 1000 + t);
    if (t == 0) {
      REQUIRE(ch.users() == 4);
      REQUIRE(ch.eves() == 2);
      for (const auto& v : ch.h) CHECK(v.size() == 8);
      for (const auto& v : ch.g) CHECK(v.size() == 8);
      CHECK(ch.sigma2 == 1.0);
    }
    for (const auto& v : ch.h) {
      acc += v.squaredNorm();
      samples += v.size();
    }
  }
  const double empirical = acc / static_cast<double>(samples);
  // closed-form E[gain]: uniform-in-area annulus, 10^(-3.53) * d^-3.76
  const double c0 = std::pow(10.0, -3.53);
  const double r1 = cfg.r1, r2 = cfg.r2;
  const double expect_gain = 2.0 * c0 / (r2 * r2 - r1 * r1) *
                             (std::pow(r1, -1.76) - std::pow(r2, -1.76)) / 1.76;
  const double expect = expect_gain / cfg.noise_mw();
  CHECK(empirical == Catch::Approx(expect).epsilon(0.02));
}

TEST_CASE("gram identity Tr(H M) = h^H M h on random hermitian M") {
  SystemConfig cfg = paper_config();
  const ChannelSet ch = generate_scenario(cfg, 7);
  std::mt19937_64 rng(99);
  for (int i = 0; i < 1000; ++i) {
    const Eigen::MatrixXcd m = random_hermitian(rng, cfg.N_T);
    const int k = static_cast<int>(rng() % cfg.K);
    const double lhs = trace_re(ch.H[k], m);
    const double rhs = (ch.h[k].adjoint() * m * ch.h[k]).value().real();
    const double scale = std::max(1.0, std::abs(rhs));
    CHECK(std::abs(lhs - rhs) / scale <= 1e-10);
  }
  // gram matrices are hermitian, PSD, rank <= 1
  for (const auto& H : ch.H) {
    CHECK((H - H.adjoint()).norm() <= 1e-12 * std::max(1.0, H.norm()));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(H);
    const auto& ev = es.eigenvalues();
    CHECK(ev.minCoeff() >= -1e-10 * std::max(1.0, ev.maxCoeff()));
    // all but the top eigenvalue vanish
    for (int i = 0; i + 1 < ev.size(); ++i) CHECK(std::abs(ev[i]) <= 1e-10 * ev.maxCoeff());
  }
}

TEST_CASE("sinr_user: zero, scalar reduction, lifted/vector cross-check") {
  // zero solution
  SystemConfig cfg;
  cfg.K = 1;
  cfg.J = 0;
  cfg.N_T = 1;
  cfg.N = 1;
  ChannelSet ch = make_channel_set({Eigen::VectorXcd::Ones(1)}, {});
  CandidateSolution sol;
  sol.W = {{Eigen::MatrixXcd::Zero(1, 1)}};
  sol.V = {Eigen::MatrixXcd::Zero(1, 1)};
  CHECK(sinr_user(0, 0, sol, ch) == 0.0);

  // scalar reduction p / (v + 1)
  sol.W[0][0](0, 0) = 3.4;
  sol.V[0](0, 0) = 1.2;
  CHECK(sinr_user(0, 0, sol, ch) == Catch::Approx(3.4 / 2.2).epsilon(1e-14));

  // lifted trace form equals the explicit vector form when W = w w^H
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  const int nt = 2;
  Eigen::VectorXcd h1(nt), h2(nt), w1(nt), w2(nt);
  for (int i = 0; i < nt; ++i) {
    h1[i] = {g(rng), g(rng)};
    h2[i] = {g(rng), g(rng)};
    w1[i] = {g(rng), g(rng)};
    w2[i] = {g(rng), g(rng)};
  }
  ChannelSet ch2 = make_channel_set({h1, h2}, {});
  Eigen::MatrixXcd vcov = Eigen::MatrixXcd::Identity(nt, nt) * 0.3;
  CandidateSolution sol2;
  sol2.W = {{w1 * w1.adjoint()}, {w2 * w2.adjoint()}};
  sol2.V = {vcov};
  const double lifted = sinr_user(0, 0, sol2, ch2);
  const double num = std::norm((h1.adjoint() * w1).value());
  const double den = std::norm((h1.adjoint() * w2).value()) +
                     (h1.adjoint() * vcov * h1).value().real() + 1.0;
  CHECK(lifted == Catch::Approx(num / den).epsilon(1e-12));

  CHECK_THROWS_AS(sinr_user(5, 0, sol2, ch2), UsageError);
}

TEST_CASE("sinr_eve: zero case, AN dominance, vector cross-check") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  const int nt = 3;
  Eigen::VectorXcd h(nt), ge(nt), w(nt);
  for (int i = 0; i < nt; ++i) {
    h[i] = {g(rng), g(rng)};
    ge[i] = {g(rng), g(rng)};
    w[i] = {g(rng), g(rng)};
  }
  ChannelSet ch = make_channel_set({h}, {ge});
  CandidateSolution zero;
  zero.W = {{Eigen::MatrixXcd::Zero(nt, nt)}};
  zero.V = {Eigen::MatrixXcd::Zero(nt, nt)};
  CHECK(sinr_eve(0, 0, 0, zero, ch) == 0.0);

  CandidateSolution sol;
  sol.W = {{w * w.adjoint()}};
  sol.V = {Eigen::MatrixXcd::Identity(nt, nt) * 0.5};
  const double lifted = sinr_eve(0, 0, 0, sol, ch);
  const double num = std::norm((ge.adjoint() * w).value());
  const double den = (ge.adjoint() * sol.V[0] * ge).value().real() + 1.0;
  CHECK(lifted == Catch::Approx(num / den).epsilon(1e-12));

  // eavesdropper SINR decreases monotonically as AN power grows
  double prev = lifted;
  for (double scale : {2.0, 8.0, 64.0, 1024.0}) {
    CandidateSolution s2 = sol;
    s2.V[0] *= scale;
    const double v = sinr_eve(0, 0, 0, s2, ch);
    CHECK(v < prev);
    prev = v;
  }
  CHECK(prev < 1e-2 * lifted);
}

TEST_CASE("sinr scale consistency and monotonicity") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> g;
  const int nt = 3, K = 2;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Eigen::VectorXcd> hs(K), gs(1);
    for (auto& v : hs) {
      v.resize(nt);
      for (int i = 0; i < nt; ++i) v[i] = {g(rng), g(rng)};
    }
    gs[0].resize(nt);
    for (int i = 0; i < nt; ++i) gs[0][i] = {g(rng), g(rng)};
    ChannelSet ch = make_channel_set(hs, gs);
    CandidateSolution sol;
    sol.W.resize(K);
    for (int k = 0; k < K; ++k) {
      Eigen::VectorXcd w(nt);
      for (int i = 0; i < nt; ++i) w[i] = {g(rng), g(rng)};
      sol.W[k] = {w * w.adjoint()};
    }
    Eigen::MatrixXcd a = Eigen::MatrixXcd::Random(nt, nt);
    sol.V = {a * a.adjoint()};

    const double s0 = sinr_user(0, 0, sol, ch);
    const double e0 = sinr_eve(0, 0, 0, sol, ch);
    // scaling all powers and the noise term together leaves SINRs unchanged:
    // equivalently scale powers by c and sigma2 by c
    const double c = 3.7;
    CandidateSolution scaled = sol;
    for (auto& wk : scaled.W) wk[0] *= c;
    scaled.V[0] *= c;
    ChannelSet ch_scaled = ch;
    ch_scaled.sigma2 = c;
    CHECK(sinr_user(0, 0, scaled, ch_scaled) == Catch::Approx(s0).epsilon(1e-12));
    CHECK(sinr_eve(0, 0, 0, scaled, ch_scaled) == Catch::Approx(e0).epsilon(1e-12));

    // nondecreasing in own signal, nonincreasing in AN
    CandidateSolution more = sol;
    more.W[0][0] *= 1.5;
    CHECK(sinr_user(0, 0, more, ch) >= s0 - 1e-12);
    CandidateSolution noisier = sol;
    noisier.V[0] += Eigen::MatrixXcd::Identity(nt, nt);
    CHECK(sinr_user(0, 0, noisier, ch) <= s0 + 1e-12);
  }
}
