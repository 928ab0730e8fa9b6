#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "secbeam/conic/program.hpp"

namespace secbeam::conic {

enum class SolveStatus { Optimal, Infeasible, Unbounded, NumericalFailure, IterationLimit };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::Unbounded: return "unbounded";
    case SolveStatus::NumericalFailure: return "numerical-failure";
    case SolveStatus::IterationLimit: return "iteration-limit";
  }
  return "?";
}

struct SolverResult {
  SolveStatus status = SolveStatus::NumericalFailure;
  std::vector<double> scalars;          // per declared scalar variable
  std::vector<Eigen::MatrixXd> blocks;  // per declared PSD block variable
  std::vector<double> row_duals;        // per declared linear row (0 for presolved rows)
  double primal_obj = 0.0;
  double dual_obj = 0.0;
  double primal_residual = std::numeric_limits<double>::infinity();
  double dual_residual = std::numeric_limits<double>::infinity();
  double gap = std::numeric_limits<double>::infinity();
  int iterations = 0;
  int cut_rounds = 0;
  double wall_time_ms = 0.0;
  // For Infeasible the dual ray lives in row_duals; for Unbounded the primal
  // ray lives in scalars/blocks.
  bool has_certificate = false;
  std::string message;
};

namespace detail {

struct CanonExpr {
  std::vector<std::pair<int, double>> lin;           // (lp column, coeff)
  std::vector<std::pair<int, Eigen::MatrixXd>> mats; // (canonical block, sym coeff)
  double constant = 0.0;
};

struct ScalarLoc {
  enum Kind { Lp, LpSplit, BlockEntry } kind = Lp;
  int slot = -1, slot_neg = -1;
  int block = -1, ei = -1, ej = -1;
  double scale = 1.0;
};

struct CanonLog {
  CanonExpr t, x;
  double weight = 1.0;
  std::vector<double> tangents;
};

struct Canonical {
  int lp_dim = 0;
  std::vector<int> dims;  // PSD block dimensions
  Eigen::VectorXd c_lp;
  std::vector<Eigen::MatrixXd> C_blk;
  double obj_const = 0.0;

  std::vector<double> b;
  std::vector<std::vector<std::pair<int, double>>> lp_cols;        // per lp column
  std::vector<std::vector<std::pair<int, Eigen::MatrixXd>>> blk_rows;  // per block

  std::vector<ScalarLoc> scalar_loc;
  std::vector<int> user_block_loc;  // -1 when presolved to zero
  std::vector<int> user_row_loc;    // -1 when dropped by presolve
  std::vector<CanonLog> logs;

  bool trivially_infeasible = false;
  int infeasible_user_row = -1;

  int rows() const { return static_cast<int>(b.size()); }

  int add_lp_col() {
    lp_cols.emplace_back();
    return lp_dim++;
  }

  // Schur assembly assumes each (row, column) and (row, block) pair appears
  // once, so duplicates are coalesced here.
  int add_row(CanonExpr e, double rhs, bool eq) {
    const int r = rows();
    b.push_back(rhs - e.constant);
    std::sort(e.lin.begin(), e.lin.end(),
              [](const auto& a, const auto& b2) { return a.first < b2.first; });
    for (std::size_t i = 0; i < e.lin.size();) {
      double coeff = e.lin[i].second;
      std::size_t j = i + 1;
      while (j < e.lin.size() && e.lin[j].first == e.lin[i].first) coeff += e.lin[j++].second;
      if (coeff != 0.0) lp_cols[e.lin[i].first].push_back({r, coeff});
      i = j;
    }
    std::vector<std::pair<int, Eigen::MatrixXd>> merged;
    for (auto& [blk, m] : e.mats) {
      bool found = false;
      for (auto& [b2, m2] : merged)
        if (b2 == blk) {
          m2 += m;
          found = true;
          break;
        }
      if (!found) merged.push_back({blk, std::move(m)});
    }
    for (auto& [blk, m] : merged) blk_rows[blk].push_back({r, std::move(m)});
    if (!eq) {
      const int s = add_lp_col();
      lp_cols[s].push_back({r, 1.0});
    }
    return r;
  }
};

inline Eigen::MatrixXd entry_matrix(int dim, int i, int j) {
  Eigen::MatrixXd e = Eigen::MatrixXd::Zero(dim, dim);
  if (i == j)
    e(i, i) = 1.0;
  else {
    e(i, j) = 0.5;
    e(j, i) = 0.5;
  }
  return e;
}

// Rewrites a user expression into canonical columns/blocks, dropping terms
// on blocks that presolve pinned to zero.
inline CanonExpr rewrite(const Canonical& c, const Expr& e) {
  CanonExpr out;
  out.constant = e.constant;
  for (const auto& t : e.terms) {
    const ScalarLoc& loc = c.scalar_loc[t.var];
    switch (loc.kind) {
      case ScalarLoc::Lp:
        out.lin.push_back({loc.slot, t.coeff});
        break;
      case ScalarLoc::LpSplit:
        out.lin.push_back({loc.slot, t.coeff});
        out.lin.push_back({loc.slot_neg, -t.coeff});
        break;
      case ScalarLoc::BlockEntry: {
        const int d = static_cast<int>(c.dims[loc.block]);
        out.mats.push_back({loc.block, t.coeff * loc.scale * entry_matrix(d, loc.ei, loc.ej)});
        break;
      }
    }
  }
  for (const auto& t : e.mat_terms) {
    const int blk = c.user_block_loc[t.block];
    if (blk < 0) continue;  // pinned to zero
    Eigen::MatrixXd m = 0.5 * (t.coeff + t.coeff.transpose());
    out.mats.push_back({blk, std::move(m)});
  }
  // merge duplicate block terms to keep row data compact
  if (out.mats.size() > 1) {
    std::vector<std::pair<int, Eigen::MatrixXd>> merged;
    for (auto& [blk, m] : out.mats) {
      bool found = false;
      for (auto& [b2, m2] : merged)
        if (b2 == blk) {
          m2 += m;
          found = true;
          break;
        }
      if (!found) merged.push_back({blk, std::move(m)});
    }
    out.mats = std::move(merged);
  }
  return out;
}

struct ConeEntryRef {
  // location of one cone entry within its auxiliary block
  int cone_block;  // canonical block index
  int i, j;
  const Expr* expr;
};

inline bool is_definite(const Eigen::MatrixXd& m) {
  if (m.rows() == 0) return false;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  const double scale = std::max(std::abs(lo), std::abs(hi));
  if (scale == 0.0) return false;
  return lo > 1e-9 * scale || hi < -1e-9 * scale;
}

inline Canonical canonicalize(const ConicProgram& p) {
  Canonical c;
  const int n_scalar = static_cast<int>(p.scalar_vars().size());
  const int n_block = static_cast<int>(p.block_vars().size());

  // Presolve: an equality <M, X> = 0 with definite M and no other terms
  // forces the PSD block X to zero. Eliminating such blocks keeps the
  // remaining problem strictly feasible for the interior-point method.
  std::vector<bool> pinned(n_block, false);
  std::vector<bool> row_is_pin(p.rows().size(), false);
  for (std::size_t r = 0; r < p.rows().size(); ++r) {
    const auto& row = p.rows()[r];
    if (row.sense != RowSense::Eq || row.rhs - row.expr.constant != 0.0) continue;
    if (!row.expr.terms.empty() || row.expr.mat_terms.size() != 1) continue;
    const auto& mt = row.expr.mat_terms.front();
    if (mt.block < 0 || mt.block >= n_block) continue;
    if (is_definite(0.5 * (mt.coeff + mt.coeff.transpose()))) {
      pinned[mt.block] = true;
      row_is_pin[r] = true;
    }
  }

  c.user_block_loc.assign(n_block, -1);
  for (int bidx = 0; bidx < n_block; ++bidx) {
    if (pinned[bidx]) continue;
    c.user_block_loc[bidx] = static_cast<int>(c.dims.size());
    c.dims.push_back(p.block_vars()[bidx].dim);
  }

  // Substitution of lone-variable cone entries: when a scalar variable is
  // exactly one cone entry (and nowhere else among cone entries), the
  // variable can live directly inside the auxiliary cone block, saving a tie
  // row. Nonnegative variables may only be folded onto diagonal entries with
  // positive coefficient, which preserves the sign constraint through PSD-ness.
  struct PendingCone {
    int dim;
    std::vector<std::pair<std::pair<int, int>, const Expr*>> entries;  // ((i,j), expr)
    std::vector<std::pair<int, int>> zero_entries;
  };
  std::vector<PendingCone> cones;
  std::vector<Expr> owned_exprs;  // scaled copies for soc/rsoc off-diagonals
  owned_exprs.reserve(256);

  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  for (const auto& cone : p.rsocs()) {
    PendingCone pc;
    const int pdim = static_cast<int>(cone.w.size());
    pc.dim = pdim + 1;
    pc.entries.push_back({{0, 0}, &cone.u});
    for (int i = 0; i < pdim; ++i) {
      Expr scaled = cone.w[i];
      for (auto& t : scaled.terms) t.coeff *= inv_sqrt2;
      for (auto& t : scaled.mat_terms) t.coeff *= inv_sqrt2;
      scaled.constant *= inv_sqrt2;
      owned_exprs.push_back(std::move(scaled));
      pc.entries.push_back({{0, i + 1}, &owned_exprs.back()});
    }
    for (int i = 1; i <= pdim; ++i) pc.entries.push_back({{i, i}, &cone.v});
    for (int i = 1; i <= pdim; ++i)
      for (int j = i + 1; j <= pdim; ++j) pc.zero_entries.push_back({i, j});
    cones.push_back(std::move(pc));
  }
  for (const auto& cone : p.socs()) {
    PendingCone pc;
    const int pdim = static_cast<int>(cone.y.size());
    pc.dim = pdim + 1;
    pc.entries.push_back({{0, 0}, &cone.t});
    for (int i = 0; i < pdim; ++i) pc.entries.push_back({{0, i + 1}, &cone.y[i]});
    for (int i = 1; i <= pdim; ++i) pc.entries.push_back({{i, i}, &cone.t});
    for (int i = 1; i <= pdim; ++i)
      for (int j = i + 1; j <= pdim; ++j) pc.zero_entries.push_back({i, j});
    cones.push_back(std::move(pc));
  }
  for (const auto& cone : p.psds()) {
    PendingCone pc;
    pc.dim = cone.dim;
    int idx = 0;
    for (int i = 0; i < cone.dim; ++i)
      for (int j = i; j < cone.dim; ++j) pc.entries.push_back({{i, j}, &cone.entries[idx++]});
    cones.push_back(std::move(pc));
  }

  // count occurrences of each scalar var across cone entries
  std::vector<int> cone_occurrences(n_scalar, 0);
  for (const auto& pc : cones)
    for (const auto& [ij, e] : pc.entries)
      for (const auto& t : e->terms)
        if (t.var >= 0 && t.var < n_scalar) ++cone_occurrences[t.var];

  c.scalar_loc.assign(n_scalar, {});
  std::vector<bool> substituted(n_scalar, false);

  std::vector<int> cone_block_of(cones.size());
  for (std::size_t ci = 0; ci < cones.size(); ++ci) {
    cone_block_of[ci] = static_cast<int>(c.dims.size());
    c.dims.push_back(cones[ci].dim);
  }

  std::vector<std::vector<bool>> entry_substituted(cones.size());
  for (std::size_t ci = 0; ci < cones.size(); ++ci) {
    entry_substituted[ci].assign(cones[ci].entries.size(), false);
    for (std::size_t ei = 0; ei < cones[ci].entries.size(); ++ei) {
      const auto& [ij, e] = cones[ci].entries[ei];
      if (e->terms.size() != 1 || !e->mat_terms.empty() || e->constant != 0.0) continue;
      const auto& t = e->terms.front();
      if (t.var < 0 || t.var >= n_scalar || t.coeff == 0.0) continue;
      if (cone_occurrences[t.var] != 1 || substituted[t.var]) continue;
      const bool diag = ij.first == ij.second;
      const bool nonneg = p.scalar_vars()[t.var].kind == VarKind::Nonneg;
      if (nonneg && !(diag && t.coeff > 0.0)) continue;
      ScalarLoc loc;
      loc.kind = ScalarLoc::BlockEntry;
      loc.block = cone_block_of[ci];
      loc.ei = ij.first;
      loc.ej = ij.second;
      loc.scale = 1.0 / t.coeff;
      c.scalar_loc[t.var] = loc;
      substituted[t.var] = true;
      entry_substituted[ci][ei] = true;
    }
  }

  // remaining scalar variables become LP columns
  c.blk_rows.resize(c.dims.size());
  for (int v = 0; v < n_scalar; ++v) {
    if (substituted[v]) continue;
    ScalarLoc loc;
    if (p.scalar_vars()[v].kind == VarKind::Nonneg) {
      loc.kind = ScalarLoc::Lp;
      loc.slot = c.add_lp_col();
    } else {
      loc.kind = ScalarLoc::LpSplit;
      loc.slot = c.add_lp_col();
      loc.slot_neg = c.add_lp_col();
    }
    c.scalar_loc[v] = loc;
  }

  // user rows
  c.user_row_loc.assign(p.rows().size(), -1);
  for (std::size_t r = 0; r < p.rows().size(); ++r) {
    if (row_is_pin[r]) continue;
    const auto& row = p.rows()[r];
    CanonExpr e = rewrite(c, row.expr);
    if (e.lin.empty() && e.mats.empty()) {
      const double resid = row.rhs - e.constant;
      const bool ok = row.sense == RowSense::Eq ? std::abs(resid) <= 1e-12 : resid >= -1e-12;
      if (!ok) {
        c.trivially_infeasible = true;
        c.infeasible_user_row = static_cast<int>(r);
      }
      continue;
    }
    c.user_row_loc[r] = c.add_row(e, row.rhs, row.sense == RowSense::Eq);
  }

  // cone entry ties
  for (std::size_t ci = 0; ci < cones.size(); ++ci) {
    const int blk = cone_block_of[ci];
    const int d = cones[ci].dim;
    for (std::size_t ei = 0; ei < cones[ci].entries.size(); ++ei) {
      if (entry_substituted[ci][ei]) continue;
      const auto& [ij, expr] = cones[ci].entries[ei];
      CanonExpr e = rewrite(c, *expr);
      for (auto& [col, coeff] : e.lin) coeff = -coeff;
      for (auto& [b2, m] : e.mats) m = -m;
      const double cst = e.constant;
      e.constant = 0.0;
      e.mats.push_back({blk, entry_matrix(d, ij.first, ij.second)});
      c.add_row(e, cst, true);
    }
    for (const auto& ij : cones[ci].zero_entries) {
      CanonExpr e;
      e.mats.push_back({blk, entry_matrix(d, ij.first, ij.second)});
      c.add_row(e, 0.0, true);
    }
  }

  // objective
  c.c_lp = Eigen::VectorXd::Zero(c.lp_dim);
  c.C_blk.assign(c.dims.size(), Eigen::MatrixXd());
  for (std::size_t bidx = 0; bidx < c.dims.size(); ++bidx)
    c.C_blk[bidx] = Eigen::MatrixXd::Zero(c.dims[bidx], c.dims[bidx]);
  {
    CanonExpr e = rewrite(c, p.objective());
    c.obj_const = e.constant;
    for (const auto& [col, coeff] : e.lin) c.c_lp[col] += coeff;
    for (const auto& [blk, m] : e.mats) c.C_blk[blk] += m;
  }

  // resize lp column list (slack columns appended during add_row already exist)
  // carry log hypographs
  for (const auto& l : p.log_hypographs()) {
    CanonLog cl;
    cl.t = rewrite(c, l.t);
    cl.x = rewrite(c, var_expr(l.x));
    cl.weight = l.weight;
    cl.tangents = l.hints;
    cl.tangents.push_back(0.0);
    c.logs.push_back(std::move(cl));
  }
  return c;
}

// ---------------------------------------------------------------------------
// Interior-point core on the homogeneous self-dual embedding.
// Cone variables: LP orthant of dimension lp_dim plus dense PSD blocks.
// ---------------------------------------------------------------------------

struct ConeVec {
  Eigen::VectorXd lp;
  std::vector<Eigen::MatrixXd> blk;

  static ConeVec zeros(const Canonical& c) {
    ConeVec v;
    v.lp = Eigen::VectorXd::Zero(c.lp_dim);
    v.blk.reserve(c.dims.size());
    for (int d : c.dims) v.blk.push_back(Eigen::MatrixXd::Zero(d, d));
    return v;
  }
  static ConeVec identity(const Canonical& c) {
    ConeVec v;
    v.lp = Eigen::VectorXd::Ones(c.lp_dim);
    v.blk.reserve(c.dims.size());
    for (int d : c.dims) v.blk.push_back(Eigen::MatrixXd::Identity(d, d));
    return v;
  }
};

inline double dot(const ConeVec& a, const ConeVec& b) {
  double s = a.lp.size() ? a.lp.dot(b.lp) : 0.0;
  for (std::size_t i = 0; i < a.blk.size(); ++i)
    s += a.blk[i].cwiseProduct(b.blk[i]).sum();
  return s;
}

inline double norm(const ConeVec& a) { return std::sqrt(std::max(0.0, dot(a, a))); }

inline void axpy(double alpha, const ConeVec& x, ConeVec& y) {
  y.lp += alpha * x.lp;
  for (std::size_t i = 0; i < x.blk.size(); ++i) y.blk[i] += alpha * x.blk[i];
}

inline ConeVec scaled(const ConeVec& x, double alpha) {
  ConeVec y = x;
  y.lp *= alpha;
  for (auto& m : y.blk) m *= alpha;
  return y;
}

inline Eigen::VectorXd a_mul(const Canonical& c, const ConeVec& x) {
  Eigen::VectorXd r = Eigen::VectorXd::Zero(c.rows());
  for (int col = 0; col < c.lp_dim; ++col) {
    const double xv = x.lp[col];
    if (xv == 0.0) continue;
    for (const auto& [row, coeff] : c.lp_cols[col]) r[row] += coeff * xv;
  }
  for (std::size_t bidx = 0; bidx < c.dims.size(); ++bidx)
    for (const auto& [row, m] : c.blk_rows[bidx])
      r[row] += m.cwiseProduct(x.blk[bidx]).sum();
  return r;
}

inline ConeVec at_mul(const Canonical& c, const Eigen::VectorXd& y) {
  ConeVec r = ConeVec::zeros(c);
  for (int col = 0; col < c.lp_dim; ++col) {
    double s = 0.0;
    for (const auto& [row, coeff] : c.lp_cols[col]) s += coeff * y[row];
    r.lp[col] = s;
  }
  for (std::size_t bidx = 0; bidx < c.dims.size(); ++bidx)
    for (const auto& [row, m] : c.blk_rows[bidx]) r.blk[bidx] += y[row] * m;
  return r;
}

struct Scaling {
  Eigen::VectorXd w_lp, lam_lp;
  std::vector<Eigen::MatrixXd> R, Rinv, T, Tinv;
  std::vector<Eigen::VectorXd> lam_blk;
  bool ok = true;
};

inline Scaling compute_scaling(const Canonical& c, const ConeVec& x, const ConeVec& z) {
  Scaling s;
  s.w_lp.resize(c.lp_dim);
  s.lam_lp.resize(c.lp_dim);
  for (int i = 0; i < c.lp_dim; ++i) {
    if (!(x.lp[i] > 0.0 && z.lp[i] > 0.0)) {
      s.ok = false;
      return s;
    }
    s.w_lp[i] = std::sqrt(x.lp[i] / z.lp[i]);
    s.lam_lp[i] = std::sqrt(x.lp[i] * z.lp[i]);
  }
  const std::size_t nb = c.dims.size();
  s.R.resize(nb);
  s.Rinv.resize(nb);
  s.T.resize(nb);
  s.Tinv.resize(nb);
  s.lam_blk.resize(nb);
  for (std::size_t bi = 0; bi < nb; ++bi) {
    Eigen::LLT<Eigen::MatrixXd> lx(x.blk[bi]);
    Eigen::LLT<Eigen::MatrixXd> lz(z.blk[bi]);
    if (lx.info() != Eigen::Success || lz.info() != Eigen::Success) {
      s.ok = false;
      return s;
    }
    const Eigen::MatrixXd Lx = lx.matrixL();
    const Eigen::MatrixXd Lz = lz.matrixL();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(Lz.transpose() * Lx,
                                          Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Eigen::VectorXd sig = svd.singularValues();
    if (sig.minCoeff() <= 0.0) {
      s.ok = false;
      return s;
    }
    const Eigen::VectorXd sig_isqrt = sig.array().sqrt().inverse().matrix();
    s.R[bi] = Lx * svd.matrixV() * sig_isqrt.asDiagonal();
    s.Rinv[bi] = sig_isqrt.asDiagonal() * svd.matrixU().transpose() * Lz.transpose();
    s.T[bi] = s.R[bi] * s.R[bi].transpose();
    s.Tinv[bi] = s.Rinv[bi].transpose() * s.Rinv[bi];
    s.lam_blk[bi] = sig;
  }
  return s;
}

// H^-1 u : lp slots scale by w^2, PSD blocks map U -> T U T.
inline ConeVec apply_hinv(const Canonical& c, const Scaling& s, const ConeVec& u) {
  ConeVec r = u;
  r.lp.array() *= s.w_lp.array().square();
  for (std::size_t bi = 0; bi < c.dims.size(); ++bi) {
    r.blk[bi] = s.T[bi] * u.blk[bi] * s.T[bi];
    r.blk[bi] = 0.5 * (r.blk[bi] + r.blk[bi].transpose()).eval();
  }
  return r;
}

inline ConeVec apply_h(const Canonical& c, const Scaling& s, const ConeVec& u) {
  ConeVec r = u;
  r.lp.array() /= s.w_lp.array().square();
  for (std::size_t bi = 0; bi < c.dims.size(); ++bi) {
    r.blk[bi] = s.Tinv[bi] * u.blk[bi] * s.Tinv[bi];
    r.blk[bi] = 0.5 * (r.blk[bi] + r.blk[bi].transpose()).eval();
  }
  return r;
}

// Maximum step so that x + alpha*dx stays in the cone.
inline double max_step(const ConeVec& x, const ConeVec& dx) {
  double alpha = std::numeric_limits<double>::infinity();
  for (int i = 0; i < x.lp.size(); ++i)
    if (dx.lp[i] < 0.0) alpha = std::min(alpha, -x.lp[i] / dx.lp[i]);
  for (std::size_t bi = 0; bi < x.blk.size(); ++bi) {
    const int d = static_cast<int>(x.blk[bi].rows());
    if (d == 0) continue;
    Eigen::LLT<Eigen::MatrixXd> llt(x.blk[bi]);
    if (llt.info() != Eigen::Success) return 0.0;
    const Eigen::MatrixXd L = llt.matrixL();
    Eigen::MatrixXd M = L.triangularView<Eigen::Lower>().solve(dx.blk[bi]);
    M = L.triangularView<Eigen::Lower>().solve(M.transpose().eval());
    M = 0.5 * (M + M.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M, Eigen::EigenvaluesOnly);
    const double lmin = es.eigenvalues().minCoeff();
    if (lmin < 0.0) alpha = std::min(alpha, -1.0 / lmin);
  }
  return alpha;
}

struct IpmState {
  ConeVec x, z;
  Eigen::VectorXd y;
  double tau = 1.0, kappa = 1.0;
};

struct IpmReport {
  SolveStatus status = SolveStatus::IterationLimit;
  double pres = std::numeric_limits<double>::infinity();
  double dres = std::numeric_limits<double>::infinity();
  double relgap = std::numeric_limits<double>::infinity();
  double pobj = 0.0, dobj = 0.0;
  int iters = 0;
};

class KktSolver {
 public:
  KktSolver(const Canonical& c, const Scaling& s) : c_(c), s_(s) {
    const int m = c.rows();
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(m, m);
    for (int col = 0; col < c.lp_dim; ++col) {
      const double w2 = s.w_lp[col] * s.w_lp[col];
      const auto& entries = c.lp_cols[col];
      for (std::size_t a = 0; a < entries.size(); ++a)
        for (std::size_t b = 0; b <= a; ++b) {
          const double v = w2 * entries[a].second * entries[b].second;
          S(entries[a].first, entries[b].first) += v;
          if (entries[a].first != entries[b].first) S(entries[b].first, entries[a].first) += v;
        }
    }
    for (std::size_t bi = 0; bi < c.dims.size(); ++bi) {
      const auto& rows = c.blk_rows[bi];
      if (rows.empty()) continue;
      std::vector<Eigen::MatrixXd> tat(rows.size());
      for (std::size_t a = 0; a < rows.size(); ++a) {
        tat[a] = s.T[bi] * rows[a].second * s.T[bi];
      }
      for (std::size_t a = 0; a < rows.size(); ++a)
        for (std::size_t b = 0; b <= a; ++b) {
          const double v = rows[b].second.cwiseProduct(tat[a]).sum();
          S(rows[a].first, rows[b].first) += v;
          if (rows[a].first != rows[b].first) S(rows[b].first, rows[a].first) += v;
        }
    }
    const double reg = 1e-12 * (1.0 + S.diagonal().cwiseAbs().maxCoeff());
    S.diagonal().array() += reg;
    llt_.compute(S);
    if (llt_.info() != Eigen::Success) {
      S.diagonal().array() += 1e-8 * (1.0 + S.diagonal().cwiseAbs().maxCoeff());
      llt_.compute(S);
      ok_ = llt_.info() == Eigen::Success;
    }
  }

  bool ok() const { return ok_; }

  // Solves H u - A^T v = f, A u = g with one refinement pass.
  void solve(const ConeVec& f, const Eigen::VectorXd& g, ConeVec& u, Eigen::VectorXd& v) const {
    solve_once(f, g, u, v);
    // refinement
    ConeVec r1 = f;
    axpy(-1.0, apply_h(c_, s_, u), r1);
    ConeVec atv = at_mul(c_, v);
    axpy(1.0, atv, r1);
    Eigen::VectorXd r2 = g - a_mul(c_, u);
    ConeVec du;
    Eigen::VectorXd dv;
    solve_once(r1, r2, du, dv);
    axpy(1.0, du, u);
    v += dv;
  }

 private:
  void solve_once(const ConeVec& f, const Eigen::VectorXd& g, ConeVec& u,
                  Eigen::VectorXd& v) const {
    const ConeVec hf = apply_hinv(c_, s_, f);
    const Eigen::VectorXd rhs = g - a_mul(c_, hf);
    v = llt_.solve(rhs);
    ConeVec fav = f;
    axpy(1.0, at_mul(c_, v), fav);
    u = apply_hinv(c_, s_, fav);
  }

  const Canonical& c_;
  const Scaling& s_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  bool ok_ = true;
};

inline IpmReport ipm_solve(const Canonical& c, double tol, int max_iter, IpmState& st) {
  IpmReport rep;
  const int m = c.rows();
  const Eigen::VectorXd b = Eigen::Map<const Eigen::VectorXd>(c.b.data(), m);
  ConeVec cvec = ConeVec::zeros(c);
  cvec.lp.head(c.c_lp.size()) = c.c_lp;  // cut slacks appended after the objective carry cost 0
  for (std::size_t bi = 0; bi < c.dims.size(); ++bi) cvec.blk[bi] = c.C_blk[bi];

  st.x = ConeVec::identity(c);
  st.z = ConeVec::identity(c);
  st.y = Eigen::VectorXd::Zero(m);
  st.tau = 1.0;
  st.kappa = 1.0;

  double degree = static_cast<double>(c.lp_dim);
  for (int d : c.dims) degree += d;
  const double norm_b = std::max(1.0, b.norm());
  const double norm_c = std::max(1.0, norm(cvec));

  int consecutive_tiny_steps = 0;
  for (int it = 0; it < max_iter; ++it) {
    rep.iters = it;
    // residuals
    Eigen::VectorXd rp = a_mul(c, st.x) - b * st.tau;
    ConeVec rd = scaled(cvec, st.tau);
    axpy(-1.0, at_mul(c, st.y), rd);
    axpy(-1.0, st.z, rd);
    const double by = st.y.size() ? b.dot(st.y) : 0.0;
    const double cx = dot(cvec, st.x);
    const double rg = by - cx - st.kappa;

    const double xz = dot(st.x, st.z);
    const double mu = (xz + st.tau * st.kappa) / (degree + 1.0);

    rep.pres = (rp / st.tau).norm() / norm_b;
    rep.dres = norm(scaled(rd, 1.0 / st.tau)) / norm_c;
    const double gap_abs = xz / (st.tau * st.tau);
    rep.pobj = cx / st.tau;
    rep.dobj = by / st.tau;
    rep.relgap = gap_abs / std::max({1.0, std::abs(rep.pobj), std::abs(rep.dobj)});

    if (rep.pres <= tol && rep.dres <= tol && rep.relgap <= tol) {
      rep.status = SolveStatus::Optimal;
      return rep;
    }
    // infeasibility certificates
    if (by > 0.0) {
      ConeVec atyz = at_mul(c, st.y);
      axpy(1.0, st.z, atyz);
      if (norm(atyz) / by <= tol) {
        rep.status = SolveStatus::Infeasible;
        return rep;
      }
    }
    if (cx < 0.0) {
      if (a_mul(c, st.x).norm() / (-cx) <= tol) {
        rep.status = SolveStatus::Unbounded;
        return rep;
      }
    }

    Scaling s = compute_scaling(c, st.x, st.z);
    if (!s.ok) {
      rep.status = SolveStatus::NumericalFailure;
      return rep;
    }
    KktSolver kkt(c, s);
    if (!kkt.ok()) {
      rep.status = SolveStatus::NumericalFailure;
      return rep;
    }

    ConeVec u1, u2;
    Eigen::VectorXd v1, v2;
    kkt.solve(scaled(cvec, -1.0), b, u1, v1);
    const double denom_c = b.size() ? b.dot(v1) : 0.0;
    const double denom = denom_c - dot(cvec, u1) + st.kappa / st.tau;

    auto newton = [&](double eta, const ConeVec& ds_lp_blk, double dkappa_rhs, ConeVec& dx,
                      Eigen::VectorXd& dy, ConeVec& dz, double& dtau, double& dkap) {
      // d~ = L_lambda^{-1} ds ; then Winv(d~)
      ConeVec dtil = ds_lp_blk;
      for (int i = 0; i < c.lp_dim; ++i) dtil.lp[i] /= s.lam_lp[i];
      for (std::size_t bi = 0; bi < c.dims.size(); ++bi) {
        const auto& lam = s.lam_blk[bi];
        for (int i = 0; i < dtil.blk[bi].rows(); ++i)
          for (int j = 0; j < dtil.blk[bi].cols(); ++j)
            dtil.blk[bi](i, j) = 2.0 * ds_lp_blk.blk[bi](i, j) / (lam[i] + lam[j]);
      }
      ConeVec winv_dtil = dtil;
      winv_dtil.lp.array() /= s.w_lp.array();
      for (std::size_t bi = 0; bi < c.dims.size(); ++bi) {
        winv_dtil.blk[bi] = s.Rinv[bi].transpose() * dtil.blk[bi] * s.Rinv[bi];
        winv_dtil.blk[bi] = 0.5 * (winv_dtil.blk[bi] + winv_dtil.blk[bi].transpose()).eval();
      }
      ConeVec h1 = scaled(rd, -eta);
      axpy(1.0, winv_dtil, h1);
      kkt.solve(h1, -eta * rp, u2, v2);
      const double num =
          -eta * rg - (b.size() ? b.dot(v2) : 0.0) + dot(cvec, u2) + dkappa_rhs / st.tau;
      dtau = num / denom;
      dx = u2;
      axpy(dtau, u1, dx);
      dy = v2 + dtau * v1;
      dz = winv_dtil;
      axpy(-1.0, apply_h(c, s, dx), dz);
      dkap = (dkappa_rhs - st.kappa * dtau) / st.tau;
    };

    // affine direction
    ConeVec ds = ConeVec::zeros(c);
    for (int i = 0; i < c.lp_dim; ++i) ds.lp[i] = -s.lam_lp[i] * s.lam_lp[i];
    for (std::size_t bi = 0; bi < c.dims.size(); ++bi)
      ds.blk[bi] = (-s.lam_blk[bi].array().square()).matrix().asDiagonal();

    ConeVec dx_a, dz_a;
    Eigen::VectorXd dy_a;
    double dtau_a, dkap_a;
    newton(1.0, ds, -st.tau * st.kappa, dx_a, dy_a, dz_a, dtau_a, dkap_a);

    double alpha_a = std::min(max_step(st.x, dx_a), max_step(st.z, dz_a));
    if (dtau_a < 0.0) alpha_a = std::min(alpha_a, -st.tau / dtau_a);
    if (dkap_a < 0.0) alpha_a = std::min(alpha_a, -st.kappa / dkap_a);
    alpha_a = std::min(1.0, alpha_a);

    double mu_aff;
    {
      ConeVec xa = st.x, za = st.z;
      axpy(alpha_a, dx_a, xa);
      axpy(alpha_a, dz_a, za);
      mu_aff = (dot(xa, za) + (st.tau + alpha_a * dtau_a) * (st.kappa + alpha_a * dkap_a)) /
               (degree + 1.0);
    }
    double sigma = std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3.0);

    // combined direction with Mehrotra correction
    ConeVec ds_c = ds;
    for (int i = 0; i < c.lp_dim; ++i) {
      const double paff = dx_a.lp[i] / s.w_lp[i];
      const double qaff = dz_a.lp[i] * s.w_lp[i];
      ds_c.lp[i] += sigma * mu - paff * qaff;
    }
    for (std::size_t bi = 0; bi < c.dims.size(); ++bi) {
      const Eigen::MatrixXd paff = s.Rinv[bi] * dx_a.blk[bi] * s.Rinv[bi].transpose();
      const Eigen::MatrixXd qaff = s.R[bi].transpose() * dz_a.blk[bi] * s.R[bi];
      const Eigen::MatrixXd corr = 0.5 * (paff * qaff + qaff * paff);
      ds_c.blk[bi] += sigma * mu * Eigen::MatrixXd::Identity(c.dims[bi], c.dims[bi]) - corr;
    }
    const double dkappa_rhs = sigma * mu - st.tau * st.kappa - dtau_a * dkap_a;

    ConeVec dx, dz;
    Eigen::VectorXd dy;
    double dtau, dkap;
    newton(1.0 - sigma, ds_c, dkappa_rhs, dx, dy, dz, dtau, dkap);

    double alpha = std::min(max_step(st.x, dx), max_step(st.z, dz));
    if (dtau < 0.0) alpha = std::min(alpha, -st.tau / dtau);
    if (dkap < 0.0) alpha = std::min(alpha, -st.kappa / dkap);
    alpha = std::min(1.0, 0.99 * alpha);

    if (!(alpha > 1e-10)) {
      if (++consecutive_tiny_steps >= 2) {
        rep.status = SolveStatus::NumericalFailure;
        return rep;
      }
    } else {
      consecutive_tiny_steps = 0;
    }

    axpy(alpha, dx, st.x);
    axpy(alpha, dz, st.z);
    st.y += alpha * dy;
    st.tau += alpha * dtau;
    st.kappa += alpha * dkap;
    for (auto& mref : st.x.blk) mref = 0.5 * (mref + mref.transpose()).eval();
    for (auto& mref : st.z.blk) mref = 0.5 * (mref + mref.transpose()).eval();
    if (!(st.tau > 0.0) || !(st.kappa > 0.0) || !std::isfinite(st.tau)) {
      rep.status = SolveStatus::NumericalFailure;
      return rep;
    }
    rep.iters = it + 1;
  }
  rep.status = SolveStatus::IterationLimit;
  return rep;
}

inline double eval_expr(const CanonExpr& e, const ConeVec& x) {
  double v = e.constant;
  for (const auto& [col, coeff] : e.lin) v += coeff * x.lp[col];
  for (const auto& [blk, m] : e.mats) v += m.cwiseProduct(x.blk[blk]).sum();
  return v;
}

}  // namespace detail

// Solves the program. Log hypographs are enforced through adaptive tangent
// outer approximation: the conic master problem is re-solved with refined
// cuts until every hypograph holds within tolerance, so the reported
// solution satisfies the exact constraints.
inline SolverResult solve(const ConicProgram& p, double tol = 1e-7, int max_iter = 50000) {
  using namespace detail;
  const auto t0 = std::chrono::steady_clock::now();
  SolverResult res;
  res.scalars.assign(p.scalar_vars().size(), 0.0);
  res.row_duals.assign(p.rows().size(), 0.0);
  res.blocks.clear();
  for (const auto& bv : p.block_vars())
    res.blocks.push_back(Eigen::MatrixXd::Zero(bv.dim, bv.dim));

  {
    const auto diags = validate(p);
    for (const auto& d : diags) {
      // zero rows are tolerated (they are vacuous); everything else is a
      // malformed program
      if (d.message.find("empty row") == std::string::npos)
        throw UsageError("conic::solve: malformed program: " + d.message);
    }
  }

  Canonical canon = canonicalize(p);
  if (canon.trivially_infeasible) {
    res.status = SolveStatus::Infeasible;
    if (canon.infeasible_user_row >= 0) {
      const auto& row = p.rows()[canon.infeasible_user_row];
      const double resid = row.rhs - row.expr.constant;
      if (resid != 0.0) {
        res.row_duals[canon.infeasible_user_row] = 1.0 / resid;
        res.has_certificate = true;
      }
    }
    res.message = "presolve detected an inconsistent row";
    return res;
  }

  if (canon.lp_dim == 0 && canon.dims.empty()) {
    res.status = SolveStatus::Optimal;
    res.primal_obj = res.dual_obj = canon.obj_const;
    res.primal_residual = res.dual_residual = res.gap = 0.0;
    return res;
  }

  // seed tangents for every log hypograph
  const double log_tol_base = 1e-9;
  std::vector<std::vector<double>> tangent_points(canon.logs.size());
  for (std::size_t li = 0; li < canon.logs.size(); ++li) {
    for (double h : canon.logs[li].tangents)
      tangent_points[li].push_back(std::max(0.0, h));
    std::sort(tangent_points[li].begin(), tangent_points[li].end());
    tangent_points[li].erase(
        std::unique(tangent_points[li].begin(), tangent_points[li].end()),
        tangent_points[li].end());
  }
  auto add_cut = [&](std::size_t li, double point) {
    const CanonLog& l = canon.logs[li];
    CanonExpr row = l.t;
    const double slope = l.weight / (1.0 + point);
    for (const auto& [col, coeff] : l.x.lin) row.lin.push_back({col, -slope * coeff});
    for (const auto& [blk, m] : l.x.mats) row.mats.push_back({blk, -slope * m});
    const double rhs = l.weight * std::log1p(point) - slope * point + slope * l.x.constant;
    // row: t - slope*x <= w*ln(1+p) - slope*p  (constants folded by add_row)
    canon.add_row(row, rhs, false);
  };
  for (std::size_t li = 0; li < canon.logs.size(); ++li)
    for (double h : tangent_points[li]) add_cut(li, h);

  IpmState st;
  IpmReport rep;
  int iter_budget = max_iter;
  const int max_rounds = 60;
  bool logs_ok = true;
  for (int round = 0; round < max_rounds; ++round) {
    res.cut_rounds = round + 1;
    rep = ipm_solve(canon, tol, std::min(200, iter_budget), st);
    res.iterations += rep.iters;
    iter_budget -= rep.iters;
    if (rep.status != SolveStatus::Optimal) break;
    if (canon.logs.empty()) break;
    // check hypograph violations at the normalized solution
    ConeVec xhat = scaled(st.x, 1.0 / st.tau);
    logs_ok = true;
    for (std::size_t li = 0; li < canon.logs.size(); ++li) {
      const CanonLog& l = canon.logs[li];
      const double tv = eval_expr(l.t, xhat);
      double xv = eval_expr(l.x, xhat);
      if (xv < 0.0) xv = 0.0;
      const double viol = tv - l.weight * std::log1p(xv);
      if (viol > log_tol_base * std::max(1.0, l.weight)) {
        logs_ok = false;
        add_cut(li, xv);
      }
    }
    if (logs_ok) break;
    if (iter_budget <= 0) {
      rep.status = SolveStatus::IterationLimit;
      break;
    }
  }
  if (rep.status == SolveStatus::Optimal && !logs_ok)
    rep.status = SolveStatus::IterationLimit;

  res.status = rep.status;
  res.primal_residual = rep.pres;
  res.dual_residual = rep.dres;
  res.gap = rep.relgap;

  const bool ray = rep.status == SolveStatus::Infeasible || rep.status == SolveStatus::Unbounded;
  const double scale = ray ? 1.0 : st.tau;
  if (scale > 0.0) {
    ConeVec xhat = scaled(st.x, 1.0 / scale);
    Eigen::VectorXd yhat = st.y / scale;
    for (std::size_t v = 0; v < p.scalar_vars().size(); ++v) {
      const ScalarLoc& loc = canon.scalar_loc[v];
      switch (loc.kind) {
        case ScalarLoc::Lp: res.scalars[v] = xhat.lp[loc.slot]; break;
        case ScalarLoc::LpSplit:
          res.scalars[v] = xhat.lp[loc.slot] - xhat.lp[loc.slot_neg];
          break;
        case ScalarLoc::BlockEntry:
          res.scalars[v] = loc.scale * xhat.blk[loc.block](loc.ei, loc.ej);
          break;
      }
    }
    for (std::size_t bidx = 0; bidx < p.block_vars().size(); ++bidx) {
      const int blk = canon.user_block_loc[bidx];
      if (blk >= 0) res.blocks[bidx] = xhat.blk[blk];
    }
    for (std::size_t r = 0; r < p.rows().size(); ++r) {
      const int ri = canon.user_row_loc[r];
      if (ri >= 0) res.row_duals[r] = yhat[ri];
    }
    res.primal_obj = rep.pobj + canon.obj_const;
    res.dual_obj = rep.dobj + canon.obj_const;
    res.has_certificate = ray;
  }
  res.wall_time_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

}  // namespace secbeam::conic
