#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "secbeam/errors.hpp"

namespace secbeam::conic {

using Index = std::int32_t;

enum class VarKind { Free, Nonneg };

struct ScalarTerm {
  Index var = -1;
  double coeff = 0.0;
};

// <coeff, X> against a declared PSD block variable; coeff must be symmetric.
struct BlockTerm {
  Index block = -1;
  Eigen::MatrixXd coeff;
};

// Affine expression over scalar variables and PSD block variables.
struct Expr {
  std::vector<ScalarTerm> terms;
  std::vector<BlockTerm> mat_terms;
  double constant = 0.0;

  Expr() = default;
  /*implicit*/ Expr(double c) : constant(c) {}

  Expr& add(Index var, double coeff) {
    terms.push_back({var, coeff});
    return *this;
  }
  Expr& add_trace(Index block, Eigen::MatrixXd coeff) {
    mat_terms.push_back({block, std::move(coeff)});
    return *this;
  }
  Expr& add_const(double c) {
    constant += c;
    return *this;
  }
};

inline Expr var_expr(Index var, double coeff = 1.0) {
  Expr e;
  e.add(var, coeff);
  return e;
}

enum class RowSense { Eq, Le };

struct LinearRow {
  Expr expr;
  double rhs = 0.0;
  RowSense sense = RowSense::Eq;
  std::string tag;
};

// t >= ||y||_2
struct SocCone {
  Expr t;
  std::vector<Expr> y;
  std::string tag;
};

// 2uv >= ||w||^2, u >= 0, v >= 0
struct RsocCone {
  Expr u, v;
  std::vector<Expr> w;
  std::string tag;
};

// Symmetric matrix of affine entries (row-major upper triangle) is PSD.
struct PsdCone {
  int dim = 0;
  std::vector<Expr> entries;
  std::string tag;
};

// t <= weight * ln(1 + x); handled by the solver through successive tangent
// refinement, so the returned solution satisfies the exact hypograph within
// tolerance. `hints` seed the initial tangents.
struct LogHypograph {
  Expr t;
  Index x = -1;
  double weight = 1.0;
  std::vector<double> hints;
  std::string tag;
};

struct ScalarVarDecl {
  VarKind kind;
  std::string name;
};

struct BlockVarDecl {
  int dim;
  std::string name;
};

class ConicProgram {
 public:
  Index add_scalar(VarKind kind, std::string name = {}) {
    scalars_.push_back({kind, std::move(name)});
    return static_cast<Index>(scalars_.size() - 1);
  }
  Index add_psd_block(int dim, std::string name = {}) {
    blocks_.push_back({dim, std::move(name)});
    return static_cast<Index>(blocks_.size() - 1);
  }

  void add_eq(Expr e, double rhs, std::string tag = {}) {
    rows_.push_back({std::move(e), rhs, RowSense::Eq, std::move(tag)});
  }
  void add_le(Expr e, double rhs, std::string tag = {}) {
    rows_.push_back({std::move(e), rhs, RowSense::Le, std::move(tag)});
  }
  void add_ge(Expr e, double rhs, std::string tag = {}) {
    Expr neg;
    neg.constant = -e.constant;
    for (auto& t : e.terms) neg.terms.push_back({t.var, -t.coeff});
    for (auto& t : e.mat_terms) neg.mat_terms.push_back({t.block, -t.coeff});
    rows_.push_back({std::move(neg), -rhs, RowSense::Le, std::move(tag)});
  }

  void add_soc(Expr t, std::vector<Expr> y, std::string tag = {}) {
    socs_.push_back({std::move(t), std::move(y), std::move(tag)});
  }
  void add_rsoc(Expr u, Expr v, std::vector<Expr> w, std::string tag = {}) {
    rsocs_.push_back({std::move(u), std::move(v), std::move(w), std::move(tag)});
  }
  void add_psd(int dim, std::vector<Expr> upper_entries, std::string tag = {}) {
    psds_.push_back({dim, std::move(upper_entries), std::move(tag)});
  }
  void add_log_hypograph(Expr t, Index x, double weight, std::vector<double> hints,
                         std::string tag = {}) {
    logs_.push_back({std::move(t), x, weight, std::move(hints), std::move(tag)});
  }

  void set_objective(Expr e) { objective_ = std::move(e); }

  const std::vector<ScalarVarDecl>& scalar_vars() const { return scalars_; }
  const std::vector<BlockVarDecl>& block_vars() const { return blocks_; }
  const std::vector<LinearRow>& rows() const { return rows_; }
  const std::vector<SocCone>& socs() const { return socs_; }
  const std::vector<RsocCone>& rsocs() const { return rsocs_; }
  const std::vector<PsdCone>& psds() const { return psds_; }
  const std::vector<LogHypograph>& log_hypographs() const { return logs_; }
  const Expr& objective() const { return objective_; }

  std::size_t row_count_by_tag(const std::string& prefix) const {
    std::size_t c = 0;
    for (const auto& r : rows_)
      if (r.tag.rfind(prefix, 0) == 0) ++c;
    return c;
  }

 private:
  std::vector<ScalarVarDecl> scalars_;
  std::vector<BlockVarDecl> blocks_;
  std::vector<LinearRow> rows_;
  std::vector<SocCone> socs_;
  std::vector<RsocCone> rsocs_;
  std::vector<PsdCone> psds_;
  std::vector<LogHypograph> logs_;
  Expr objective_;
};

struct Diagnostic {
  std::string message;
};

namespace detail {

inline void check_expr(const ConicProgram& p, const Expr& e, const std::string& where,
                       std::vector<Diagnostic>& out) {
  for (const auto& t : e.terms) {
    if (t.var < 0 || t.var >= static_cast<Index>(p.scalar_vars().size()))
      out.push_back({where + ": dangling scalar variable reference"});
    if (!std::isfinite(t.coeff)) out.push_back({where + ": non-finite coefficient"});
  }
  for (const auto& t : e.mat_terms) {
    if (t.block < 0 || t.block >= static_cast<Index>(p.block_vars().size())) {
      out.push_back({where + ": dangling block variable reference"});
      continue;
    }
    const int d = p.block_vars()[t.block].dim;
    if (t.coeff.rows() != d || t.coeff.cols() != d)
      out.push_back({where + ": coefficient dimension mismatch"});
    else if (!t.coeff.isApprox(t.coeff.transpose(), 1e-12) && t.coeff.norm() > 0)
      out.push_back({where + ": coefficient matrix not symmetric"});
    if (!t.coeff.allFinite()) out.push_back({where + ": non-finite coefficient matrix"});
  }
  if (!std::isfinite(e.constant)) out.push_back({where + ": non-finite constant"});
}

}  // namespace detail

inline std::vector<Diagnostic> validate(const ConicProgram& p) {
  std::vector<Diagnostic> out;
  for (const auto& b : p.block_vars())
    if (b.dim < 1) out.push_back({"block variable with non-positive dimension"});
  detail::check_expr(p, p.objective(), "objective", out);
  int i = 0;
  for (const auto& r : p.rows()) {
    const std::string where = "row " + std::to_string(i) + (r.tag.empty() ? "" : " [" + r.tag + "]");
    detail::check_expr(p, r.expr, where, out);
    if (r.expr.terms.empty() && r.expr.mat_terms.empty())
      out.push_back({where + ": empty row"});
    if (!std::isfinite(r.rhs)) out.push_back({where + ": non-finite rhs"});
    ++i;
  }
  i = 0;
  for (const auto& c : p.socs()) {
    const std::string where = "soc " + std::to_string(i++);
    detail::check_expr(p, c.t, where, out);
    if (c.y.empty()) out.push_back({where + ": empty cone"});
    for (const auto& e : c.y) detail::check_expr(p, e, where, out);
  }
  i = 0;
  for (const auto& c : p.rsocs()) {
    const std::string where = "rsoc " + std::to_string(i++);
    detail::check_expr(p, c.u, where, out);
    detail::check_expr(p, c.v, where, out);
    if (c.w.empty()) out.push_back({where + ": empty cone"});
    for (const auto& e : c.w) detail::check_expr(p, e, where, out);
  }
  i = 0;
  for (const auto& c : p.psds()) {
    const std::string where = "psd " + std::to_string(i++);
    if (c.dim < 1) out.push_back({where + ": non-positive dimension"});
    if (static_cast<int>(c.entries.size()) != c.dim * (c.dim + 1) / 2)
      out.push_back({where + ": entry count does not match dimension"});
    for (const auto& e : c.entries) detail::check_expr(p, e, where, out);
  }
  i = 0;
  for (const auto& l : p.log_hypographs()) {
    const std::string where = "log " + std::to_string(i++);
    detail::check_expr(p, l.t, where, out);
    if (l.x < 0 || l.x >= static_cast<Index>(p.scalar_vars().size()))
      out.push_back({where + ": dangling scalar variable reference"});
    if (!(l.weight > 0.0) || !std::isfinite(l.weight))
      out.push_back({where + ": weight must be positive"});
  }
  return out;
}

namespace detail {

inline void dump_expr(const ConicProgram& p, const Expr& e, std::ostream& os) {
  for (const auto& t : e.terms) os << " s" << t.var << ":" << t.coeff;
  for (const auto& t : e.mat_terms) {
    os << " B" << t.block << ":[";
    const int d = static_cast<int>(t.coeff.rows());
    bool first = true;
    for (int i = 0; i < d; ++i)
      for (int j = i; j < d; ++j)
        if (t.coeff(i, j) != 0.0) {
          if (!first) os << ",";
          os << i << "," << j << "," << t.coeff(i, j);
          first = false;
        }
    os << "]";
  }
  if (e.constant != 0.0) os << " const:" << e.constant;
}

}  // namespace detail

// Self-describing text dump: variable blocks, objective, rows, cones as
// coefficient triplets. Intended for offline inspection of subproblems.
inline void dump(const ConicProgram& p, std::ostream& os) {
  os << "conic-program\n";
  os << "scalars " << p.scalar_vars().size() << "\n";
  for (std::size_t i = 0; i < p.scalar_vars().size(); ++i) {
    const auto& s = p.scalar_vars()[i];
    os << "  s" << i << " " << (s.kind == VarKind::Nonneg ? "nonneg" : "free") << " " << s.name
       << "\n";
  }
  os << "psd-blocks " << p.block_vars().size() << "\n";
  for (std::size_t i = 0; i < p.block_vars().size(); ++i)
    os << "  B" << i << " dim " << p.block_vars()[i].dim << " " << p.block_vars()[i].name << "\n";
  os << "objective";
  detail::dump_expr(p, p.objective(), os);
  os << "\n";
  os << "rows " << p.rows().size() << "\n";
  for (const auto& r : p.rows()) {
    os << "  " << (r.sense == RowSense::Eq ? "eq" : "le");
    detail::dump_expr(p, r.expr, os);
    os << " rhs:" << r.rhs << " " << r.tag << "\n";
  }
  os << "soc " << p.socs().size() << "\n";
  for (const auto& c : p.socs()) {
    os << "  t:";
    detail::dump_expr(p, c.t, os);
    for (const auto& e : c.y) {
      os << " |";
      detail::dump_expr(p, e, os);
    }
    os << " " << c.tag << "\n";
  }
  os << "rsoc " << p.rsocs().size() << "\n";
  for (const auto& c : p.rsocs()) {
    os << "  u:";
    detail::dump_expr(p, c.u, os);
    os << " v:";
    detail::dump_expr(p, c.v, os);
    for (const auto& e : c.w) {
      os << " |";
      detail::dump_expr(p, e, os);
    }
    os << " " << c.tag << "\n";
  }
  os << "psd-cones " << p.psds().size() << "\n";
  for (const auto& c : p.psds()) {
    os << "  dim " << c.dim;
    for (const auto& e : c.entries) {
      os << " |";
      detail::dump_expr(p, e, os);
    }
    os << " " << c.tag << "\n";
  }
  os << "log-hypographs " << p.log_hypographs().size() << "\n";
  for (const auto& l : p.log_hypographs()) {
    os << "  t:";
    detail::dump_expr(p, l.t, os);
    os << " x:s" << l.x << " w:" << l.weight << " " << l.tag << "\n";
  }
}

}  // namespace secbeam::conic
