#pragma once
// Dense bounded-variable revised simplex.
//
// Solves   minimize c.x  subject to  A x = b,  lower <= x <= upper
// with an explicit dense basis inverse. Columns are stored sparse and can be
// appended after a solve; the previous basis stays primal feasible, so column
// generation resumes in phase 2 without restarting.
//
// The inverse is stored column-major and the eta update skips zeros on both
// sides, so bases made mostly of slack columns stay cheap to pivot.
//
// Pricing is Dantzig's rule with lowest-index tie-breaking. After a run of
// degenerate pivots the solver switches to Bland's rule until it makes
// progress again. The ratio test is the two-pass Harris test.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "sortition/error.hpp"
#include "sortition/numerics/matrix.hpp"
#include "sortition/tolerances.hpp"

namespace sortition::numerics {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct LinearProgram {
  std::vector<double> objective;
  Matrix eq_lhs;
  std::vector<double> eq_rhs;
  std::vector<double> lower;
  std::vector<double> upper;

  void validate() const {
    const std::size_t n = objective.size();
    if (eq_lhs.cols() != n || eq_lhs.rows() != eq_rhs.size() ||
        lower.size() != n || upper.size() != n)
      throw Error(ErrorKind::InvalidArgument, "linear program dimensions disagree");
    for (std::size_t j = 0; j < n; ++j) {
      if (!std::isfinite(objective[j]))
        throw Error(ErrorKind::InvalidArgument, "non-finite objective entry");
      if (std::isnan(lower[j]) || std::isnan(upper[j]) || lower[j] > upper[j])
        throw Error(ErrorKind::InvalidArgument, "inconsistent variable bounds");
    }
    for (double b : eq_rhs)
      if (!std::isfinite(b))
        throw Error(ErrorKind::InvalidArgument, "non-finite right-hand side");
    for (std::size_t r = 0; r < eq_lhs.rows(); ++r)
      for (double a : eq_lhs.row(r))
        if (!std::isfinite(a))
          throw Error(ErrorKind::InvalidArgument, "non-finite constraint entry");
  }
};

enum class LpStatus { optimal, infeasible, unbounded };

inline const char *to_string(LpStatus s) {
  switch (s) {
  case LpStatus::optimal: return "optimal";
  case LpStatus::infeasible: return "infeasible";
  case LpStatus::unbounded: return "unbounded";
  }
  return "?";
}

struct LpSolution {
  std::vector<double> x;
  double objective_value = 0.0;
  LpStatus status = LpStatus::infeasible;
  /// Row multipliers y with reduced costs c - A^T y (only when optimal).
  std::vector<double> duals;
  std::size_t iterations = 0;
};

struct SparseEntry {
  std::size_t row;
  double value;
};
using SparseColumn = std::vector<SparseEntry>;

class BoundedSimplex {
public:
  explicit BoundedSimplex(std::vector<double> rhs)
      : m_(rhs.size()), rhs_(std::move(rhs)) {
    for (std::size_t r = 0; r < m_; ++r) {
      Variable a;
      a.column = {{r, 1.0}};
      a.lower = 0.0;
      a.upper = kInf;
      a.artificial = true;
      vars_.push_back(std::move(a));
    }
  }

  std::size_t num_rows() const { return m_; }
  std::size_t num_columns() const { return vars_.size() - m_; }
  std::size_t iterations() const { return iterations_; }
  std::size_t refactorizations() const { return refactorizations_; }

  /// Appends a structural column and returns its index. After a successful
  /// solve the new column must admit the value 0 so the basis stays feasible.
  std::size_t add_column(double cost, SparseColumn column, double lower,
                         double upper) {
    if (std::isnan(lower) || std::isnan(upper) || lower > upper)
      throw Error(ErrorKind::InvalidArgument, "inconsistent column bounds");
    for (const auto &e : column)
      if (e.row >= m_)
        throw Error(ErrorKind::InvalidArgument, "column row out of range");
    Variable v;
    v.cost = cost;
    v.column = std::move(column);
    v.lower = lower;
    v.upper = upper;
    v.value = initial_value(lower, upper);
    if (phase1_done_ && v.value != 0.0)
      throw Error(ErrorKind::InvalidArgument,
                  "columns added after a solve must admit the value 0");
    vars_.push_back(std::move(v));
    return vars_.size() - m_ - 1;
  }

  LpStatus solve() {
    if (!phase1_done_) {
      start_phase1();
      const auto status = iterate(/*phase1=*/true);
      if (status == LpStatus::unbounded)
        throw Error(ErrorKind::NumericalFailure, "phase 1 reported unbounded");
      double infeas = 0.0;
      for (std::size_t r = 0; r < m_; ++r)
        if (vars_[basis_[r]].artificial)
          infeas += std::max(0.0, x_basic_[r]);
      if (infeas > Tolerances::feasibility * (1.0 + norm_inf(rhs_)))
        return status_ = LpStatus::infeasible;
      for (std::size_t j = 0; j < m_; ++j)
        vars_[j].upper = 0.0;
      phase1_done_ = true;
    }
    status_ = iterate(/*phase1=*/false);
    if (status_ == LpStatus::optimal && residual() > residual_tolerance()) {
      refactor();
      status_ = iterate(false);
    }
    return status_;
  }

  LpStatus status() const { return status_; }

  double value(std::size_t j) const {
    const auto &v = vars_[m_ + j];
    double x = v.basic ? x_basic_[v.basis_row] : v.value;
    return std::clamp(x, v.lower, v.upper);
  }

  std::vector<double> values() const {
    std::vector<double> x(num_columns());
    for (std::size_t j = 0; j < x.size(); ++j)
      x[j] = value(j);
    return x;
  }

  double objective() const {
    double s = 0.0;
    for (std::size_t j = 0; j < num_columns(); ++j)
      s += vars_[m_ + j].cost * value(j);
    return s;
  }

  std::vector<double> row_duals() const { return compute_duals(false); }

private:
  struct Variable {
    double cost = 0.0;
    SparseColumn column;
    double lower = 0.0;
    double upper = kInf;
    double value = 0.0; // meaningful when nonbasic
    bool basic = false;
    bool artificial = false;
    std::size_t basis_row = 0;
  };

  static double initial_value(double lower, double upper) {
    if (std::isfinite(lower))
      return lower;
    if (std::isfinite(upper))
      return upper;
    return 0.0;
  }

  double cost(std::size_t var, bool phase1) const {
    if (phase1)
      return vars_[var].artificial ? 1.0 : 0.0;
    return vars_[var].artificial ? 0.0 : vars_[var].cost;
  }

  void start_phase1() {
    std::vector<double> res = rhs_;
    for (std::size_t j = m_; j < vars_.size(); ++j) {
      auto &v = vars_[j];
      v.basic = false;
      v.value = initial_value(v.lower, v.upper);
      if (v.value != 0.0)
        for (const auto &e : v.column)
          res[e.row] -= e.value * v.value;
    }
    basis_.assign(m_, 0);
    x_basic_.assign(m_, 0.0);
    binv_.assign(m_ * m_, 0.0);
    // Crash: a row whose residual can be absorbed by a nonnegative singleton
    // column starts with that column basic and needs no artificial.
    std::vector<bool> covered(m_, false);
    for (std::size_t j = m_; j < vars_.size(); ++j) {
      auto &v = vars_[j];
      if (v.column.size() != 1 || v.lower != 0.0 || v.upper != kInf)
        continue;
      const auto [r, a] = v.column.front();
      if (covered[r] || a == 0.0 || res[r] / a < 0.0)
        continue;
      covered[r] = true;
      v.basic = true;
      v.basis_row = r;
      basis_[r] = j;
      inv(r, r) = 1.0 / a;
      x_basic_[r] = res[r] / a;
    }
    for (std::size_t r = 0; r < m_; ++r) {
      auto &a = vars_[r];
      const double sign = res[r] >= 0.0 ? 1.0 : -1.0;
      a.column = {{r, sign}};
      a.value = 0.0;
      if (covered[r]) {
        a.basic = false;
        a.upper = 0.0;
        continue;
      }
      a.upper = kInf;
      a.basic = true;
      a.basis_row = r;
      basis_[r] = r;
      inv(r, r) = sign;
      x_basic_[r] = std::abs(res[r]);
    }
    pivots_since_refactor_ = 0;
  }

  double inv(std::size_t r, std::size_t c) const { return binv_[c * m_ + r]; }
  double &inv(std::size_t r, std::size_t c) { return binv_[c * m_ + r]; }

  std::vector<double> compute_duals(bool phase1) const {
    std::vector<std::pair<std::size_t, double>> costed;
    for (std::size_t r = 0; r < m_; ++r)
      if (const double c = cost(basis_[r], phase1); c != 0.0)
        costed.emplace_back(r, c);
    std::vector<double> y(m_, 0.0);
    for (std::size_t j = 0; j < m_; ++j) {
      const double *col = &binv_[j * m_];
      double s = 0.0;
      for (const auto &[r, c] : costed)
        s += c * col[r];
      y[j] = s;
    }
    return y;
  }

  // alpha = B^{-1} a for a sparse column a.
  void ftran(const SparseColumn &column, std::vector<double> &alpha) const {
    std::fill(alpha.begin(), alpha.end(), 0.0);
    for (const auto &e : column) {
      const double *col = &binv_[e.row * m_];
      for (std::size_t r = 0; r < m_; ++r)
        alpha[r] += col[r] * e.value;
    }
  }

  // Replaces the basis column at row `leave` by the column whose ftran is
  // alpha: row_leave /= alpha[leave], row_r -= alpha[r] * row_leave.
  void eta_update(std::size_t leave, const std::vector<double> &alpha,
                  std::vector<std::size_t> &nz) {
    nz.clear();
    for (std::size_t r = 0; r < m_; ++r)
      if (r != leave && alpha[r] != 0.0)
        nz.push_back(r);
    const double scale = 1.0 / alpha[leave];
    for (std::size_t j = 0; j < m_; ++j) {
      double *col = &binv_[j * m_];
      double p = col[leave];
      if (p == 0.0)
        continue;
      p *= scale;
      col[leave] = p;
      for (std::size_t r : nz)
        col[r] -= alpha[r] * p;
    }
  }

  double reduced_cost(std::size_t var, const std::vector<double> &y,
                      bool phase1) const {
    double d = cost(var, phase1);
    for (const auto &e : vars_[var].column)
      d -= y[e.row] * e.value;
    return d;
  }

  double residual() const {
    std::vector<double> ax(m_, 0.0);
    for (std::size_t j = 0; j < vars_.size(); ++j) {
      const auto &v = vars_[j];
      const double x = v.basic ? x_basic_[v.basis_row] : v.value;
      if (x != 0.0)
        for (const auto &e : v.column)
          ax[e.row] += e.value * x;
    }
    double worst = 0.0;
    for (std::size_t r = 0; r < m_; ++r)
      worst = std::max(worst, std::abs(ax[r] - rhs_[r]));
    return worst;
  }

  double residual_tolerance() const {
    return 0.1 * Tolerances::feasibility * (1.0 + norm_inf(rhs_));
  }

  void recompute_basic_values() {
    std::vector<double> res = rhs_;
    for (const auto &v : vars_)
      if (!v.basic && v.value != 0.0)
        for (const auto &e : v.column)
          res[e.row] -= e.value * v.value;
    std::fill(x_basic_.begin(), x_basic_.end(), 0.0);
    for (std::size_t j = 0; j < m_; ++j) {
      if (res[j] == 0.0)
        continue;
      const double *col = &binv_[j * m_];
      for (std::size_t r = 0; r < m_; ++r)
        x_basic_[r] += col[r] * res[j];
    }
  }

  // Reinverts from the identity by pivoting the basic columns in one at a
  // time, singletons first, each on the free row with the largest |alpha|.
  // Rows may be reassigned among basic variables.
  void refactor() {
    std::vector<std::size_t> order = basis_;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return (vars_[a].column.size() == 1) > (vars_[b].column.size() == 1);
    });
    binv_.assign(m_ * m_, 0.0);
    for (std::size_t r = 0; r < m_; ++r)
      inv(r, r) = 1.0;
    std::vector<bool> taken(m_, false);
    std::vector<double> alpha(m_);
    std::vector<std::size_t> nz;
    for (std::size_t var : order) {
      ftran(vars_[var].column, alpha);
      std::size_t row = m_;
      double best = Tolerances::pivot;
      for (std::size_t r = 0; r < m_; ++r)
        if (!taken[r] && std::abs(alpha[r]) > best) {
          best = std::abs(alpha[r]);
          row = r;
        }
      if (row == m_)
        throw Error(ErrorKind::NumericalFailure, "singular basis during refactor");
      eta_update(row, alpha, nz);
      taken[row] = true;
      basis_[row] = var;
      vars_[var].basis_row = row;
    }
    recompute_basic_values();
    pivots_since_refactor_ = 0;
    ++refactorizations_;
  }

  LpStatus iterate(bool phase1) {
    const std::size_t limit = 50 * (m_ + vars_.size()) + 10000;
    std::size_t local = 0;
    std::size_t degenerate_run = 0;
    std::vector<double> alpha(m_), y = compute_duals(phase1);
    std::vector<std::size_t> nz;
    const double ftol = Tolerances::integrality_snap;
    const double refactor_period = static_cast<double>(std::max<std::size_t>(100, 2 * m_));
    for (;;) {
      if (++local > limit)
        throw Error(ErrorKind::NumericalFailure, "simplex iteration limit reached");
      const bool bland = degenerate_run > 50;

      // Pricing.
      std::size_t entering = vars_.size();
      double best = 0.0, d_enter = 0.0;
      for (std::size_t j = 0; j < vars_.size(); ++j) {
        const auto &v = vars_[j];
        if (v.basic || v.lower == v.upper)
          continue;
        const double d = reduced_cost(j, y, phase1);
        double score = 0.0;
        if (d < -Tolerances::optimality && v.value < v.upper)
          score = -d;
        else if (d > Tolerances::optimality && v.value > v.lower)
          score = d;
        if (score == 0.0)
          continue;
        if (bland) {
          entering = j;
          d_enter = d;
          break;
        }
        if (score > best) {
          best = score;
          entering = j;
          d_enter = d;
        }
      }
      if (entering == vars_.size())
        return LpStatus::optimal;

      auto &q = vars_[entering];
      const double dir = d_enter < 0.0 ? 1.0 : -1.0;
      ftran(q.column, alpha);

      // Harris ratio test, pass 1: relaxed bound.
      double theta_max = kInf;
      for (std::size_t r = 0; r < m_; ++r) {
        if (std::abs(alpha[r]) < 1e-9)
          continue;
        const auto &b = vars_[basis_[r]];
        const double rate = -dir * alpha[r];
        double t = kInf;
        if (rate < 0.0 && std::isfinite(b.lower))
          t = (x_basic_[r] - b.lower + ftol) / -rate;
        else if (rate > 0.0 && std::isfinite(b.upper))
          t = (b.upper - x_basic_[r] + ftol) / rate;
        theta_max = std::min(theta_max, t);
      }
      // Pass 2: among ratios within the relaxed bound, largest pivot.
      std::size_t leave = m_;
      double leave_t = kInf, leave_piv = 0.0;
      for (std::size_t r = 0; r < m_; ++r) {
        if (std::abs(alpha[r]) < 1e-9)
          continue;
        const auto &b = vars_[basis_[r]];
        const double rate = -dir * alpha[r];
        double t = kInf;
        if (rate < 0.0 && std::isfinite(b.lower))
          t = (x_basic_[r] - b.lower) / -rate;
        else if (rate > 0.0 && std::isfinite(b.upper))
          t = (b.upper - x_basic_[r]) / rate;
        if (!std::isfinite(t) || t > theta_max)
          continue;
        t = std::max(t, 0.0);
        const double piv = std::abs(alpha[r]);
        bool take = false;
        if (leave == m_)
          take = true;
        else if (bland)
          take = t < leave_t || (t == leave_t && basis_[r] < basis_[leave]);
        else
          take = piv > leave_piv || (piv == leave_piv && basis_[r] < basis_[leave]);
        if (take) {
          leave = r;
          leave_t = t;
          leave_piv = piv;
        }
      }
      const double own_range = q.upper - q.lower;
      if (leave == m_ && !std::isfinite(own_range))
        return LpStatus::unbounded;

      ++iterations_;
      if (leave == m_ || own_range <= leave_t) {
        // Bound flip: the entering variable crosses to its other bound.
        const double t = own_range;
        for (std::size_t r = 0; r < m_; ++r)
          x_basic_[r] -= dir * t * alpha[r];
        q.value = dir > 0.0 ? q.upper : q.lower;
        degenerate_run = 0;
        continue;
      }

      const double t = leave_t;
      degenerate_run = t <= 1e-12 ? degenerate_run + 1 : 0;
      if (std::abs(alpha[leave]) < Tolerances::pivot)
        throw Error(ErrorKind::NumericalFailure, "pivot below tolerance");
      for (std::size_t r = 0; r < m_; ++r)
        x_basic_[r] -= dir * t * alpha[r];
      auto &out = vars_[basis_[leave]];
      const double rate = -dir * alpha[leave];
      out.basic = false;
      out.value = rate < 0.0 ? out.lower : out.upper;
      if (phase1 && out.artificial) {
        out.upper = 0.0;
        out.value = 0.0;
      }
      q.basic = true;
      q.basis_row = leave;
      x_basic_[leave] = q.value + dir * t;
      basis_[leave] = entering;

      eta_update(leave, alpha, nz);
      // y' = y + d_q * (new row `leave` of the inverse).
      for (std::size_t j = 0; j < m_; ++j)
        if (const double b = inv(leave, j); b != 0.0)
          y[j] += d_enter * b;
      if (++pivots_since_refactor_ >= refactor_period) {
        refactor();
        y = compute_duals(phase1);
      } else if (pivots_since_refactor_ % 64 == 0) {
        recompute_basic_values();
        y = compute_duals(phase1);
      }
    }
  }

  std::size_t m_;
  std::vector<double> rhs_;
  std::vector<Variable> vars_;
  std::vector<std::size_t> basis_;
  std::vector<double> x_basic_;
  std::vector<double> binv_; // column-major
  bool phase1_done_ = false;
  LpStatus status_ = LpStatus::infeasible;
  std::size_t iterations_ = 0;
  std::size_t refactorizations_ = 0;
  std::size_t pivots_since_refactor_ = 0;
};

/// Backend interface so callers can swap LP engines.
class LpSolver {
public:
  virtual ~LpSolver() = default;
  virtual LpSolution solve(const LinearProgram &lp) const = 0;
};

class DenseSimplexSolver final : public LpSolver {
public:
  LpSolution solve(const LinearProgram &lp) const override {
    lp.validate();
    BoundedSimplex simplex(lp.eq_rhs);
    for (std::size_t j = 0; j < lp.objective.size(); ++j) {
      SparseColumn col;
      for (std::size_t r = 0; r < lp.eq_lhs.rows(); ++r)
        if (lp.eq_lhs(r, j) != 0.0)
          col.push_back({r, lp.eq_lhs(r, j)});
      simplex.add_column(lp.objective[j], std::move(col), lp.lower[j], lp.upper[j]);
    }
    LpSolution out;
    out.status = simplex.solve();
    out.iterations = simplex.iterations();
    if (out.status == LpStatus::optimal) {
      out.x = simplex.values();
      out.objective_value = simplex.objective();
      out.duals = simplex.row_duals();
    }
    return out;
  }
};

inline LpSolution solve_lp(const LinearProgram &lp) {
  return DenseSimplexSolver{}.solve(lp);
}

} // namespace sortition::numerics
