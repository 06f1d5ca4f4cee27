// Copyright 2026 The ESPP Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

/// \file
/// \brief Small dense convex QP solvers.
///
/// Problems have the form
///
///     minimize   1/2 z^T H z + f^T z
///     subject to G z <= h,  lb <= z <= ub
///
/// `solve` is the Goldfarb-Idnani dual active-set method and handles any
/// number of inequality rows; `solve_box` enumerates every lower/upper/free
/// assignment and is meant for the four clothoid coefficients.

#ifndef ESPP__QP_CORE_HPP_
#define ESPP__QP_CORE_HPP_

#include "espp/types.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace espp::qp
{
using Eigen::MatrixXd;
using Eigen::VectorXd;

class QpError : public EsppError
{
public:
  using EsppError::EsppError;
};

struct QpProblem
{
  MatrixXd H;
  VectorXd f;
  MatrixXd G;  // may have zero rows
  VectorXd h;
  std::optional<VectorXd> lb;
  std::optional<VectorXd> ub;

  Eigen::Index num_vars() const { return f.size(); }

  void validate() const
  {
    const auto n = num_vars();
    if (H.rows() != n || H.cols() != n) {
      throw QpError("H must be n x n with n = dim(f)");
    }
    if ((H - H.transpose()).cwiseAbs().maxCoeff() > 1e-10 * std::max(1.0, H.cwiseAbs().maxCoeff())) {
      throw QpError("H is not symmetric");
    }
    if (G.rows() != h.size() || (G.rows() > 0 && G.cols() != n)) {
      throw QpError("G/h dimensions inconsistent");
    }
    if ((lb && lb->size() != n) || (ub && ub->size() != n)) {
      throw QpError("bound dimensions inconsistent");
    }
  }

  double objective(const VectorXd & z) const { return 0.5 * z.dot(H * z) + f.dot(z); }

  /// All inequalities stacked as A z <= b: G rows, then upper bounds, then lower bounds.
  void stacked(MatrixXd & A, VectorXd & b) const
  {
    const auto n = num_vars();
    const Eigen::Index m = G.rows() + (ub ? n : 0) + (lb ? n : 0);
    A.setZero(m, n);
    b.setZero(m);
    Eigen::Index row = 0;
    if (G.rows() > 0) {
      A.topRows(G.rows()) = G;
      b.head(G.rows()) = h;
      row = G.rows();
    }
    if (ub) {
      for (Eigen::Index i = 0; i < n; ++i, ++row) {
        A(row, i) = 1.0;
        b(row) = (*ub)(i);
      }
    }
    if (lb) {
      for (Eigen::Index i = 0; i < n; ++i, ++row) {
        A(row, i) = -1.0;
        b(row) = -(*lb)(i);
      }
    }
  }
};

enum class QpStatus { Optimal, Infeasible, MaxIterations };

inline const char * to_string(QpStatus s)
{
  switch (s) {
    case QpStatus::Optimal:
      return "optimal";
    case QpStatus::Infeasible:
      return "infeasible";
    case QpStatus::MaxIterations:
      return "max_iterations";
  }
  return "unknown";
}

struct KktResiduals
{
  double stationarity{0.0};
  double primal{0.0};
  double complementarity{0.0};
  double dual{0.0};  // most negative multiplier, reported as a positive number
};

struct QpSolution
{
  VectorXd z;
  VectorXd multipliers;  // one per stacked inequality row
  QpStatus status{QpStatus::Infeasible};
  KktResiduals kkt;
  double objective{0.0};
  int iterations{0};
  int active_count{0};
};

/// KKT residuals of (z, lambda) for the stacked inequality system, using
/// the problem's own (unregularized) Hessian.
inline KktResiduals kkt_residuals(const QpProblem & p, const VectorXd & z, const VectorXd & lambda)
{
  MatrixXd A;
  VectorXd b;
  p.stacked(A, b);
  KktResiduals r;
  VectorXd grad = p.H * z + p.f;
  if (A.rows() > 0) {
    grad += A.transpose() * lambda;
    const VectorXd slack = A * z - b;
    r.primal = std::max(0.0, slack.maxCoeff());
    r.complementarity = (lambda.array() * slack.array()).abs().maxCoeff();
    r.dual = std::max(0.0, -lambda.minCoeff());
  }
  r.stationarity = grad.size() > 0 ? grad.cwiseAbs().maxCoeff() : 0.0;
  return r;
}

namespace detail
{
/// Hessian regularization: PSD matrices whose smallest eigenvalue is below
/// 1e-8 are lifted so that it becomes 1e-8.
inline MatrixXd regularized(const MatrixXd & H)
{
  constexpr double kFloor = 1e-8;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(H, Eigen::EigenvaluesOnly);
  const double min_eig = es.eigenvalues().minCoeff();
  if (min_eig < -kFloor * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff())) {
    throw QpError("H is not positive semidefinite (min eigenvalue " + std::to_string(min_eig) + ")");
  }
  if (min_eig >= kFloor) {
    return H;
  }
  return H + (kFloor - min_eig) * MatrixXd::Identity(H.rows(), H.cols());
}

// Givens-based factor updates follow Goldfarb & Idnani (1983) in the
// formulation popularized by QuadProg++.
inline bool add_constraint(MatrixXd & R, MatrixXd & J, VectorXd & d, int & iq, double & r_norm)
{
  const int n = static_cast<int>(d.size());
  for (int j = n - 1; j >= iq + 1; --j) {
    double cc = d(j - 1);
    double ss = d(j);
    const double hh = std::hypot(cc, ss);
    if (hh == 0.0) {
      continue;
    }
    d(j) = 0.0;
    ss /= hh;
    cc /= hh;
    if (cc < 0.0) {
      cc = -cc;
      ss = -ss;
      d(j - 1) = -hh;
    } else {
      d(j - 1) = hh;
    }
    const double xny = ss / (1.0 + cc);
    for (int k = 0; k < n; ++k) {
      const double t1 = J(k, j - 1);
      const double t2 = J(k, j);
      J(k, j - 1) = t1 * cc + t2 * ss;
      J(k, j) = xny * (t1 + J(k, j - 1)) - t2;
    }
  }
  ++iq;
  for (int i = 0; i < iq; ++i) {
    R(i, iq - 1) = d(i);
  }
  if (std::abs(d(iq - 1)) <= std::numeric_limits<double>::epsilon() * r_norm) {
    return false;
  }
  r_norm = std::max(r_norm, std::abs(d(iq - 1)));
  return true;
}

inline void delete_constraint(
  MatrixXd & R, MatrixXd & J, std::vector<int> & active, VectorXd & u, int & iq, int l)
{
  const int n = static_cast<int>(R.rows());
  int qq = -1;
  for (int i = 0; i < iq; ++i) {
    if (active[i] == l) {
      qq = i;
      break;
    }
  }
  if (qq < 0) {
    return;
  }
  for (int i = qq; i < iq - 1; ++i) {
    active[i] = active[i + 1];
    u(i) = u(i + 1);
    R.col(i) = R.col(i + 1);
  }
  R.col(iq - 1).setZero();
  --iq;
  if (iq == 0) {
    return;
  }
  for (int j = qq; j < iq; ++j) {
    double cc = R(j, j);
    double ss = R(j + 1, j);
    const double hh = std::hypot(cc, ss);
    if (hh == 0.0) {
      continue;
    }
    cc /= hh;
    ss /= hh;
    R(j + 1, j) = 0.0;
    if (cc < 0.0) {
      R(j, j) = -hh;
      cc = -cc;
      ss = -ss;
    } else {
      R(j, j) = hh;
    }
    const double xny = ss / (1.0 + cc);
    for (int k = j + 1; k < iq; ++k) {
      const double t1 = R(j, k);
      const double t2 = R(j + 1, k);
      R(j, k) = t1 * cc + t2 * ss;
      R(j + 1, k) = xny * (t1 + R(j, k)) - t2;
    }
    for (int k = 0; k < n; ++k) {
      const double t1 = J(k, j);
      const double t2 = J(k, j + 1);
      J(k, j) = t1 * cc + t2 * ss;
      J(k, j + 1) = xny * (J(k, j) + t1) - t2;
    }
  }
}
}  // namespace detail

/// Goldfarb-Idnani dual active-set solve. Constraint index order fixes
/// every tie-break, so repeated solves are bit-identical.
inline QpSolution solve(const QpProblem & problem)
{
  problem.validate();
  const int n = static_cast<int>(problem.num_vars());
  MatrixXd A;
  VectorXd b;
  problem.stacked(A, b);
  const int m = static_cast<int>(A.rows());

  const MatrixXd Hreg = detail::regularized(problem.H);
  Eigen::LLT<MatrixXd> llt(Hreg);
  if (llt.info() != Eigen::Success) {
    throw QpError("Cholesky factorization of H failed");
  }
  const MatrixXd L = llt.matrixL();
  // J = L^{-T}
  MatrixXd J = L.transpose().triangularView<Eigen::Upper>().solve(MatrixXd::Identity(n, n));
  MatrixXd R = MatrixXd::Zero(n, n);
  VectorXd u = VectorXd::Zero(n + 1);
  std::vector<int> active(n + 1, -1);
  std::vector<bool> is_active(m, false);
  int iq = 0;
  double r_norm = 1.0;

  VectorXd x = -llt.solve(problem.f);
  VectorXd d(n);
  VectorXd z(n);
  VectorXd r(n);

  QpSolution sol;
  const int max_iter = 50 * (n + m) + 100;
  int iter = 0;
  const double feas_tol = 1e-12;

  // Constraint value in the "s >= 0" convention.
  auto slack = [&](int i) { return b(i) - A.row(i).dot(x); };

  bool done = false;
  while (!done) {
    if (++iter > max_iter) {
      sol.status = QpStatus::MaxIterations;
      break;
    }
    int p = -1;
    double worst = 0.0;
    for (int i = 0; i < m; ++i) {
      if (is_active[i]) {
        continue;
      }
      const double s = slack(i);
      const double scale = 1.0 + std::abs(b(i));
      if (s < -feas_tol * scale && s < worst) {
        worst = s;
        p = i;
      }
    }
    if (p < 0) {
      sol.status = QpStatus::Optimal;
      break;
    }
    const VectorXd np = -A.row(p).transpose();  // normal in the s >= 0 convention
    double u_plus = 0.0;

    // Step 2a: iterate until constraint p becomes active.
    while (true) {
      if (++iter > max_iter) {
        sol.status = QpStatus::MaxIterations;
        done = true;
        break;
      }
      d = J.transpose() * np;
      z.setZero();
      for (int j = iq; j < n; ++j) {
        z += J.col(j) * d(j);
      }
      for (int i = iq - 1; i >= 0; --i) {
        double sum = d(i);
        for (int j = i + 1; j < iq; ++j) {
          sum -= R(i, j) * r(j);
        }
        r(i) = sum / R(i, i);
      }
      double t1 = std::numeric_limits<double>::infinity();
      int l = -1;
      for (int k = 0; k < iq; ++k) {
        if (r(k) > 0.0) {
          const double ratio = u(k) / r(k);
          if (ratio < t1) {
            t1 = ratio;
            l = active[k];
          }
        }
      }
      double t2 = std::numeric_limits<double>::infinity();
      const double zn = z.dot(np);
      if (z.cwiseAbs().maxCoeff() > std::numeric_limits<double>::epsilon() && zn > 0.0) {
        t2 = -slack(p) / zn;
      }
      const double t = std::min(t1, t2);
      if (!std::isfinite(t)) {
        sol.status = QpStatus::Infeasible;
        done = true;
        break;
      }
      if (!std::isfinite(t2)) {
        for (int k = 0; k < iq; ++k) {
          u(k) -= t * r(k);
        }
        u_plus += t;
        is_active[l] = false;
        detail::delete_constraint(R, J, active, u, iq, l);
        continue;
      }
      x += t * z;
      for (int k = 0; k < iq; ++k) {
        u(k) -= t * r(k);
      }
      u_plus += t;
      if (t == t2) {
        d = J.transpose() * np;
        if (!detail::add_constraint(R, J, d, iq, r_norm)) {
          // Linearly dependent with the active set: the constraint system
          // cannot be satisfied together with the current active rows.
          --iq;
          sol.status = QpStatus::Infeasible;
          done = true;
          break;
        }
        active[iq - 1] = p;
        u(iq - 1) = u_plus;
        is_active[p] = true;
        break;
      }
      is_active[l] = false;
      detail::delete_constraint(R, J, active, u, iq, l);
    }
  }

  sol.z = x;
  sol.multipliers = VectorXd::Zero(m);
  for (int k = 0; k < iq; ++k) {
    sol.multipliers(active[k]) = u(k);
  }
  if (sol.status == QpStatus::Optimal && iq > 0 && (Hreg - problem.H).cwiseAbs().maxCoeff() > 0.0) {
    // Re-solve the active-set KKT system with the original Hessian to remove
    // the bias introduced by the regularization shift.
    MatrixXd K = MatrixXd::Zero(n + iq, n + iq);
    VectorXd rhs = VectorXd::Zero(n + iq);
    K.topLeftCorner(n, n) = problem.H;
    rhs.head(n) = -problem.f;
    for (int k = 0; k < iq; ++k) {
      K.block(n + k, 0, 1, n) = A.row(active[k]);
      K.block(0, n + k, n, 1) = A.row(active[k]).transpose();
      rhs(n + k) = b(active[k]);
    }
    Eigen::FullPivLU<MatrixXd> lu(K);
    if (lu.isInvertible()) {
      const VectorXd kkt_sol = lu.solve(rhs);
      const VectorXd zp = kkt_sol.head(n);
      const VectorXd lp = kkt_sol.tail(iq);
      const bool primal_ok = m == 0 || (A * zp - b).maxCoeff() <= 1e-9 * (1.0 + b.cwiseAbs().maxCoeff());
      if (primal_ok && lp.minCoeff() >= 0.0) {
        sol.z = zp;
        x = zp;
        for (int k = 0; k < iq; ++k) {
          sol.multipliers(active[k]) = lp(k);
        }
      }
    }
  }
  sol.iterations = iter;
  sol.active_count = iq;
  sol.objective = problem.objective(x);
  sol.kkt = kkt_residuals(problem, x, sol.multipliers);
  return sol;
}

/// Exact box-constrained solve by enumerating every lower/upper/free
/// assignment (3^n). Intended for n <= 6; the KKT-consistent assignment with
/// the lowest objective wins, earlier assignments win ties.
inline QpSolution solve_box(const MatrixXd & H, const VectorXd & f, const VectorXd & lb, const VectorXd & ub)
{
  const int n = static_cast<int>(f.size());
  if (lb.size() != n || ub.size() != n || H.rows() != n || H.cols() != n) {
    throw QpError("solve_box: dimension mismatch");
  }
  if (n > 8) {
    throw QpError("solve_box: enumeration limited to n <= 8");
  }
  for (int i = 0; i < n; ++i) {
    if (lb(i) > ub(i)) {
      throw QpError("solve_box: infeasible box at index " + std::to_string(i));
    }
  }
  QpProblem problem{H, f, MatrixXd(0, n), VectorXd(0), lb, ub};
  problem.validate();

  int total = 1;
  for (int i = 0; i < n; ++i) {
    total *= 3;
  }
  constexpr double tol = 1e-9;
  std::optional<VectorXd> best;
  double best_obj = std::numeric_limits<double>::infinity();
  int evaluated = 0;
  for (int code = 0; code < total; ++code) {
    // state: 0 free, 1 lower, 2 upper
    std::vector<int> state(n);
    int c = code;
    for (int i = 0; i < n; ++i) {
      state[i] = c % 3;
      c /= 3;
    }
    VectorXd zc = VectorXd::Zero(n);
    std::vector<int> free_idx;
    for (int i = 0; i < n; ++i) {
      if (state[i] == 1) {
        zc(i) = lb(i);
      } else if (state[i] == 2) {
        zc(i) = ub(i);
      } else {
        free_idx.push_back(i);
      }
    }
    const int nf = static_cast<int>(free_idx.size());
    if (nf > 0) {
      MatrixXd Hff(nf, nf);
      VectorXd rhs(nf);
      for (int a = 0; a < nf; ++a) {
        rhs(a) = -f(free_idx[a]);
        for (int bi = 0; bi < n; ++bi) {
          if (state[bi] != 0) {
            rhs(a) -= H(free_idx[a], bi) * zc(bi);
          }
        }
        for (int bb = 0; bb < nf; ++bb) {
          Hff(a, bb) = H(free_idx[a], free_idx[bb]);
        }
      }
      Eigen::FullPivLU<MatrixXd> lu(Hff);
      if (!lu.isInvertible()) {
        continue;
      }
      const VectorXd zf = lu.solve(rhs);
      for (int a = 0; a < nf; ++a) {
        zc(free_idx[a]) = zf(a);
      }
    }
    ++evaluated;
    const VectorXd g = H * zc + f;
    bool ok = true;
    for (int i = 0; i < n && ok; ++i) {
      const double scale = tol * (1.0 + std::abs(g(i)) + std::abs(f(i)));
      if (state[i] == 0) {
        ok = zc(i) >= lb(i) - tol * (1.0 + std::abs(lb(i))) && zc(i) <= ub(i) + tol * (1.0 + std::abs(ub(i)));
      } else if (state[i] == 1) {
        ok = g(i) >= -scale;
      } else {
        ok = g(i) <= scale;
      }
    }
    if (!ok) {
      continue;
    }
    const double obj = problem.objective(zc);
    if (obj < best_obj - 1e-15 * (1.0 + std::abs(obj))) {
      best_obj = obj;
      best = zc;
    }
  }
  if (!best) {
    throw QpError("solve_box: no KKT point found (singular H?)");
  }
  QpSolution sol;
  sol.z = best->cwiseMax(lb).cwiseMin(ub);
  sol.status = QpStatus::Optimal;
  sol.objective = problem.objective(sol.z);
  sol.iterations = evaluated;
  // Multipliers: stacked order is upper bounds then lower bounds.
  const VectorXd g = H * sol.z + f;
  sol.multipliers = VectorXd::Zero(2 * n);
  for (int i = 0; i < n; ++i) {
    if (sol.z(i) >= ub(i) && g(i) < 0.0) {
      sol.multipliers(i) = -g(i);
      ++sol.active_count;
    } else if (sol.z(i) <= lb(i) && g(i) > 0.0) {
      sol.multipliers(n + i) = g(i);
      ++sol.active_count;
    }
  }
  sol.kkt = kkt_residuals(problem, sol.z, sol.multipliers);
  return sol;
}

/// Grid search over the bound box for test cross-checks. Requires both
/// bounds and n <= 4. Returns nullopt when no grid point is feasible.
inline std::optional<VectorXd> brute_force_oracle(const QpProblem & problem, double resolution)
{
  problem.validate();
  const auto n = problem.num_vars();
  if (n > 4 || !problem.lb || !problem.ub) {
    throw QpError("brute_force_oracle needs a bounded box and n <= 4");
  }
  if (!(resolution > 0.0)) {
    throw QpError("brute_force_oracle: resolution must be positive");
  }
  std::vector<int> counts(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    counts[i] = static_cast<int>(std::floor(((*problem.ub)(i) - (*problem.lb)(i)) / resolution + 1e-9)) + 1;
  }
  std::vector<int> idx(n, 0);
  std::optional<VectorXd> best;
  double best_obj = std::numeric_limits<double>::infinity();
  VectorXd zc(n);
  while (true) {
    for (Eigen::Index i = 0; i < n; ++i) {
      zc(i) = (*problem.lb)(i) + idx[i] * resolution;
    }
    bool feasible = true;
    if (problem.G.rows() > 0) {
      feasible = ((problem.G * zc - problem.h).array() <= 1e-12).all();
    }
    if (feasible) {
      const double obj = problem.objective(zc);
      if (obj < best_obj) {
        best_obj = obj;
        best = zc;
      }
    }
    Eigen::Index k = 0;
    while (k < n && ++idx[k] >= counts[k]) {
      idx[k] = 0;
      ++k;
    }
    if (k == n) {
      break;
    }
  }
  return best;
}

}  // namespace espp::qp

#endif  // ESPP__QP_CORE_HPP_
