#include "qp.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "error.hpp"

namespace dynrec {

namespace {

enum class Bound { kFree, kLower, kUpper };

Eigen::MatrixXd null_space(const Eigen::MatrixXd& a_free, Eigen::Index nfree) {
  if (a_free.rows() == 0) return Eigen::MatrixXd::Identity(nfree, nfree);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a_free.transpose());
  qr.setThreshold(1e-12);
  const Eigen::Index r = qr.rank();
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(nfree, nfree);
  return q.rightCols(nfree - r);
}

// Multipliers ν of the equality rows from the free-variable stationarity equations.
Eigen::VectorXd equality_multipliers(const QpProblem& p, const Eigen::VectorXd& g, const std::vector<Bound>& state) {
  std::vector<Eigen::Index> free;
  for (Eigen::Index i = 0; i < g.size(); ++i)
    if (state[std::size_t(i)] == Bound::kFree) free.push_back(i);
  const Eigen::Index m = p.A.rows();
  if (m == 0) return Eigen::VectorXd();
  if (free.empty()) {
    // All variables bound: use every coordinate, giving the least-squares dual.
    return p.A.transpose().completeOrthogonalDecomposition().solve(-g);
  }
  Eigen::MatrixXd at(free.size(), m);
  Eigen::VectorXd rhs(free.size());
  for (std::size_t k = 0; k < free.size(); ++k) {
    at.row(Eigen::Index(k)) = p.A.col(free[k]).transpose();
    rhs(Eigen::Index(k)) = -g(free[k]);
  }
  return at.completeOrthogonalDecomposition().solve(rhs);
}

// Lawson-Hanson: min ||C z - d|| subject to z >= 0.
Eigen::VectorXd nnls(const Eigen::MatrixXd& c, const Eigen::VectorXd& d) {
  const Eigen::Index k = c.cols();
  Eigen::VectorXd z = Eigen::VectorXd::Zero(k);
  std::vector<bool> passive(std::size_t(k), false);
  const double tol = 1e-14 * std::max(1.0, c.cwiseAbs().maxCoeff()) * std::max(1.0, d.cwiseAbs().maxCoeff());
  for (int outer = 0; outer < 3 * int(k) + 10; ++outer) {
    Eigen::VectorXd w = c.transpose() * (d - c * z);
    Eigen::Index best = -1;
    double best_w = tol;
    for (Eigen::Index j = 0; j < k; ++j)
      if (!passive[std::size_t(j)] && w(j) > best_w) {
        best_w = w(j);
        best = j;
      }
    if (best < 0) break;
    passive[std::size_t(best)] = true;
    for (int inner = 0; inner < 3 * int(k) + 10; ++inner) {
      std::vector<Eigen::Index> idx;
      for (Eigen::Index j = 0; j < k; ++j)
        if (passive[std::size_t(j)]) idx.push_back(j);
      Eigen::MatrixXd cp(c.rows(), Eigen::Index(idx.size()));
      for (std::size_t a = 0; a < idx.size(); ++a) cp.col(Eigen::Index(a)) = c.col(idx[a]);
      Eigen::VectorXd sp = cp.completeOrthogonalDecomposition().solve(d);
      bool feasible = true;
      for (Eigen::Index a = 0; a < sp.size(); ++a) feasible = feasible && sp(a) > 0.0;
      if (feasible) {
        z.setZero();
        for (std::size_t a = 0; a < idx.size(); ++a) z(idx[a]) = sp(Eigen::Index(a));
        break;
      }
      double alpha = 1.0;
      for (std::size_t a = 0; a < idx.size(); ++a)
        if (sp(Eigen::Index(a)) <= 0.0) alpha = std::min(alpha, z(idx[a]) / (z(idx[a]) - sp(Eigen::Index(a))));
      for (std::size_t a = 0; a < idx.size(); ++a) {
        z(idx[a]) += alpha * (sp(Eigen::Index(a)) - z(idx[a]));
        if (z(idx[a]) <= 1e-300) {
          z(idx[a]) = 0.0;
          passive[std::size_t(idx[a])] = false;
        }
      }
    }
  }
  return z;
}

}  // namespace

double kkt_residual(const QpProblem& p, const Eigen::VectorXd& x, double active_tol) {
  const Eigen::Index n = x.size();
  const Eigen::Index m = p.A.rows();
  const Eigen::VectorXd g = p.H * x + p.c;
  double res = 0.0;
  std::vector<Eigen::Index> lower, upper;
  for (Eigen::Index i = 0; i < n; ++i) {
    res = std::max({res, p.lower(i) - x(i), x(i) - p.upper(i)});
    if (x(i) <= p.lower(i) + active_tol) lower.push_back(i);
    else if (x(i) >= p.upper(i) - active_tol) upper.push_back(i);
  }
  if (m > 0) res = std::max(res, (p.A * x - p.b).cwiseAbs().maxCoeff());
  // Stationarity g + Aᵀν - Σ_lower μ e_i + Σ_upper μ e_i = 0 with μ ≥ 0 and ν = ν⁺ - ν⁻.
  const Eigen::Index k = 2 * m + Eigen::Index(lower.size() + upper.size());
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(n, k);
  if (m > 0) {
    c.leftCols(m) = p.A.transpose();
    c.middleCols(m, m) = -p.A.transpose();
  }
  Eigen::Index col = 2 * m;
  for (auto i : lower) c(i, col++) = -1.0;
  for (auto i : upper) c(i, col++) = 1.0;
  const Eigen::VectorXd z = k > 0 ? nnls(c, -g) : Eigen::VectorXd();
  const Eigen::VectorXd r = k > 0 ? Eigen::VectorXd(c * z + g) : g;
  return std::max(res, r.cwiseAbs().maxCoeff());
}

QpResult solve_qp(const QpProblem& p, const Eigen::VectorXd& x0, const QpOptions& opt) {
  const Eigen::Index n = x0.size();
  if (p.H.rows() != n || p.H.cols() != n || p.c.size() != n || p.lower.size() != n || p.upper.size() != n ||
      p.A.cols() != n || p.b.size() != p.A.rows())
    fail(ErrorKind::kInvalidArgument, "solve_qp: inconsistent problem dimensions");
  const double feas_tol = 1e-9;
  for (Eigen::Index i = 0; i < n; ++i)
    if (x0(i) < p.lower(i) - feas_tol || x0(i) > p.upper(i) + feas_tol)
      fail(ErrorKind::kInvalidArgument, "solve_qp: starting point violates bounds");
  if (p.A.rows() > 0 && (p.A * x0 - p.b).cwiseAbs().maxCoeff() > 1e-8)
    fail(ErrorKind::kInvalidArgument, "solve_qp: starting point violates equality constraints");

  QpResult out;
  Eigen::VectorXd x = x0.cwiseMax(p.lower).cwiseMin(p.upper);
  std::vector<Bound> state(std::size_t(n), Bound::kFree);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (x(i) <= p.lower(i)) state[std::size_t(i)] = Bound::kLower;
    else if (x(i) >= p.upper(i)) state[std::size_t(i)] = Bound::kUpper;
  }
  const int cap = opt.max_iterations > 0 ? opt.max_iterations : int(50 * (n + p.A.rows()) + 100);
  const double scale = std::max(1.0, p.H.cwiseAbs().maxCoeff());

  for (int it = 0; it < cap; ++it) {
    out.iterations = it + 1;
    std::vector<Eigen::Index> free;
    for (Eigen::Index i = 0; i < n; ++i)
      if (state[std::size_t(i)] == Bound::kFree) free.push_back(i);
    const auto nf = Eigen::Index(free.size());
    const Eigen::VectorXd g = p.H * x + p.c;

    Eigen::VectorXd step = Eigen::VectorXd::Zero(n);
    if (nf > 0) {
      Eigen::MatrixXd a_free(p.A.rows(), nf);
      Eigen::MatrixXd h_free(nf, nf);
      Eigen::VectorXd g_free(nf);
      for (Eigen::Index a = 0; a < nf; ++a) {
        a_free.col(a) = p.A.col(free[std::size_t(a)]);
        g_free(a) = g(free[std::size_t(a)]);
        for (Eigen::Index b = 0; b < nf; ++b) h_free(a, b) = p.H(free[std::size_t(a)], free[std::size_t(b)]);
      }
      const Eigen::MatrixXd z = null_space(a_free, nf);
      if (z.cols() > 0) {
        const Eigen::MatrixXd rh = z.transpose() * h_free * z;
        const Eigen::VectorXd rg = z.transpose() * g_free;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(rh);
        Eigen::VectorXd u;
        if (ldlt.info() == Eigen::Success && ldlt.isPositive() &&
            ldlt.vectorD().minCoeff() > 1e-14 * std::max(1.0, ldlt.vectorD().maxCoeff())) {
          u = ldlt.solve(-rg);
        } else {
          u = rh.completeOrthogonalDecomposition().solve(-rg);
        }
        const Eigen::VectorXd pf = z * u;
        for (Eigen::Index a = 0; a < nf; ++a) step(free[std::size_t(a)]) = pf(a);
      }
    }

    if (step.lpNorm<Eigen::Infinity>() <= opt.tolerance * std::max(1.0, x.lpNorm<Eigen::Infinity>())) {
      // Stationary on the current face: check bound multipliers.
      Eigen::VectorXd nu = equality_multipliers(p, g, state);
      Eigen::VectorXd r = g;
      if (p.A.rows() > 0) r += p.A.transpose() * nu;
      Eigen::Index worst = -1;
      double worst_v = opt.tolerance * scale;
      for (Eigen::Index i = 0; i < n; ++i) {
        double v = 0.0;
        if (state[std::size_t(i)] == Bound::kLower) v = -r(i);
        else if (state[std::size_t(i)] == Bound::kUpper) v = r(i);
        if (v > worst_v) {
          worst_v = v;
          worst = i;
        }
      }
      if (worst < 0) {
        out.converged = true;
        break;
      }
      state[std::size_t(worst)] = Bound::kFree;
      continue;
    }

    double alpha = 1.0;
    Eigen::Index block = -1;
    Bound block_side = Bound::kFree;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (state[std::size_t(i)] != Bound::kFree) continue;
      if (step(i) < 0.0) {
        const double a = (p.lower(i) - x(i)) / step(i);
        if (a < alpha) {
          alpha = std::max(0.0, a);
          block = i;
          block_side = Bound::kLower;
        }
      } else if (step(i) > 0.0) {
        const double a = (p.upper(i) - x(i)) / step(i);
        if (a < alpha) {
          alpha = std::max(0.0, a);
          block = i;
          block_side = Bound::kUpper;
        }
      }
    }
    x += alpha * step;
    if (block >= 0) {
      state[std::size_t(block)] = block_side;
      x(block) = block_side == Bound::kLower ? p.lower(block) : p.upper(block);
    }
  }

  out.x = x;
  out.kkt_residual = kkt_residual(p, x);
  if (!out.converged)
    out.diagnostics = "active-set iteration cap " + std::to_string(cap) + " reached; KKT residual " +
                      std::to_string(out.kkt_residual);
  return out;
}

}  // namespace dynrec
