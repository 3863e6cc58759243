#pragma once

#include <string>

#include <Eigen/Dense>

namespace dynrec {

/// minimize 0.5 xᵀHx + cᵀx  s.t.  A x = b,  lower ≤ x ≤ upper.
struct QpProblem {
  Eigen::MatrixXd H;
  Eigen::VectorXd c;
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
};

struct QpResult {
  Eigen::VectorXd x;
  bool converged = false;
  int iterations = 0;
  double kkt_residual = 0.0;
  std::string diagnostics;
};

struct QpOptions {
  int max_iterations = 0;  // 0 picks a size-based cap
  double tolerance = 1e-11;
};

/// Primal active-set method (null-space steps). `x0` must be feasible.
QpResult solve_qp(const QpProblem& problem, const Eigen::VectorXd& x0, const QpOptions& options = {});

/// KKT residual of a candidate point: max of stationarity (with least-squares multipliers),
/// primal infeasibility and dual infeasibility.
double kkt_residual(const QpProblem& problem, const Eigen::VectorXd& x, double active_tol = 1e-9);

}  // namespace dynrec
