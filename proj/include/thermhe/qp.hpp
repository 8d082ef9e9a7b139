#pragma once

#include <Eigen/Dense>

#include <vector>

namespace thermhe {

// Strictly convex quadratic program with two-sided linear constraints:
//   min 0.5 z'Hz + g'z   s.t.  lower <= C z <= upper
// Infinite bounds mark one-sided rows.
struct BoxQp {
  Eigen::MatrixXd hessian;      // n x n, symmetric positive definite
  Eigen::VectorXd gradient;     // n
  Eigen::MatrixXd constraints;  // m x n
  Eigen::VectorXd lower, upper; // m
};

struct ActiveConstraint {
  int row = -1;
  bool at_upper = false;
  double multiplier = 0.0;  // non-negative in the convention of the active side
};

struct QpResult {
  Eigen::VectorXd z;
  std::vector<ActiveConstraint> active;
  double kkt_residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Primal active-set method with a dense KKT factorization per working set.
// The start point z0 must satisfy the constraints; the iterates stay
// feasible throughout, so hitting the iteration cap still returns a usable
// point flagged converged = false.
QpResult solve_qp_box(const BoxQp& qp, const Eigen::VectorXd& z0, int max_iters, double kkt_tol);

}  // namespace thermhe
