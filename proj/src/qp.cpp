#include "thermhe/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "thermhe/error.hpp"

namespace thermhe {
namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Working {
  std::vector<ActiveConstraint> items;

  bool contains(int row) const {
    return std::any_of(items.begin(), items.end(),
                       [&](const ActiveConstraint& a) { return a.row == row; });
  }
};

// Equality-constrained subproblem via one dense KKT factorization:
//   [H A'] [d]   [-r]
//   [A 0 ] [l] = [ 0]
bool solve_eqp(const MatrixXd& h, const VectorXd& r, const MatrixXd& a, VectorXd& d, VectorXd& l) {
  const Index n = h.rows();
  const Index m = a.rows();
  if (m == 0) {
    d = h.llt().solve(-r);
    l.resize(0);
    return d.allFinite();
  }
  MatrixXd kkt = MatrixXd::Zero(n + m, n + m);
  kkt.topLeftCorner(n, n) = h;
  kkt.topRightCorner(n, m) = a.transpose();
  kkt.bottomLeftCorner(m, n) = a;
  VectorXd rhs = VectorXd::Zero(n + m);
  rhs.head(n) = -r;
  Eigen::FullPivLU<MatrixXd> lu(kkt);
  if (!lu.isInvertible()) return false;
  const VectorXd sol = lu.solve(rhs);
  d = sol.head(n);
  l = sol.tail(m);
  return sol.allFinite();
}

}  // namespace

QpResult solve_qp_box(const BoxQp& qp, const Eigen::VectorXd& z0, int max_iters, double kkt_tol) {
  const Index n = qp.hessian.rows();
  const Index m = qp.constraints.rows();
  if (qp.hessian.cols() != n || qp.gradient.size() != n)
    throw QpError("solve_qp_box: inconsistent objective dimensions");
  if (qp.constraints.cols() != n || qp.lower.size() != m || qp.upper.size() != m)
    throw QpError("solve_qp_box: inconsistent constraint dimensions");
  if (!qp.hessian.isApprox(qp.hessian.transpose(), 1e-10))
    throw QpError("solve_qp_box: hessian must be symmetric");
  for (Index j = 0; j < m; ++j)
    if (qp.lower(j) > qp.upper(j)) throw QpError("solve_qp_box: empty constraint interval");
  if (z0.size() != n) throw QpError("solve_qp_box: bad start dimension");

  const VectorXd cz0 = qp.constraints * z0;
  for (Index j = 0; j < m; ++j) {
    const double tol = 1e-8 * (1.0 + std::abs(cz0(j)));
    if (cz0(j) < qp.lower(j) - tol || cz0(j) > qp.upper(j) + tol)
      throw QpError("solve_qp_box: infeasible start point");
  }

  VectorXd z = z0;
  Working ws;
  QpResult res;

  auto working_rows = [&]() {
    MatrixXd a(static_cast<Index>(ws.items.size()), n);
    for (size_t i = 0; i < ws.items.size(); ++i) a.row(static_cast<Index>(i)) = qp.constraints.row(ws.items[i].row);
    return a;
  };

  int it = 0;
  while (it < max_iters) {
    ++it;
    const VectorXd r = qp.hessian * z + qp.gradient;
    VectorXd d, lambda;
    if (!solve_eqp(qp.hessian, r, working_rows(), d, lambda)) {
      // Degenerate working set; retire the newest row and retry.
      if (ws.items.empty()) throw QpError("solve_qp_box: singular KKT with empty working set");
      ws.items.pop_back();
      continue;
    }

    const double step_tol = 1e-12 * (1.0 + z.cwiseAbs().maxCoeff());
    if (d.cwiseAbs().maxCoeff() <= step_tol) {
      // Stationary on the working set; check multiplier signs. With the KKT
      // convention above, r = -A'lambda, so lower-active rows need
      // lambda <= 0 and upper-active rows need lambda >= 0.
      int worst = -1;
      double worst_mu = -1e-10;
      for (size_t i = 0; i < ws.items.size(); ++i) {
        const double mu = ws.items[i].at_upper ? lambda(static_cast<Index>(i))
                                               : -lambda(static_cast<Index>(i));
        ws.items[i].multiplier = mu;
        if (mu < worst_mu) {
          worst_mu = mu;
          worst = static_cast<int>(i);
        }
      }
      if (worst < 0) {
        res.converged = true;
        break;
      }
      ws.items.erase(ws.items.begin() + worst);
      continue;
    }

    // Ratio test against the inactive constraint sides.
    double alpha = 1.0;
    int block_row = -1;
    bool block_upper = false;
    const VectorXd cd = qp.constraints * d;
    const VectorXd cz = qp.constraints * z;
    for (Index j = 0; j < m; ++j) {
      if (ws.contains(static_cast<int>(j))) continue;
      if (cd(j) < -1e-13 && qp.lower(j) > -kInf) {
        const double a = std::max(0.0, (qp.lower(j) - cz(j)) / cd(j));
        if (a < alpha - 1e-15) {
          alpha = a;
          block_row = static_cast<int>(j);
          block_upper = false;
        }
      } else if (cd(j) > 1e-13 && qp.upper(j) < kInf) {
        const double a = std::max(0.0, (qp.upper(j) - cz(j)) / cd(j));
        if (a < alpha - 1e-15) {
          alpha = a;
          block_row = static_cast<int>(j);
          block_upper = true;
        }
      }
    }

    z += alpha * d;
    if (block_row >= 0) ws.items.push_back({block_row, block_upper, 0.0});
  }

  res.z = z;
  res.iterations = it;
  res.active = ws.items;

  // KKT residual: stationarity against the working-set multipliers plus
  // primal feasibility and activity defects.
  VectorXd stat = qp.hessian * z + qp.gradient;
  for (const auto& a : ws.items) {
    const double nu = a.at_upper ? -a.multiplier : a.multiplier;
    stat -= nu * qp.constraints.row(a.row).transpose();
  }
  double resid = stat.cwiseAbs().maxCoeff();
  const VectorXd cz = qp.constraints * z;
  for (Index j = 0; j < m; ++j) {
    if (qp.lower(j) > -kInf) resid = std::max(resid, qp.lower(j) - cz(j));
    if (qp.upper(j) < kInf) resid = std::max(resid, cz(j) - qp.upper(j));
  }
  for (const auto& a : ws.items) {
    const double target = a.at_upper ? qp.upper(a.row) : qp.lower(a.row);
    resid = std::max(resid, std::abs(cz(a.row) - target));
    resid = std::max(resid, -a.multiplier);
  }
  res.kkt_residual = resid;
  if (resid > kkt_tol) res.converged = false;
  return res;
}

}  // namespace thermhe
