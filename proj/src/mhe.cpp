#include "thermhe/mhe.hpp"

#include <algorithm>
#include <cmath>

#include "thermhe/error.hpp"

namespace thermhe {
namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::Vector2d;
using Eigen::VectorXd;

DnnInput<double> node_input(const MheModel& model, const NodeParams& p, const MheState& x) {
  return {em_speed(model.vehicle, p.v_veh), p.t_em_total(), x.theta_w, x.theta_r};
}

// Diagonal weight of the arrival residual in flattened state order.
VectorXd arrival_weights(const MheConfig& cfg, Index dim) {
  VectorXd w = VectorXd::Constant(dim, cfg.weight_state_reg);
  w(0) = cfg.weight_arrival;
  w(1) = cfg.weight_arrival;
  return w;
}

}  // namespace

void MheConfig::validate() const {
  if (horizon < 1 || !(dk > 0)) throw SchemaError("mhe: horizon and dk must be positive");
  if (weight_arrival <= 0 || weight_noise <= 0 || weight_meas <= 0 || weight_state_reg <= 0)
    throw SchemaError("mhe: weights must be positive");
  if (!(theta_min < theta_max)) throw SchemaError("mhe: empty temperature box");
  if (max_sqp_iters < 1 || max_qp_iters < 1 || max_linesearch < 1)
    throw SchemaError("mhe: iteration limits must be positive");
  if (!(kkt_tol > 0) || !(step_tol > 0)) throw SchemaError("mhe: tolerances must be positive");
}

Eigen::VectorXd MheState::to_vector() const {
  VectorXd v(dim());
  v(0) = theta_w;
  v(1) = theta_r;
  v.segment(2, h.size()) = h;
  v.segment(2 + h.size(), c.size()) = c;
  return v;
}

MheState MheState::from_vector(const Eigen::VectorXd& v, Eigen::Index hidden_dim) {
  if (v.size() != 2 + 2 * hidden_dim) throw std::invalid_argument("MheState: bad vector size");
  MheState x;
  x.theta_w = v(0);
  x.theta_r = v(1);
  x.h = v.segment(2, hidden_dim);
  x.c = v.segment(2 + hidden_dim, hidden_dim);
  return x;
}

MheState MheState::zeros(Eigen::Index hidden_dim) {
  MheState x;
  x.h = VectorXd::Zero(hidden_dim);
  x.c = VectorXd::Zero(hidden_dim);
  return x;
}

MheState dynamics_step(const MheConfig& cfg, const MheModel& model, const NodeParams& p,
                       const MheState& x, const Eigen::Vector2d& w) {
  auto [rates, next] = dnn_forward(model.net, node_input(model, p, x), LstmState<double>{x.h, x.c});
  auto [tw, tr] = thermal_euler_step(x.theta_w, x.theta_r, rates, cfg.dk);
  MheState out;
  out.theta_w = tw + w(0);
  out.theta_r = tr + w(1);
  out.h = next.h;
  out.c = next.c;
  return out;
}

void advance_window(const MheConfig& cfg, const MheModel& model, MheWindow& win,
                    const Eigen::Vector2d& y, const NodeParams& p) {
  const Index hd = model.net.hidden_dim();
  if (win.nodes() == 0) {
    win.anchor = MheState::zeros(hd);
    win.anchor.theta_w = y(0);
    win.anchor.theta_r = y(1);
    win.measurements.push_back(y);
    win.warm_states = {win.anchor};
    win.warm_noise.clear();
    return;
  }
  if (win.filled(cfg)) {
    win.measurements.pop_front();
    win.params.pop_front();
    win.anchor = win.warm_states.size() > 1 ? win.warm_states[1] : win.anchor;
    win.warm_states.erase(win.warm_states.begin());
    if (!win.warm_noise.empty()) win.warm_noise.erase(win.warm_noise.begin());
  }
  win.measurements.push_back(y);
  win.params.push_back(p);
  win.warm_states.push_back(dynamics_step(cfg, model, p, win.warm_states.back(), Vector2d::Zero()));
  win.warm_noise.push_back(Vector2d::Zero());
}

double evaluate_cost(const MheConfig& cfg, const MheWindow& win,
                     const std::vector<MheState>& states,
                     const std::vector<Eigen::Vector2d>& noise) {
  const int n = win.nodes();
  if (static_cast<int>(states.size()) != n || static_cast<int>(noise.size()) != n - 1)
    throw std::invalid_argument("evaluate_cost: trajectory does not match window");
  const VectorXd r0 = states.front().to_vector() - win.anchor.to_vector();
  const VectorXd wts = arrival_weights(cfg, r0.size());
  double cost = 0.5 * r0.cwiseProduct(wts).dot(r0);
  for (int k = 0; k < n; ++k) {
    const Vector2d rm = measurement_model(states[static_cast<size_t>(k)]) -
                        win.measurements[static_cast<size_t>(k)];
    cost += 0.5 * cfg.weight_meas * rm.squaredNorm();
  }
  for (const auto& w : noise) cost += 0.5 * cfg.weight_noise * w.squaredNorm();
  return cost;
}

std::vector<MheState> rollout(const MheConfig& cfg, const MheModel& model, const MheWindow& win,
                              const MheState& x0, const std::vector<Eigen::Vector2d>& noise) {
  std::vector<MheState> states;
  states.reserve(noise.size() + 1);
  states.push_back(x0);
  for (size_t k = 0; k < noise.size(); ++k)
    states.push_back(dynamics_step(cfg, model, win.params[k], states.back(), noise[k]));
  return states;
}

MheLinearization linearize(const MheConfig& cfg, const MheModel& model, const MheWindow& win,
                           const std::vector<MheState>& states) {
  const Index hd = model.net.hidden_dim();
  const Index nx = 2 + 2 * hd;
  MheLinearization lin;
  const int intervals = win.nodes() - 1;
  lin.a.reserve(static_cast<size_t>(intervals));
  lin.b.reserve(static_cast<size_t>(intervals));
  for (int k = 0; k < intervals; ++k) {
    const MheState& x = states[static_cast<size_t>(k)];
    const auto j = dnn_jacobian(model.net, node_input(model, win.params[static_cast<size_t>(k)], x),
                                LstmState<double>{x.h, x.c});
    MatrixXd a = MatrixXd::Zero(nx, nx);
    a.block(0, 0, 2, 2) = Eigen::Matrix2d::Identity() + cfg.dk * j.rates_theta;
    a.block(0, 2, 2, hd) = cfg.dk * j.rates_h;
    a.block(0, 2 + hd, 2, hd) = cfg.dk * j.rates_c;
    a.block(2, 0, hd, 2) = j.hnew_theta;
    a.block(2, 2, hd, hd) = j.hnew_h;
    a.block(2, 2 + hd, hd, hd) = j.hnew_c;
    a.block(2 + hd, 0, hd, 2) = j.cnew_theta;
    a.block(2 + hd, 2, hd, hd) = j.cnew_h;
    a.block(2 + hd, 2 + hd, hd, hd) = j.cnew_c;
    MatrixXd b = MatrixXd::Zero(nx, 2);
    b.block(0, 0, 2, 2) = Eigen::Matrix2d::Identity();
    lin.a.push_back(std::move(a));
    lin.b.push_back(std::move(b));
  }
  return lin;
}

CondensedQp condense(const MheConfig& cfg, const MheWindow& win, const MheLinearization& lin,
                     const std::vector<MheState>& states,
                     const std::vector<Eigen::Vector2d>& noise) {
  const int n_nodes = win.nodes();
  if (static_cast<int>(noise.size()) != n_nodes - 1)
    throw std::invalid_argument("condense: noise length does not match window");
  const int n_w = n_nodes - 1;
  const Index nx = states.front().dim();
  const Index nz = nx + 2 * n_w;

  CondensedQp c;
  c.nx = nx;
  c.nz = nz;
  c.node_map.resize(static_cast<size_t>(n_nodes));
  c.node_map[0] = MatrixXd::Zero(nx, nz);
  c.node_map[0].leftCols(nx).setIdentity();
  for (int k = 0; k < n_w; ++k) {
    MatrixXd m = lin.a[static_cast<size_t>(k)] * c.node_map[static_cast<size_t>(k)];
    m.middleCols(nx + 2 * k, 2) += lin.b[static_cast<size_t>(k)];
    c.node_map[static_cast<size_t>(k + 1)] = std::move(m);
  }

  MatrixXd h = MatrixXd::Zero(nz, nz);
  VectorXd g = VectorXd::Zero(nz);

  // Arrival block acts on dx0 only.
  const VectorXd wts = arrival_weights(cfg, nx);
  const VectorXd r0 = states.front().to_vector() - win.anchor.to_vector();
  h.topLeftCorner(nx, nx) += wts.asDiagonal();
  g.head(nx) += wts.cwiseProduct(r0);

  // Measurement residuals at every node; the model picks the temperatures.
  for (int k = 0; k < n_nodes; ++k) {
    const auto rows = c.node_map[static_cast<size_t>(k)].topRows(2);
    const Vector2d rm = measurement_model(states[static_cast<size_t>(k)]) -
                        win.measurements[static_cast<size_t>(k)];
    h.noalias() += cfg.weight_meas * rows.transpose() * rows;
    g.noalias() += cfg.weight_meas * rows.transpose() * rm;
  }

  // Process noise is a direct block of z; its residual is the iterate itself.
  for (int k = 0; k < n_w; ++k) {
    const Index off = nx + 2 * k;
    h.block(off, off, 2, 2) += cfg.weight_noise * Eigen::Matrix2d::Identity();
    g.segment(off, 2) += cfg.weight_noise * noise[static_cast<size_t>(k)];
  }

  c.qp.hessian = std::move(h);
  c.qp.gradient = std::move(g);

  // Temperature box at every node.
  const int m_rows = 2 * n_nodes;
  c.qp.constraints.resize(m_rows, nz);
  c.qp.lower.resize(m_rows);
  c.qp.upper.resize(m_rows);
  for (int k = 0; k < n_nodes; ++k) {
    c.qp.constraints.middleRows(2 * k, 2) = c.node_map[static_cast<size_t>(k)].topRows(2);
    const Vector2d th = measurement_model(states[static_cast<size_t>(k)]);
    c.qp.lower.segment(2 * k, 2) = Vector2d::Constant(cfg.theta_min) - th;
    c.qp.upper.segment(2 * k, 2) = Vector2d::Constant(cfg.theta_max) - th;
  }
  return c;
}

namespace {

// A strictly feasible start for the condensed QP: zero unless the current
// rollout violates the temperature box, in which case the violation at each
// node is absorbed by the immediately preceding noise entry (and dx0 for the
// first node), which the node map passes through with unit gain.
VectorXd feasible_start(const MheConfig& cfg, const CondensedQp& c,
                        const std::vector<MheState>& states) {
  VectorXd z = VectorXd::Zero(c.nz);
  for (size_t k = 0; k < states.size(); ++k) {
    const Vector2d th = measurement_model(states[k]) +
                        c.node_map[k].topRows(2) * z;
    Vector2d corr = Vector2d::Zero();
    for (int j = 0; j < 2; ++j)
      corr(j) = std::clamp(th(j), cfg.theta_min, cfg.theta_max) - th(j);
    if (corr.isZero(0.0)) continue;
    if (k == 0)
      z.head(2) += corr;
    else
      z.segment(c.nx + 2 * (static_cast<Index>(k) - 1), 2) += corr;
  }
  return z;
}

}  // namespace

namespace {

double box_violation(const MheConfig& cfg, const std::vector<MheState>& states) {
  double v = 0.0;
  for (const auto& s : states) {
    v += std::max(0.0, s.theta_w - cfg.theta_max) + std::max(0.0, cfg.theta_min - s.theta_w);
    v += std::max(0.0, s.theta_r - cfg.theta_max) + std::max(0.0, cfg.theta_min - s.theta_r);
  }
  return v;
}

}  // namespace

MheSolution sqp_solve(const MheConfig& cfg, const MheModel& model, const MheWindow& win) {
  if (win.nodes() < 1) throw SolverError("sqp_solve: empty window");
  MheState x0 = win.warm_states.empty() ? win.anchor : win.warm_states.front();
  std::vector<Vector2d> noise = win.warm_noise;
  noise.resize(static_cast<size_t>(win.nodes() - 1), Vector2d::Zero());

  std::vector<MheState> states = rollout(cfg, model, win, x0, noise);
  double cost = evaluate_cost(cfg, win, states, noise);

  // penalty weight large enough to dominate any bound multiplier, so the
  // line search cannot trade feasibility for cost
  const double penalty =
      1e3 * (cfg.weight_arrival + cfg.weight_meas + cfg.weight_noise + cfg.weight_state_reg);
  double merit = cost + penalty * box_violation(cfg, states);

  MheSolution sol;
  for (int iter = 1; iter <= cfg.max_sqp_iters; ++iter) {
    const MheLinearization lin = linearize(cfg, model, win, states);
    const CondensedQp cqp = condense(cfg, win, lin, states, noise);

    // Stationarity shortcut when no bound is near.
    bool near_bound = false;
    for (const auto& s : states) {
      const double margin = 1e-7 * (1.0 + std::abs(cfg.theta_max));
      if (s.theta_w < cfg.theta_min + margin || s.theta_w > cfg.theta_max - margin ||
          s.theta_r < cfg.theta_min + margin || s.theta_r > cfg.theta_max - margin)
        near_bound = true;
    }
    const double gnorm = cqp.qp.gradient.cwiseAbs().maxCoeff();
    if (!near_bound && gnorm < cfg.kkt_tol) {
      sol.kkt_residual = gnorm;
      sol.converged = true;
      break;
    }

    const VectorXd z0 = feasible_start(cfg, cqp, states);
    const QpResult qres = solve_qp_box(cqp.qp, z0, cfg.max_qp_iters, cfg.kkt_tol);
    sol.qp_iters += qres.iterations;
    sol.kkt_residual = qres.kkt_residual;
    sol.active_bounds = static_cast<int>(qres.active.size());
    sol.sqp_iters = iter;

    if (qres.z.cwiseAbs().maxCoeff() < cfg.step_tol) {
      sol.converged = qres.converged;
      break;
    }

    // Backtracking on the penalized window cost; at feasible iterates the
    // penalty term vanishes and this is plain cost descent.
    bool accepted = false;
    double alpha = 1.0;
    for (int ls = 0; ls < cfg.max_linesearch; ++ls, alpha *= 0.5) {
      const VectorXd dz = alpha * qres.z;
      MheState x0_c = MheState::from_vector(x0.to_vector() + dz.head(cqp.nx),
                                            model.net.hidden_dim());
      std::vector<Vector2d> noise_c = noise;
      for (size_t k = 0; k < noise_c.size(); ++k)
        noise_c[k] += dz.segment(cqp.nx + 2 * static_cast<Index>(k), 2);
      std::vector<MheState> states_c = rollout(cfg, model, win, x0_c, noise_c);
      const double cost_c = evaluate_cost(cfg, win, states_c, noise_c);
      const double merit_c = cost_c + penalty * box_violation(cfg, states_c);
      if (merit_c < merit) {
        x0 = std::move(x0_c);
        noise = std::move(noise_c);
        states = std::move(states_c);
        cost = cost_c;
        merit = merit_c;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;  // stalled line search; keep the last iterate
  }

  sol.states = std::move(states);
  sol.noise = std::move(noise);
  sol.cost = cost;
  return sol;
}

MheEstimator::MheEstimator(MheConfig cfg, MheModel model)
    : cfg_(cfg), model_(std::move(model)) {
  cfg_.validate();
  model_.vehicle.validate();
  if (!model_.net.shapes_consistent() || !model_.net.all_finite())
    throw SchemaError("MheEstimator: bad network parameters");
}

const MheSolution& MheEstimator::step(const Eigen::Vector2d& y, const NodeParams& p) {
  advance_window(cfg_, model_, win_, y, p);
  last_ = sqp_solve(cfg_, model_, win_);
  win_.warm_states = last_.states;
  win_.warm_noise = last_.noise;
  return last_;
}

MheState MheEstimator::current_estimate() const {
  if (last_.states.empty()) throw SolverError("current_estimate: no solution yet");
  MheState x = last_.states.back();
  x.theta_w = std::clamp(x.theta_w, cfg_.theta_min, cfg_.theta_max);
  x.theta_r = std::clamp(x.theta_r, cfg_.theta_min, cfg_.theta_max);
  return x;
}

}  // namespace thermhe
