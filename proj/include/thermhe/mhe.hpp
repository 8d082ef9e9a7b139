#pragma once

#include <Eigen/Dense>

#include <deque>
#include <vector>

#include "thermhe/lstm.hpp"
#include "thermhe/qp.hpp"
#include "thermhe/vehicle.hpp"

namespace thermhe {

// Temperature state estimation on a sliding window: the network dynamics
// are trusted as the process model, additive process noise acts on the two
// temperature states only, and both temperatures are measured at every node.
struct MheConfig {
  int horizon = 15;              // intervals in a filled window
  double dk = 0.1;               // s, node spacing
  double weight_arrival = 1.0;   // temperature deviation from the window prior
  // Random-walk prior on the carried cell memory. Keeps the reduced Hessian
  // well conditioned in the memory directions; near-zero values let the QP
  // propose huge saturating memory moves that stall the line search.
  double weight_state_reg = 0.1;
  double weight_noise = 0.7;     // process noise penalty
  double weight_meas = 0.02;     // measurement residual penalty
  double theta_min = 0.0;        // degC box on the temperature states
  double theta_max = 155.0;
  int max_sqp_iters = 20;
  int max_qp_iters = 100;
  double kkt_tol = 1e-8;
  double step_tol = 1e-8;        // infinity norm on the primal step
  int max_linesearch = 10;

  double horizon_span() const { return horizon * dk; }
  void validate() const;
};

struct MheModel {
  LstmParams<double> net;
  VehicleParams vehicle;
};

// Known per-interval inputs, sampled from the drive.
struct NodeParams {
  double t_em_acc = 0.0;
  double t_em_brk = 0.0;
  double t_fric_brk = 0.0;
  double phi = 0.0;
  double v_veh = 0.0;

  double t_em_total() const { return t_em_acc + t_em_brk; }
};

// Full estimator state at one node: the two temperatures plus the carried
// network memory. Flattened layout is (theta_w, theta_r, h, c).
struct MheState {
  double theta_w = 0.0;
  double theta_r = 0.0;
  Eigen::VectorXd h, c;

  Eigen::Index dim() const { return 2 + h.size() + c.size(); }
  Eigen::VectorXd to_vector() const;
  static MheState from_vector(const Eigen::VectorXd& v, Eigen::Index hidden_dim);
  static MheState zeros(Eigen::Index hidden_dim);
};

// One process-model step: network rates integrate the temperatures, the
// noise enters additively on the temperatures, and the cell memory advances
// noise-free.
MheState dynamics_step(const MheConfig& cfg, const MheModel& model, const NodeParams& p,
                       const MheState& x, const Eigen::Vector2d& w);

inline Eigen::Vector2d measurement_model(const MheState& x) {
  return {x.theta_w, x.theta_r};
}

struct MheWindow {
  std::deque<Eigen::Vector2d> measurements;  // nodes() entries
  std::deque<NodeParams> params;             // nodes() - 1 entries
  MheState anchor;                           // prior on the first node
  std::vector<MheState> warm_states;         // previous solution, shifted
  std::vector<Eigen::Vector2d> warm_noise;

  int nodes() const { return static_cast<int>(measurements.size()); }
  bool filled(const MheConfig& cfg) const { return nodes() == cfg.horizon + 1; }
};

// Slide the window one sample forward. While still growing the new node is
// appended; once full, the oldest node is retired and the prior moves to the
// previous solution's second state. The stored warm start shifts along.
void advance_window(const MheConfig& cfg, const MheModel& model, MheWindow& win,
                    const Eigen::Vector2d& y, const NodeParams& p);

// Window cost at a dynamics-consistent trajectory.
double evaluate_cost(const MheConfig& cfg, const MheWindow& win,
                     const std::vector<MheState>& states,
                     const std::vector<Eigen::Vector2d>& noise);

// States implied by a first node and a noise sequence.
std::vector<MheState> rollout(const MheConfig& cfg, const MheModel& model, const MheWindow& win,
                              const MheState& x0, const std::vector<Eigen::Vector2d>& noise);

struct MheLinearization {
  std::vector<Eigen::MatrixXd> a;  // per interval: d x_{k+1} / d x_k
  std::vector<Eigen::MatrixXd> b;  // per interval: d x_{k+1} / d w_k
};

MheLinearization linearize(const MheConfig& cfg, const MheModel& model, const MheWindow& win,
                           const std::vector<MheState>& states);

// Single-shooting reduction onto z = (dx0, dw_0 .. dw_{K-1}); node_map[k]
// maps z to the state perturbation at node k. Temperature box constraints
// become general rows on z.
struct CondensedQp {
  BoxQp qp;
  std::vector<Eigen::MatrixXd> node_map;
  Eigen::Index nx = 0;
  Eigen::Index nz = 0;
};

CondensedQp condense(const MheConfig& cfg, const MheWindow& win, const MheLinearization& lin,
                     const std::vector<MheState>& states,
                     const std::vector<Eigen::Vector2d>& noise);

struct MheSolution {
  std::vector<MheState> states;
  std::vector<Eigen::Vector2d> noise;
  double cost = 0.0;
  int sqp_iters = 0;
  int qp_iters = 0;
  double kkt_residual = 0.0;
  int active_bounds = 0;
  bool converged = false;
};

// Gauss-Newton SQP over the window: linearize, condense, solve the bound
// QP, backtrack on the true cost. Stops on step norm, stationarity, or the
// iteration cap; a failed line search returns the last iterate un-flagged
// as converged but still dynamics-consistent.
MheSolution sqp_solve(const MheConfig& cfg, const MheModel& model, const MheWindow& win);

class MheEstimator {
 public:
  MheEstimator(MheConfig cfg, MheModel model);

  // Feed one measurement plus the inputs active since the previous call
  // (ignored on the first). Returns the solution over the current window.
  const MheSolution& step(const Eigen::Vector2d& y, const NodeParams& p);

  // Latest-node estimate with temperatures clamped to the configured box.
  MheState current_estimate() const;

  const MheWindow& window() const { return win_; }
  const MheConfig& config() const { return cfg_; }
  const MheModel& model() const { return model_; }

 private:
  MheConfig cfg_;
  MheModel model_;
  MheWindow win_;
  MheSolution last_;
};

}  // namespace thermhe
