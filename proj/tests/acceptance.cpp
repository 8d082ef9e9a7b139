// End-to-end gate: eight checks covering derivatives, training quality,
// solver oracle equivalence, closed-loop accuracy, fault handling, timing,
// determinism, and the vehicle dynamics regression value. Prints one line
// per check and exits nonzero if any fail.
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "thermhe/dataset.hpp"
#include "thermhe/error.hpp"
#include "thermhe/lstm.hpp"
#include "thermhe/mhe.hpp"
#include "thermhe/qp.hpp"
#include "thermhe/sim.hpp"
#include "thermhe/thermal_plant.hpp"
#include "thermhe/training.hpp"
#include "thermhe/vehicle.hpp"
#include "thermhe/weights_io.hpp"

using namespace thermhe;
using Eigen::MatrixXd;
using Eigen::Vector2d;
using Eigen::VectorXd;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Context {
  std::filesystem::path work;
  LstmParams<double> net;
  bool net_ready = false;
  SimConfig nominal_cfg;
  RunResult nominal_run;
  bool nominal_ready = false;
};

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v, int prec = 3) {
  std::ostringstream os;
  os.precision(prec);
  os << v;
  return os.str();
}

uint64_t fnv1a(const std::string& s) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

LstmParams<double> random_net(uint64_t seed, int hidden, double out_scale) {
  LstmParams<double> p = init_params(4, hidden, seed);
  p.norm_mean << 2000.0, 0.0, 70.0, 65.0;
  p.norm_std << 1500.0, 40.0, 25.0, 20.0;
  p.fc_w *= out_scale;
  return p;
}

// ---------------------------------------------------------------- check 1

Outcome check_derivatives() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(101);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_real_distribution<double> us(-0.8, 0.8);

  double worst_jac = 0.0;
  const int jac_cfgs = 24;
  for (int t = 0; t < jac_cfgs; ++t) {
    const int hd = 2 + t % 7;
    const LstmParams<double> p = random_net(200 + t, hd, 1.0);
    LstmState<double> st{VectorXd::NullaryExpr(hd, [&](Eigen::Index) { return us(rng); }),
                         VectorXd::NullaryExpr(hd, [&](Eigen::Index) { return us(rng); })};
    const DnnInput<double> u{2200.0 + 700.0 * nd(rng), 35.0 * nd(rng), 72.0 + 12.0 * nd(rng),
                             66.0 + 10.0 * nd(rng)};
    const auto jac = dnn_jacobian(p, u, st);

    const Eigen::Index nx = 2 + 2 * hd;
    MatrixXd analytic(nx, nx);
    analytic.block(0, 0, 2, 2) = jac.rates_theta;
    analytic.block(0, 2, 2, hd) = jac.rates_h;
    analytic.block(0, 2 + hd, 2, hd) = jac.rates_c;
    analytic.block(2, 0, hd, 2) = jac.hnew_theta;
    analytic.block(2, 2, hd, hd) = jac.hnew_h;
    analytic.block(2, 2 + hd, hd, hd) = jac.hnew_c;
    analytic.block(2 + hd, 0, hd, 2) = jac.cnew_theta;
    analytic.block(2 + hd, 2, hd, hd) = jac.cnew_h;
    analytic.block(2 + hd, 2 + hd, hd, hd) = jac.cnew_c;

    auto eval = [&](const VectorXd& x) {
      const DnnInput<double> ui{u.n_em, u.t_em, x(0), x(1)};
      const LstmState<double> si{x.segment(2, hd), x.segment(2 + hd, hd)};
      auto [rates, next] = dnn_forward(p, ui, si);
      VectorXd out(nx);
      out(0) = rates.dtheta_w;
      out(1) = rates.dtheta_r;
      out.segment(2, hd) = next.h;
      out.segment(2 + hd, hd) = next.c;
      return out;
    };
    VectorXd x0(nx);
    x0(0) = u.theta_w;
    x0(1) = u.theta_r;
    x0.segment(2, hd) = st.h;
    x0.segment(2 + hd, hd) = st.c;

    const double eps = 1e-5;
    for (Eigen::Index j = 0; j < nx; ++j) {
      VectorXd xp = x0, xm = x0;
      xp(j) += eps;
      xm(j) -= eps;
      const VectorXd fd = (eval(xp) - eval(xm)) / (2.0 * eps);
      for (Eigen::Index i = 0; i < nx; ++i) {
        const double scale = std::max({std::abs(fd(i)), std::abs(analytic(i, j)), 1e-3});
        worst_jac = std::max(worst_jac, std::abs(fd(i) - analytic(i, j)) / scale);
      }
    }
  }

  double worst_bptt = 0.0;
  const int bptt_cfgs = 20;
  for (int t = 0; t < bptt_cfgs; ++t) {
    const int hd = 2 + t % 4;
    const int steps = 4 + t % 9;
    LstmParams<double> p = random_net(300 + t, hd, 1.0);
    MatrixXd x(steps, 4), y(steps, 2);
    for (int k = 0; k < steps; ++k) {
      x.row(k) << 2000.0 + 800.0 * nd(rng), 40.0 * nd(rng), 70.0 + 10.0 * nd(rng),
          66.0 + 10.0 * nd(rng);
      y.row(k) << 0.5 * nd(rng), 0.5 * nd(rng);
    }
    const auto [grad, loss] = bptt_gradients(p, x, y);
    (void)loss;
    VectorXd flat = pack_params(p);
    LstmParams<double> q = p;
    const double eps = 1e-6;
    for (Eigen::Index i = 0; i < flat.size(); ++i) {
      VectorXd fp = flat, fm = flat;
      fp(i) += eps;
      fm(i) -= eps;
      unpack_params(fp, q);
      double lp = 0.0;
      {
        LstmState<double> st = LstmState<double>::zeros(hd);
        for (int k = 0; k < steps; ++k) {
          auto [r, nx_] = dnn_forward(q, DnnInput<double>{x(k, 0), x(k, 1), x(k, 2), x(k, 3)}, st);
          st = nx_;
          lp += (r.dtheta_w - y(k, 0)) * (r.dtheta_w - y(k, 0)) +
                (r.dtheta_r - y(k, 1)) * (r.dtheta_r - y(k, 1));
        }
        lp /= static_cast<double>(2 * steps);
      }
      unpack_params(fm, q);
      double lm = 0.0;
      {
        LstmState<double> st = LstmState<double>::zeros(hd);
        for (int k = 0; k < steps; ++k) {
          auto [r, nx_] = dnn_forward(q, DnnInput<double>{x(k, 0), x(k, 1), x(k, 2), x(k, 3)}, st);
          st = nx_;
          lm += (r.dtheta_w - y(k, 0)) * (r.dtheta_w - y(k, 0)) +
                (r.dtheta_r - y(k, 1)) * (r.dtheta_r - y(k, 1));
        }
        lm /= static_cast<double>(2 * steps);
      }
      const double fd = (lp - lm) / (2.0 * eps);
      const double scale = std::max({std::abs(fd), std::abs(grad(i)), 1e-3});
      worst_bptt = std::max(worst_bptt, std::abs(fd - grad(i)) / scale);
    }
  }

  const double elapsed = seconds_since(t0);
  Outcome o;
  o.pass = worst_jac < 1e-5 && worst_bptt < 1e-4 && elapsed < 10.0;
  o.detail = "jacobian worst " + fmt(worst_jac, 2) + " over " + std::to_string(jac_cfgs) +
             " configs, bptt worst " + fmt(worst_bptt, 2) + " over " + std::to_string(bptt_cfgs) +
             " configs, " + fmt(elapsed, 2) + " s";
  return o;
}

// ---------------------------------------------------------------- check 2

Outcome check_training(Context& ctx) {
  const auto t0 = std::chrono::steady_clock::now();

  DataGenConfig gen;
  gen.cycles = 56;
  gen.cycle_duration_s = 90.0;
  gen.seed = 20330;
  const Dataset data = decimate_dataset(generate_dataset(gen), 10);
  const Eigen::Index samples = data.total_points();

  auto [d_train, d_val] = split_dataset(data, 0.8, 7);

  TrainConfig tc;
  tc.max_epochs = 2000;
  tc.l2 = 1e-4;
  tc.seed = 1;
  auto [net, rep] = train(d_train, d_val, tc);

  // fully unseen cycles for the reported quality numbers
  DataGenConfig tg = gen;
  tg.cycles = 6;
  tg.seed = 777;
  const Dataset test = decimate_dataset(generate_dataset(tg), 10);
  const auto m = evaluate_metrics(net, test);

  save_weights((ctx.work / "weights.json").string(), net);
  ctx.net = net;
  ctx.net_ready = true;

  const double elapsed = seconds_since(t0);
  Outcome o;
  o.pass = samples >= 50000 && rep.epochs <= 2000 && m[0].range_defined && m[1].range_defined &&
           m[0].nrmse < 0.10 && m[1].nrmse < 0.15 && elapsed < 1800.0;
  o.detail = std::to_string(samples) + " samples, " + std::to_string(rep.epochs) +
             " epochs, unseen nrmse dtheta_w " + fmt(100.0 * m[0].nrmse) + "% (<10%), dtheta_r " +
             fmt(100.0 * m[1].nrmse) + "% (<15%), " + fmt(elapsed, 3) + " s";
  return o;
}

// ---------------------------------------------------------------- check 3

Outcome check_solver_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(401);
  std::normal_distribution<double> nd(0.0, 1.0);

  double worst = 0.0;
  int clamped_instances = 0;
  std::string fail;

  for (int inst = 0; inst < 50 && fail.empty(); ++inst) {
    const int hd = 2 + inst % 3;
    MheConfig mc;
    mc.horizon = 1 + inst % 3;
    const bool clamp_case = inst % 4 == 3;

    MheModel model;
    model.net = random_net(1000 + inst, hd, 0.5);

    MheState x0 = MheState::zeros(hd);
    x0.theta_w = 70.0 + (inst % 7);
    x0.theta_r = 66.0 + (inst % 5);
    for (Eigen::Index i = 0; i < hd; ++i) {
      x0.h(i) = 0.4 * nd(rng);
      x0.c(i) = 0.4 * nd(rng);
    }

    MheWindow win;
    win.warm_states = {x0};
    std::vector<Vector2d> noise;
    for (int k = 0; k < mc.horizon; ++k) {
      NodeParams p;
      p.t_em_acc = 40.0 + 8.0 * nd(rng);
      p.v_veh = 15.0 + 3.0 * nd(rng);
      p.phi = 0.01 * nd(rng);
      win.params.push_back(p);
      noise.emplace_back(0.05 * nd(rng), 0.05 * nd(rng));
    }
    const std::vector<MheState> states = rollout(mc, model, win, x0, noise);
    double th_max = -1e300, th_min = 1e300;
    for (const auto& s : states) {
      th_max = std::max({th_max, s.theta_w, s.theta_r});
      th_min = std::min({th_min, s.theta_w, s.theta_r});
    }
    for (const auto& s : states) {
      win.measurements.emplace_back(s.theta_w + 0.5 * nd(rng) + (clamp_case ? 2.5 : 0.0),
                                    s.theta_r + 0.5 * nd(rng) + (clamp_case ? 2.5 : 0.0));
    }
    win.anchor = x0;
    if (clamp_case) {
      win.anchor.theta_w = th_max + 3.0;
      win.anchor.theta_r = th_max + 3.0;
      mc.theta_max = th_max + 0.5;
      mc.theta_min = th_min - 50.0;
    }

    const MheLinearization lin = linearize(mc, model, win, states);
    const CondensedQp c = condense(mc, win, lin, states, noise);
    const QpResult qres = solve_qp_box(c.qp, VectorXd::Zero(c.nz), 200, 1e-9);
    if (!qres.converged) {
      fail = "instance " + std::to_string(inst) + ": condensed solve did not converge";
      break;
    }
    if (!qres.active.empty()) ++clamped_instances;

    // independent solution: one dense KKT factorization of the stage-wise
    // QP with the dynamics (and the reported active bounds) as equalities
    const int n_nodes = win.nodes();
    const int n_w = n_nodes - 1;
    const Eigen::Index nx = c.nx;
    const Eigen::Index nv = n_nodes * nx + 2 * n_w;
    const Eigen::Index n_eq = n_w * nx + static_cast<Eigen::Index>(qres.active.size());

    MatrixXd hf = MatrixXd::Zero(nv, nv);
    VectorXd gf = VectorXd::Zero(nv);
    VectorXd wts = VectorXd::Constant(nx, mc.weight_state_reg);
    wts(0) = wts(1) = mc.weight_arrival;
    hf.topLeftCorner(nx, nx) += MatrixXd(wts.asDiagonal());
    gf.head(nx) += wts.cwiseProduct(states[0].to_vector() - win.anchor.to_vector());
    for (int k = 0; k < n_nodes; ++k) {
      const Eigen::Index off = k * nx;
      for (int j = 0; j < 2; ++j) {
        hf(off + j, off + j) += mc.weight_meas;
        const double rm =
            (j == 0 ? states[static_cast<size_t>(k)].theta_w : states[static_cast<size_t>(k)].theta_r) -
            win.measurements[static_cast<size_t>(k)](j);
        gf(off + j) += mc.weight_meas * rm;
      }
    }
    for (int k = 0; k < n_w; ++k) {
      const Eigen::Index off = n_nodes * nx + 2 * k;
      hf.block(off, off, 2, 2) += mc.weight_noise * MatrixXd::Identity(2, 2);
      gf.segment(off, 2) += mc.weight_noise * noise[static_cast<size_t>(k)];
    }
    MatrixXd e = MatrixXd::Zero(n_eq, nv);
    VectorXd e_rhs = VectorXd::Zero(n_eq);
    for (int k = 0; k < n_w; ++k) {
      e.block(k * nx, (k + 1) * nx, nx, nx) = MatrixXd::Identity(nx, nx);
      e.block(k * nx, k * nx, nx, nx) = -lin.a[static_cast<size_t>(k)];
      e.block(k * nx, n_nodes * nx + 2 * k, nx, 2) = -lin.b[static_cast<size_t>(k)];
    }
    for (size_t a = 0; a < qres.active.size(); ++a) {
      const int row = qres.active[a].row;  // 2*node + channel
      const int node = row / 2;
      const int ch = row % 2;
      const Eigen::Index er = n_w * nx + static_cast<Eigen::Index>(a);
      e(er, node * nx + ch) = 1.0;
      e_rhs(er) = qres.active[a].at_upper ? c.qp.upper(row) : c.qp.lower(row);
    }
    MatrixXd kkt = MatrixXd::Zero(nv + n_eq, nv + n_eq);
    kkt.topLeftCorner(nv, nv) = hf;
    kkt.topRightCorner(nv, n_eq) = e.transpose();
    kkt.bottomLeftCorner(n_eq, nv) = e;
    VectorXd rhs(nv + n_eq);
    rhs.head(nv) = -gf;
    rhs.tail(n_eq) = e_rhs;
    Eigen::FullPivLU<MatrixXd> lu(kkt);
    if (!lu.isInvertible()) {
      fail = "instance " + std::to_string(inst) + ": reference KKT is singular";
      break;
    }
    const VectorXd sol = lu.solve(rhs);
    const VectorXd v = sol.head(nv);

    // the expanded condensed solution must match every node and noise block
    for (int k = 0; k < n_nodes; ++k) {
      const VectorXd dx = c.node_map[static_cast<size_t>(k)] * qres.z;
      worst = std::max(worst, (dx - v.segment(k * nx, nx)).cwiseAbs().maxCoeff());
    }
    if (n_w > 0)
      worst = std::max(worst, (qres.z.tail(2 * n_w) - v.tail(2 * n_w)).cwiseAbs().maxCoeff());

    // reference multipliers must carry the sign of the side that binds, and
    // the reference point must respect the rows the active set left out
    for (size_t a = 0; a < qres.active.size(); ++a) {
      const double lam = sol(nv + n_w * nx + static_cast<Eigen::Index>(a));
      if (qres.active[a].at_upper ? lam < -1e-7 : lam > 1e-7) {
        fail = "instance " + std::to_string(inst) + ": active side sign disagrees";
        break;
      }
    }
    for (int row = 0; row < c.qp.constraints.rows(); ++row) {
      const double val = v((row / 2) * nx + row % 2);
      if (val < c.qp.lower(row) - 1e-7 || val > c.qp.upper(row) + 1e-7) {
        fail = "instance " + std::to_string(inst) + ": reference violates an inactive bound";
        break;
      }
    }
  }

  // exact-data fixed point: a consistent window solves to (numerically) zero
  double recovered_cost = 1e300;
  if (fail.empty()) {
    const MheModel model{random_net(4242, 3, 0.5), VehicleParams{}};
    MheConfig mc;
    mc.horizon = 5;
    MheState x_true = MheState::zeros(3);
    x_true.theta_w = 74.0;
    x_true.theta_r = 67.0;
    x_true.h << 0.1, -0.3, 0.2;
    x_true.c << 0.5, 0.2, -0.4;
    MheWindow win;
    win.anchor = x_true;
    win.warm_states = {x_true};
    win.measurements.push_back(measurement_model(x_true));
    MheState x = x_true;
    for (int k = 0; k < 5; ++k) {
      NodeParams p;
      p.t_em_acc = 45.0 + 5.0 * std::sin(0.4 * k);
      p.v_veh = 16.0;
      x = dynamics_step(mc, model, p, x, Vector2d::Zero());
      win.params.push_back(p);
      win.measurements.push_back(measurement_model(x));
      win.warm_states.push_back(x);
      win.warm_noise.emplace_back(Vector2d::Zero());
    }
    win.warm_states[0].theta_w += 0.7;
    win.warm_states[0].theta_r -= 0.6;
    win.warm_states[0].h(0) += 0.2;
    const MheSolution s = sqp_solve(mc, model, win);
    recovered_cost = s.cost;
  }

  const double elapsed = seconds_since(t0);
  Outcome o;
  o.pass = fail.empty() && worst < 1e-8 && clamped_instances >= 5 && recovered_cost < 1e-10 &&
           elapsed < 30.0;
  if (!fail.empty()) {
    o.detail = fail;
  } else {
    o.detail = "50 instances, worst deviation " + fmt(worst, 2) + ", " +
               std::to_string(clamped_instances) + " with active bounds, exact-data cost " +
               fmt(recovered_cost, 2) + ", " + fmt(elapsed, 2) + " s";
  }
  return o;
}

// ---------------------------------------------------------------- check 4

SimConfig nominal_config() {
  SimConfig cfg;
  cfg.duration_s = 600.0;
  cfg.dk = 0.1;
  cfg.plant_substeps = 10;
  cfg.seed = 1;
  cfg.cycle.seed = 42;
  cfg.cycle.aggressiveness = 0.7;
  return cfg;
}

Outcome check_noise_attenuation(Context& ctx) {
  const auto t0 = std::chrono::steady_clock::now();
  if (!ctx.net_ready) return {false, "no trained network available"};
  ctx.nominal_cfg = nominal_config();
  ctx.nominal_run = run_mil(ctx.nominal_cfg, ctx.net);
  ctx.nominal_ready = true;

  const auto& w = ctx.nominal_run.metrics.winding;
  const auto& r = ctx.nominal_run.metrics.rotor;
  const double elapsed = seconds_since(t0);
  Outcome o;
  o.pass = w.rmse_est <= 0.5 * w.rmse_meas && elapsed < 120.0;
  o.detail = "winding est rmse " + fmt(w.rmse_est) + " vs meas " + fmt(w.rmse_meas) +
             " (ratio " + fmt(w.rmse_est / w.rmse_meas, 2) + ", need <=0.5), rotor est rmse " +
             fmt(r.rmse_est) + ", " + fmt(elapsed, 3) + " s";
  return o;
}

// ---------------------------------------------------------------- check 5

Outcome check_faults(Context& ctx) {
  const auto t0 = std::chrono::steady_clock::now();
  if (!ctx.net_ready) return {false, "no trained network available"};
  const SimConfig base = ctx.nominal_ready ? ctx.nominal_cfg : nominal_config();

  FaultProfile offset;
  offset.kind = FaultKind::offset;
  offset.magnitude = -5.0;
  offset.t_start = 60.0;
  offset.t_end = 62.0;
  const FaultReport ro = fault_experiment(base, ctx.net, offset);

  FaultProfile noisy;
  noisy.kind = FaultKind::amplified_noise;
  noisy.magnitude = 10.0;
  noisy.t_start = 60.0;
  noisy.t_end = 120.0;
  const FaultReport rn = fault_experiment(base, ctx.net, noisy);

  save_fault_report_json((ctx.work / "fault_offset.json").string(), ro);
  save_fault_report_json((ctx.work / "fault_noise.json").string(), rn);

  bool ok = true;
  std::ostringstream d;
  if (!ro.faulted.fault_window || !rn.faulted.fault_window) return {false, "missing fault windows"};

  const auto& ow = ro.faulted.fault_window->winding;
  const auto& orr = ro.faulted.fault_window->rotor;
  const double obias = std::max(std::abs(ow.bias_est), std::abs(orr.bias_est));
  ok = ok && obias < 2.5;
  d << "offset in-window est bias " << fmt(obias) << " (need <2.5)";

  const auto& nw = rn.faulted.fault_window->winding;
  const auto& nr = rn.faulted.fault_window->rotor;
  ok = ok && nw.rmse_est < nw.rmse_meas && nr.rmse_est < nr.rmse_meas;
  d << "; amplified-noise in-window est rmse " << fmt(nw.rmse_est) << " vs meas "
    << fmt(nw.rmse_meas);

  const int violations = ro.nominal.bound_violations + ro.faulted.bound_violations +
                         rn.nominal.bound_violations + rn.faulted.bound_violations;
  ok = ok && violations == 0;
  d << "; box violations " << violations;

  const double worst_err = std::max({ow.max_abs_est, orr.max_abs_est, nw.max_abs_est,
                                     nr.max_abs_est});
  ok = ok && worst_err < 10.0;
  d << "; worst in-window error " << fmt(worst_err);

  const double elapsed = seconds_since(t0);
  ok = ok && elapsed < 240.0;
  d << "; " << fmt(elapsed, 3) << " s";
  return {ok, d.str()};
}

// ---------------------------------------------------------------- check 6

Outcome check_timing(const Context& ctx) {
  if (!ctx.nominal_ready) return {false, "no nominal run available"};
  const TimingStats& t = ctx.nominal_run.metrics.timing;
  Outcome o;
  o.pass = t.mean_ms < 100.0;
  o.detail = "mean " + fmt(t.mean_ms) + " ms (gate <100), max " + fmt(t.max_ms) + " ms, p99 " +
             fmt(t.p99_ms) + " ms, 10 ms target " + (t.mean_ms < 10.0 ? "met" : "missed");
  return o;
}

// ---------------------------------------------------------------- check 7

Outcome check_determinism(Context& ctx) {
  const auto t0 = std::chrono::steady_clock::now();
  if (!ctx.net_ready || !ctx.nominal_ready) return {false, "no nominal run available"};

  const RunResult again = run_mil(ctx.nominal_cfg, ctx.net);

  auto masked = [](std::vector<SimRecord> recs) {
    for (auto& r : recs) r.solve_ms = 0.0;  // wall-clock column carries no state
    return recs;
  };
  const auto pa = ctx.work / "determinism_a.csv";
  const auto pb = ctx.work / "determinism_b.csv";
  save_run_csv(pa.string(), masked(ctx.nominal_run.records));
  save_run_csv(pb.string(), masked(again.records));
  const std::string ca = read_file(pa);
  const std::string cb = read_file(pb);
  const uint64_t ha = fnv1a(ca);
  const uint64_t hb = fnv1a(cb);

  const double elapsed = seconds_since(t0);
  Outcome o;
  o.pass = !ca.empty() && ca == cb && elapsed < 240.0;
  std::ostringstream d;
  d << "checksums " << std::hex << ha << (ha == hb ? " == " : " != ") << hb << std::dec
    << " (timing column masked), " << fmt(elapsed, 3) << " s";
  o.detail = d.str();
  return o;
}

// ---------------------------------------------------------------- check 8

Outcome check_dynamics_value() {
  const VehicleParams vp;
  const double a = longitudinal_accel(vp, 20.0, DriveCommand{}, 0.0);
  Outcome o;
  o.pass = std::abs(a - (-0.25472)) < 1e-4;
  o.detail = "coasting accel at 20 m/s = " + fmt(a, 6) + " (expect -0.25472 within 1e-4)";
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  Context ctx;
  ctx.work = argc > 1 ? std::filesystem::path(argv[1]) : std::filesystem::path("acceptance_work");
  std::error_code ec;
  std::filesystem::create_directories(ctx.work, ec);
  if (ec) {
    std::cerr << "cannot create work directory " << ctx.work << ": " << ec.message() << "\n";
    return 1;
  }

  struct Entry {
    int id;
    const char* name;
    Outcome out;
  };
  std::vector<Entry> entries;
  auto run = [&entries](int id, const char* name, auto&& fn) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    entries.push_back({id, name, o});
    std::cout << (o.pass ? "[PASS] " : "[FAIL] ") << id << " " << name << ": " << o.detail
              << std::endl;
  };

  run(1, "analytic derivatives vs finite differences", [] { return check_derivatives(); });
  run(2, "training quality on held-out cycles", [&] { return check_training(ctx); });
  run(3, "condensed solver vs dense reference", [] { return check_solver_oracle(); });
  run(4, "closed-loop noise attenuation", [&] { return check_noise_attenuation(ctx); });
  run(5, "fault robustness", [&] { return check_faults(ctx); });
  run(6, "solve timing", [&] { return check_timing(ctx); });
  run(7, "run determinism", [&] { return check_determinism(ctx); });
  run(8, "vehicle dynamics regression value", [] { return check_dynamics_value(); });

  int failed = 0;
  for (const auto& e : entries)
    if (!e.out.pass) ++failed;
  std::cout << (entries.size() - static_cast<size_t>(failed)) << "/" << entries.size()
            << " checks passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
