#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "thermhe/csv.hpp"
#include "thermhe/error.hpp"
#include "thermhe/sim.hpp"
#include "thermhe/training.hpp"

using namespace thermhe;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(std::string p) : path(std::move(p)) {}
  ~TempFile() { std::remove(path.c_str()); }
};

LstmParams<double> small_net(uint64_t seed) {
  LstmParams<double> p = init_params(4, 3, seed);
  p.norm_mean << 2000.0, 0.0, 70.0, 65.0;
  p.norm_std << 1500.0, 40.0, 25.0, 20.0;
  p.fc_w *= 0.02;  // keep the untrained rates small so the loop stays tame
  return p;
}

SimConfig quick_config(double duration) {
  SimConfig cfg;
  cfg.duration_s = duration;
  cfg.dk = 0.1;
  cfg.plant_substeps = 10;
  cfg.seed = 3;
  cfg.estimator.horizon = 5;
  cfg.cycle.seed = 11;
  cfg.cycle.aggressiveness = 0.5;
  return cfg;
}

}  // namespace

TEST_CASE("closed loop emits one record per estimator tick") {
  const SimConfig cfg = quick_config(8.0);
  const RunResult r = run_mil(cfg, small_net(1));
  REQUIRE(r.records.size() == 80);
  CHECK(r.records.front().t == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(r.records.back().t == doctest::Approx(8.0).epsilon(1e-12));
  for (size_t i = 1; i < r.records.size(); ++i)
    CHECK(r.records[i].t - r.records[i - 1].t == doctest::Approx(0.1).epsilon(1e-9));
  for (const auto& rec : r.records) {
    CHECK(rec.v >= 0.0);
    CHECK(rec.est_tw >= cfg.estimator.theta_min);
    CHECK(rec.est_tw <= cfg.estimator.theta_max);
    CHECK(rec.est_tr >= cfg.estimator.theta_min);
    CHECK(rec.est_tr <= cfg.estimator.theta_max);
    CHECK(rec.sqp_iters >= 0);
    CHECK(rec.solve_ms >= 0.0);
    CHECK(std::isfinite(rec.cost));
  }
  CHECK(r.metrics.bound_violations == 0);
  // the driver actually moves the vehicle on a synthesized cycle
  double v_max_seen = 0.0;
  for (const auto& rec : r.records) v_max_seen = std::max(v_max_seen, rec.v);
  CHECK(v_max_seen > 1.0);
}

TEST_CASE("run log round trips through csv exactly") {
  const SimConfig cfg = quick_config(3.0);
  const RunResult r = run_mil(cfg, small_net(2));
  TempFile f("test_sim_run_tmp.csv");
  save_run_csv(f.path, r.records);
  const auto back = load_run_csv(f.path);
  REQUIRE(back.size() == r.records.size());
  for (size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].t == r.records[i].t);
    CHECK(back[i].truth_tw == r.records[i].truth_tw);
    CHECK(back[i].truth_tr == r.records[i].truth_tr);
    CHECK(back[i].meas_tw == r.records[i].meas_tw);
    CHECK(back[i].meas_tr == r.records[i].meas_tr);
    CHECK(back[i].est_tw == r.records[i].est_tw);
    CHECK(back[i].est_tr == r.records[i].est_tr);
    CHECK(back[i].v == r.records[i].v);
    CHECK(back[i].t_em_acc == r.records[i].t_em_acc);
    CHECK(back[i].t_em_brk == r.records[i].t_em_brk);
    CHECK(back[i].t_fric_brk == r.records[i].t_fric_brk);
    CHECK(back[i].solve_ms == r.records[i].solve_ms);
    CHECK(back[i].sqp_iters == r.records[i].sqp_iters);
  }
}

TEST_CASE("solver log carries the cost and kkt columns") {
  const SimConfig cfg = quick_config(2.0);
  const RunResult r = run_mil(cfg, small_net(4));
  TempFile f("test_sim_solver_tmp.csv");
  save_solver_log_csv(f.path, r.records);
  const CsvTable t = read_csv(f.path);
  REQUIRE(t.columns.size() == 7);
  CHECK(t.columns[0] == "t_s");
  CHECK(t.columns[3] == "cost");
  CHECK(t.columns[5] == "kkt");
  REQUIRE(t.rows.size() == r.records.size());
  CHECK(t.rows[5][3] == r.records[5].cost);
  CHECK(t.rows[5][5] == r.records[5].kkt);
}

TEST_CASE("metrics agree with a direct two-pass computation") {
  std::vector<SimRecord> recs;
  for (int i = 0; i < 10; ++i) {
    SimRecord r;
    r.t = 1.0 + i;
    r.truth_tw = 100.0;
    r.truth_tr = 90.0;
    r.meas_tw = 100.0 + 0.3 * i - 1.0;
    r.meas_tr = 89.0 - 0.2 * i;
    r.est_tw = 100.0 + 0.05 * (i % 3);
    r.est_tr = 90.0 - 0.04 * i;
    r.solve_ms = (i * 7) % 10 + 0.5;
    recs.push_back(r);
  }
  recs[7].est_tw = 200.0;  // outside the default box

  MheConfig est_cfg;
  const RunMetrics m = compute_metrics(recs, est_cfg, nullptr);

  double se = 0, sb = 0, mx = 0;
  for (const auto& r : recs) {
    se += (r.est_tw - r.truth_tw) * (r.est_tw - r.truth_tw);
    sb += r.est_tw - r.truth_tw;
    mx = std::max(mx, std::abs(r.est_tw - r.truth_tw));
  }
  CHECK(m.winding.rmse_est == doctest::Approx(std::sqrt(se / 10.0)).epsilon(1e-12));
  CHECK(m.winding.bias_est == doctest::Approx(sb / 10.0).epsilon(1e-12));
  CHECK(m.winding.max_abs_est == doctest::Approx(mx).epsilon(1e-12));

  double sem = 0;
  for (const auto& r : recs) sem += (r.meas_tr - r.truth_tr) * (r.meas_tr - r.truth_tr);
  CHECK(m.rotor.rmse_meas == doctest::Approx(std::sqrt(sem / 10.0)).epsilon(1e-12));

  CHECK(m.bound_violations == 1);
  CHECK_FALSE(m.fault_window.has_value());

  double sum_ms = 0, max_ms = 0;
  for (const auto& r : recs) {
    sum_ms += r.solve_ms;
    max_ms = std::max(max_ms, r.solve_ms);
  }
  CHECK(m.timing.mean_ms == doctest::Approx(sum_ms / 10.0).epsilon(1e-12));
  CHECK(m.timing.max_ms == max_ms);
  CHECK(m.timing.p99_ms == max_ms);  // p99 of ten samples is the largest

  // a fault profile adds the in-window block over [t_start, t_end + settle]
  SensorConfig sensor;
  sensor.fault.kind = FaultKind::offset;
  sensor.fault.t_start = 4.0;
  sensor.fault.t_end = 6.0;
  const RunMetrics mf = compute_metrics(recs, est_cfg, &sensor);
  REQUIRE(mf.fault_window.has_value());
  CHECK(mf.fault_window->t0 == 4.0);
  CHECK(mf.fault_window->t1 == 9.0);
  double wse = 0;
  int wn = 0;
  for (const auto& r : recs)
    if (r.t >= 4.0 && r.t <= 9.0) {
      wse += (r.est_tw - r.truth_tw) * (r.est_tw - r.truth_tw);
      ++wn;
    }
  CHECK(wn == 6);
  CHECK(mf.fault_window->winding.rmse_est ==
        doctest::Approx(std::sqrt(wse / wn)).epsilon(1e-12));
}

TEST_CASE("fault experiment with no fault reproduces the nominal run bit for bit") {
  const SimConfig cfg = quick_config(5.0);
  const FaultReport rep = fault_experiment(cfg, small_net(5), FaultProfile{});
  CHECK(rep.runs_identical);
  CHECK(rep.nominal.winding.rmse_est == rep.faulted.winding.rmse_est);
  CHECK(rep.nominal.rotor.bias_meas == rep.faulted.rotor.bias_meas);
  CHECK_FALSE(rep.faulted.fault_window.has_value());
}

TEST_CASE("offset fault shifts the raw measurements inside the burst only") {
  SimConfig cfg = quick_config(8.0);
  FaultProfile fault;
  fault.kind = FaultKind::offset;
  fault.magnitude = 4.0;
  fault.t_start = 3.0;
  fault.t_end = 4.0;
  const FaultReport rep = fault_experiment(cfg, small_net(6), fault);
  CHECK_FALSE(rep.runs_identical);
  REQUIRE(rep.faulted.fault_window.has_value());
  CHECK(rep.faulted.fault_window->t0 == 3.0);
  CHECK(rep.faulted.fault_window->t1 == 7.0);
  // ten of the 41 in-window reads carry the +4 degC offset on top of the -1 bias
  CHECK(rep.faulted.fault_window->winding.bias_meas > rep.nominal.winding.bias_meas + 0.5);
  CHECK(rep.nominal.bound_violations == 0);
  CHECK(rep.faulted.bound_violations == 0);
}

TEST_CASE("bias compensation centers the estimate on a constant-temperature plant") {
  SimConfig cfg = quick_config(12.0);
  cfg.plant.k_cu = 0.0;
  cfg.plant.k_fe = 0.0;
  cfg.plant.k_mech = 0.0;
  cfg.plant.coolant_temp_c = 55.0;
  cfg.theta_init_c << 55.0, 55.0, 55.0;  // equilibrium: the truth never moves

  const LstmParams<double> still = LstmParams<double>::zeros(4, 3);

  RunResult corrected = run_mil(cfg, still);
  CHECK(std::abs(corrected.metrics.winding.bias_est) < 0.15);
  CHECK(std::abs(corrected.metrics.winding.bias_meas + 1.0) < 0.15);

  cfg.calibration.compensate_bias = false;
  RunResult raw = run_mil(cfg, still);
  CHECK(raw.metrics.winding.bias_est < -0.8);
  CHECK(raw.metrics.winding.bias_est > -1.2);

  // the estimator smooths: per-sample scatter shrinks against the raw sensor
  CHECK(corrected.metrics.winding.rmse_est < corrected.metrics.winding.rmse_meas);
}

TEST_CASE("identical configurations give identical runs") {
  const SimConfig cfg = quick_config(4.0);
  const LstmParams<double> net = small_net(7);
  const RunResult a = run_mil(cfg, net);
  const RunResult b = run_mil(cfg, net);
  REQUIRE(a.records.size() == b.records.size());
  for (size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].truth_tw == b.records[i].truth_tw);
    CHECK(a.records[i].meas_tw == b.records[i].meas_tw);
    CHECK(a.records[i].est_tw == b.records[i].est_tw);
    CHECK(a.records[i].est_tr == b.records[i].est_tr);
    CHECK(a.records[i].v == b.records[i].v);
  }
}

TEST_CASE("sim config json round trips") {
  SimConfig cfg;
  cfg.duration_s = 123.5;
  cfg.dk = 0.05;
  cfg.plant_substeps = 4;
  cfg.seed = 9;
  cfg.weights_file = "w.json";
  cfg.cycle.seed = 77;
  cfg.cycle.aggressiveness = 0.9;
  cfg.vehicle.m_veh = 1500.0;
  cfg.plant.k_cu = 0.4;
  cfg.driver.kp = 800.0;
  cfg.sensor.noise_mean_c = 0.5;
  cfg.sensor.delay_s = 0.8;
  cfg.sensor.fault.kind = FaultKind::amplified_noise;
  cfg.sensor.fault.magnitude = 9.0;
  cfg.sensor.fault.t_start = 10.0;
  cfg.sensor.fault.t_end = 20.0;
  cfg.estimator.horizon = 7;
  cfg.estimator.dk = 0.05;
  cfg.estimator.weight_meas = 0.03;
  cfg.calibration.compensate_bias = false;
  cfg.calibration.compensate_lag = false;
  cfg.theta_init_c << 50.0, 51.0, 52.0;

  TempFile f("test_sim_cfg_tmp.json");
  save_sim_config(f.path, cfg);
  const SimConfig back = load_sim_config(f.path);
  CHECK(back.duration_s == cfg.duration_s);
  CHECK(back.dk == cfg.dk);
  CHECK(back.plant_substeps == cfg.plant_substeps);
  CHECK(back.seed == cfg.seed);
  CHECK(back.weights_file == cfg.weights_file);
  CHECK(back.cycle.seed == cfg.cycle.seed);
  CHECK(back.cycle.aggressiveness == cfg.cycle.aggressiveness);
  CHECK(back.vehicle.m_veh == cfg.vehicle.m_veh);
  CHECK(back.plant.k_cu == cfg.plant.k_cu);
  CHECK(back.driver.kp == cfg.driver.kp);
  CHECK(back.sensor.noise_mean_c == cfg.sensor.noise_mean_c);
  CHECK(back.sensor.fault.kind == FaultKind::amplified_noise);
  CHECK(back.sensor.fault.magnitude == cfg.sensor.fault.magnitude);
  CHECK(back.estimator.horizon == cfg.estimator.horizon);
  CHECK(back.estimator.dk == cfg.estimator.dk);
  CHECK(back.estimator.weight_meas == cfg.estimator.weight_meas);
  CHECK(back.calibration.compensate_bias == false);
  CHECK(back.calibration.compensate_lag == false);
  CHECK(back.theta_init_c(2) == 52.0);
}

TEST_CASE("config loading rejects bad files and mismatched grids") {
  CHECK_THROWS_AS(load_sim_config("no_such_dir/missing.json"), IoError);

  TempFile bad("test_sim_badjson_tmp.json");
  {
    std::ofstream out(bad.path);
    out << "this is { not json";
  }
  CHECK_THROWS_AS(load_sim_config(bad.path), SchemaError);

  SimConfig cfg;
  cfg.estimator.dk = 0.2;  // conflicts with the 0.1 loop step
  TempFile f("test_sim_mismatch_tmp.json");
  save_sim_config(f.path, cfg);
  CHECK_THROWS_AS(load_sim_config(f.path), SchemaError);

  SimConfig zero;
  zero.duration_s = 0.0;
  CHECK_THROWS_AS(zero.validate(), SchemaError);
}

TEST_CASE("an omitted estimator grid follows the loop step") {
  TempFile f("test_sim_minimal_tmp.json");
  {
    std::ofstream out(f.path);
    out << "{\"dk_s\": 0.25, \"duration_s\": 10.0}\n";
  }
  const SimConfig cfg = load_sim_config(f.path);
  CHECK(cfg.dk == 0.25);
  CHECK(cfg.estimator.dk == 0.25);
  CHECK(cfg.estimator.horizon == 15);
}
