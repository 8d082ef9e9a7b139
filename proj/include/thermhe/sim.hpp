#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

#include "thermhe/mhe.hpp"
#include "thermhe/thermal_plant.hpp"
#include "thermhe/vehicle.hpp"

namespace thermhe {

// What the harness is allowed to correct for: documented sensor properties.
// Injected faults are never visible to the estimator.
struct CalibrationConfig {
  bool compensate_bias = true;  // subtract the known systematic sensor offset
  bool compensate_lag = true;   // run the window on the delayed timeline and
                                // predict forward over the known sensor delay
};

struct CycleSpec {
  std::string file;  // non-empty: load instead of synthesizing
  uint64_t seed = 42;
  double aggressiveness = 0.7;
};

struct SimConfig {
  double duration_s = 600.0;
  double dk = 0.1;          // estimator and logging step
  int plant_substeps = 10;  // driver/vehicle/plant run this much finer
  uint64_t seed = 1;
  std::string weights_file = "weights.json";
  CycleSpec cycle;
  VehicleParams vehicle;
  LptnParams plant;
  PiConfig driver;
  SensorConfig sensor;
  MheConfig estimator;
  CalibrationConfig calibration;
  Eigen::Vector3d theta_init_c{60.0, 60.0, 58.0};

  void validate() const;
};

SimConfig load_sim_config(const std::string& path);
void save_sim_config(const std::string& path, const SimConfig& cfg);

struct SimRecord {
  double t = 0.0;
  double truth_tw = 0.0, truth_tr = 0.0;
  double meas_tw = 0.0, meas_tr = 0.0;  // raw sensor values, uncorrected
  double est_tw = 0.0, est_tr = 0.0;
  double v = 0.0;
  double t_em_acc = 0.0, t_em_brk = 0.0, t_fric_brk = 0.0;
  double solve_ms = 0.0;
  int sqp_iters = 0;
  double cost = 0.0;
  double kkt = 0.0;
};

void save_run_csv(const std::string& path, const std::vector<SimRecord>& records);
std::vector<SimRecord> load_run_csv(const std::string& path);
void save_solver_log_csv(const std::string& path, const std::vector<SimRecord>& records);

struct ChannelErrors {
  double rmse_meas = 0.0;
  double rmse_est = 0.0;
  double bias_meas = 0.0;  // mean (meas - truth)
  double bias_est = 0.0;   // mean (est - truth)
  double max_abs_est = 0.0;
};

struct WindowMetrics {
  double t0 = 0.0, t1 = 0.0;
  ChannelErrors winding, rotor;
};

struct TimingStats {
  double mean_ms = 0.0;
  double max_ms = 0.0;
  double p99_ms = 0.0;
};

struct RunMetrics {
  ChannelErrors winding, rotor;
  TimingStats timing;
  int bound_violations = 0;  // estimates outside the configured box
  std::optional<WindowMetrics> fault_window;
};

// Overall metrics; when `sensor` carries an active fault profile, in-window
// statistics are evaluated over the fault interval plus a settling margin.
RunMetrics compute_metrics(const std::vector<SimRecord>& records, const MheConfig& est_cfg,
                           const SensorConfig* sensor, double settle_s = 3.0);

struct RunResult {
  std::vector<SimRecord> records;
  RunMetrics metrics;
};

// Closed-loop model-in-the-loop run: PI driver tracks the cycle, the plant
// integrates on substeps, sensors sample with delay/noise/faults at the
// estimator rate, and the window estimator produces the temperature trace.
RunResult run_mil(const SimConfig& cfg, const LstmParams<double>& net);

struct FaultReport {
  FaultProfile profile;
  RunMetrics nominal;  // same seed, fault disabled
  RunMetrics faulted;
  bool runs_identical = false;  // sanity marker for the none profile
};

FaultReport fault_experiment(const SimConfig& cfg, const LstmParams<double>& net,
                             const FaultProfile& profile);

void save_metrics_json(const std::string& path, const RunMetrics& m);
void save_fault_report_json(const std::string& path, const FaultReport& r);

}  // namespace thermhe
