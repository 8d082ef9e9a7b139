#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "thermhe/dataset.hpp"
#include "thermhe/vehicle.hpp"

namespace thermhe {

// Ground-truth machine thermal model: a three-node lumped-parameter network
// (winding, rotor, stator/housing) with speed/torque dependent loss
// injection and a coolant sink. Deliberately richer than the two-state
// estimator view, so the latent stator node is something the network has to
// absorb into its hidden state.
struct LptnParams {
  Eigen::Vector3d capacitance{2200.0, 4200.0, 9500.0};  // J/K (w, r, s)
  // Pairwise conductances, W/K; symmetric with zero diagonal.
  Eigen::Matrix3d conductance = (Eigen::Matrix3d() <<
      0.0, 4.0, 25.0,
      4.0, 0.0, 8.0,
      25.0, 8.0, 0.0).finished();
  Eigen::Vector3d coolant_conductance{0.0, 2.0, 60.0};  // W/K per node
  double coolant_temp_c = 55.0;

  double k_cu = 0.35;    // W / Nm^2, copper loss vs torque squared
  double k_fe = 0.002;   // W / rpm^1.5, iron loss vs speed
  double k_mech = 0.03;  // W / rpm, friction and windage
  Eigen::Vector3d copper_frac{1.0, 0.0, 0.0};
  Eigen::Vector3d iron_frac{0.0, 0.3, 0.7};
  Eigen::Vector3d mech_frac{0.0, 0.6, 0.4};

  void validate() const;
};

struct PlantState {
  Eigen::Vector3d theta_c{60.0, 60.0, 58.0};  // degC (winding, rotor, stator)
};

// Electrical and mechanical loss power injected into each node, W.
Eigen::Vector3d power_loss(const LptnParams& lp, double n_em_rpm, double t_em_nm);

// Node temperature rates, degC/s.
Eigen::Vector3d lptn_rates(const LptnParams& lp, const PlantState& ps, double n_em_rpm,
                           double t_em_nm);

// Explicit Euler step; throws PlantDiverged if temperatures leave a wide
// plausibility envelope.
PlantState lptn_step(const LptnParams& lp, const PlantState& ps, double n_em_rpm, double t_em_nm,
                     double dk);

enum class FaultKind { none, offset, amplified_noise };

FaultKind fault_kind_from_string(const std::string& s);
std::string to_string(FaultKind k);

// Time-windowed sensor fault. `magnitude` is the additive offset in degC for
// offset faults and the variance multiplier for amplified noise.
struct FaultProfile {
  FaultKind kind = FaultKind::none;
  double magnitude = 0.0;
  double t_start = 0.0;
  double t_end = 0.0;

  bool active(double t) const { return kind != FaultKind::none && t >= t_start && t < t_end; }
};

struct SensorConfig {
  double noise_mean_c = -1.0;  // systematic offset baked into the sensor
  double noise_var_c2 = 0.1;
  double delay_s = 1.5;
  FaultProfile fault;
};

// One delayed, noisy temperature channel sampled on a fixed grid. The ring
// buffer replays the value from delay_s ago; before it fills, the oldest
// recorded sample is held.
class SensorChannel {
 public:
  SensorChannel(const SensorConfig& cfg, double dk);

  // Push the current true temperature and read the corrupted measurement.
  double read(double truth_c, double t, std::mt19937_64& rng);

  int delay_steps() const { return delay_steps_; }

 private:
  SensorConfig cfg_;
  int delay_steps_;
  std::vector<double> ring_;
  size_t head_ = 0;
  size_t filled_ = 0;
};

// Synthetic speed/grade profile: piecewise ramp-and-hold reference with a
// slow seeded grade swell. aggressiveness in [0, 1] scales both the speed
// span and the ramp rates.
DrivingCycle synthesize_cycle(uint64_t seed, double duration_s, double aggressiveness,
                              double v_max);

struct DataGenConfig {
  int cycles = 8;
  uint64_t seed = 1;
  double cycle_duration_s = 400.0;
  double dk = 0.01;
  double aggressiveness_lo = 0.35;
  double aggressiveness_hi = 1.0;
  VehicleParams vehicle;
  LptnParams plant;
  PiConfig driver;
  PlantState init;
};

// Closed-loop excitation runs: drive the synthetic cycles with the PI driver
// and record network inputs plus exact plant temperature rates.
Dataset generate_dataset(const DataGenConfig& cfg);

}  // namespace thermhe
