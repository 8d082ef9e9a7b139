#pragma once

#include <string>
#include <utility>
#include <vector>

namespace thermhe {

// Longitudinal single-track parameters of the reference EV.
struct VehicleParams {
  double m_veh = 1160.0;        // kg
  double c_d = 0.32;            // aerodynamic drag coefficient
  double c_r = 0.011;           // rolling resistance coefficient
  double r_dyn = 0.293;         // m, dynamic wheel radius
  double a_c = 2.21;            // m^2, frontal area
  double i_diff = 9.3;          // single-speed reduction ratio
  double v_max = 130.0 / 3.6;   // m/s
  double rho_air = 1.204;       // kg/m^3
  double g = 9.81;              // m/s^2

  void validate() const;
};

// Split drive command. Acceleration torque is non-negative, both brake
// torques are non-positive; all act at the machine shaft.
struct DriveCommand {
  double t_em_acc = 0.0;   // Nm
  double t_em_brk = 0.0;   // Nm
  double t_fric_brk = 0.0; // Nm

  double t_em_total() const { return t_em_acc + t_em_brk; }
  double t_total() const { return t_em_acc + t_em_brk + t_fric_brk; }
};

struct CycleSample {
  double t = 0.0;      // s
  double v_ref = 0.0;  // m/s
  double phi = 0.0;    // rad, road grade angle
};

// Reference speed and grade profile, linearly interpolated between samples
// and held constant beyond the ends.
struct DrivingCycle {
  std::vector<CycleSample> samples;

  double duration() const { return samples.empty() ? 0.0 : samples.back().t; }
  std::pair<double, double> at(double t) const;  // (v_ref, phi)
};

DrivingCycle load_cycle_csv(const std::string& path);
void save_cycle_csv(const std::string& path, const DrivingCycle& cycle);

// Net longitudinal acceleration from traction minus aero drag, rolling
// resistance and grade load. Rolling resistance opposes motion and vanishes
// at standstill; drag is quadratic with sign against the velocity.
double longitudinal_accel(const VehicleParams& vp, double v, const DriveCommand& cmd, double phi);

// Explicit Euler step of the speed, clipped below at zero (no reverse).
double vehicle_euler_step(const VehicleParams& vp, double v, const DriveCommand& cmd, double phi,
                          double dk);

// Machine speed in rpm for a given vehicle speed.
double em_speed(const VehicleParams& vp, double v);

struct PiConfig {
  double kp = 900.0;          // Nm per m/s
  double ki = 60.0;           // Nm per m
  double t_em_max = 150.0;    // Nm, machine torque limit (both signs)
  double t_fric_max = 400.0;  // Nm, friction brake limit
};

struct PiState {
  double integral = 0.0;  // m, accumulated speed error
};

// Speed-tracking PI driver with clamping anti-windup. Negative demand is
// served by regenerative braking first, the remainder by friction brakes.
std::pair<DriveCommand, PiState> pi_driver_step(const PiConfig& cfg, const VehicleParams& vp,
                                                const PiState& st, double v_ref, double v,
                                                double dk);

}  // namespace thermhe
