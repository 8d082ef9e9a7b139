#include "thermhe/vehicle.hpp"

#include <algorithm>
#include <cmath>

#include "thermhe/csv.hpp"
#include "thermhe/error.hpp"

namespace thermhe {

void VehicleParams::validate() const {
  if (m_veh <= 0 || r_dyn <= 0 || a_c <= 0 || i_diff <= 0 || rho_air <= 0 || g <= 0 || v_max <= 0)
    throw SchemaError("vehicle parameters must be positive");
  if (c_d < 0 || c_r < 0) throw SchemaError("drag and rolling coefficients must be non-negative");
}

std::pair<double, double> DrivingCycle::at(double t) const {
  if (samples.empty()) throw Error("empty driving cycle");
  if (t <= samples.front().t) return {samples.front().v_ref, samples.front().phi};
  if (t >= samples.back().t) return {samples.back().v_ref, samples.back().phi};
  auto it = std::upper_bound(samples.begin(), samples.end(), t,
                             [](double val, const CycleSample& s) { return val < s.t; });
  const CycleSample& hi = *it;
  const CycleSample& lo = *(it - 1);
  const double span = hi.t - lo.t;
  if (span <= 0) return {lo.v_ref, lo.phi};
  const double a = (t - lo.t) / span;
  return {lo.v_ref + a * (hi.v_ref - lo.v_ref), lo.phi + a * (hi.phi - lo.phi)};
}

DrivingCycle load_cycle_csv(const std::string& path) {
  const CsvTable t = read_csv(path);
  const int ct = t.column_index("t_s");
  const int cv = t.column_index("v_ref_mps");
  const int cp = t.column_index("phi_rad");
  DrivingCycle c;
  c.samples.reserve(t.rows.size());
  double prev_t = -1.0;
  for (const auto& row : t.rows) {
    CycleSample s{row[ct], row[cv], row[cp]};
    if (s.t <= prev_t) throw SchemaError("cycle timestamps must be strictly increasing");
    if (s.v_ref < 0) throw SchemaError("cycle reference speed must be non-negative");
    prev_t = s.t;
    c.samples.push_back(s);
  }
  if (c.samples.empty()) throw SchemaError("cycle has no samples: " + path);
  return c;
}

void save_cycle_csv(const std::string& path, const DrivingCycle& cycle) {
  CsvWriter w(path);
  w.header({"t_s", "v_ref_mps", "phi_rad"});
  for (const auto& s : cycle.samples) w.row({s.t, s.v_ref, s.phi});
}

double longitudinal_accel(const VehicleParams& vp, double v, const DriveCommand& cmd, double phi) {
  const double f_trac = cmd.t_total() * vp.i_diff / vp.r_dyn;
  const double f_aero = 0.5 * vp.rho_air * vp.c_d * vp.a_c * v * std::abs(v);
  const double dir = v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0);
  const double f_roll = dir * vp.c_r * vp.m_veh * vp.g * std::cos(phi);
  const double f_grade = vp.m_veh * vp.g * std::sin(phi);
  return (f_trac - f_aero - f_roll - f_grade) / vp.m_veh;
}

double vehicle_euler_step(const VehicleParams& vp, double v, const DriveCommand& cmd, double phi,
                          double dk) {
  if (!(dk > 0)) throw std::invalid_argument("vehicle_euler_step: dk must be positive");
  return std::max(0.0, v + dk * longitudinal_accel(vp, v, cmd, phi));
}

double em_speed(const VehicleParams& vp, double v) {
  return 30.0 * v * vp.i_diff / (M_PI * vp.r_dyn);
}

std::pair<DriveCommand, PiState> pi_driver_step(const PiConfig& cfg, const VehicleParams& vp,
                                                const PiState& st, double v_ref, double v,
                                                double dk) {
  if (!(dk > 0)) throw std::invalid_argument("pi_driver_step: dk must be positive");
  const double e = std::min(v_ref, vp.v_max) - v;
  const double lo = -(cfg.t_em_max + cfg.t_fric_max);
  const double hi = cfg.t_em_max;
  const double u_raw = cfg.kp * e + cfg.ki * (st.integral + e * dk);
  const double u = std::clamp(u_raw, lo, hi);

  PiState next = st;
  // Clamping anti-windup: hold the integrator while it would push the output
  // further into saturation.
  if (u_raw == u || (u_raw > hi && e < 0) || (u_raw < lo && e > 0)) next.integral += e * dk;

  DriveCommand cmd;
  if (u >= 0) {
    cmd.t_em_acc = u;
  } else {
    cmd.t_em_brk = std::max(u, -cfg.t_em_max);
    cmd.t_fric_brk = std::clamp(u - cmd.t_em_brk, -cfg.t_fric_max, 0.0);
  }
  return {cmd, next};
}

}  // namespace thermhe
