#include "thermhe/thermal_plant.hpp"

#include <algorithm>
#include <cmath>

#include "thermhe/error.hpp"

namespace thermhe {

void LptnParams::validate() const {
  if ((capacitance.array() <= 0.0).any()) throw SchemaError("plant capacitances must be positive");
  if (!conductance.isApprox(conductance.transpose()))
    throw SchemaError("plant conductance matrix must be symmetric");
  if ((conductance.array() < 0.0).any() || (coolant_conductance.array() < 0.0).any())
    throw SchemaError("plant conductances must be non-negative");
  if ((conductance.diagonal().array() != 0.0).any())
    throw SchemaError("plant conductance diagonal must be zero");
  if (k_cu < 0 || k_fe < 0 || k_mech < 0) throw SchemaError("loss coefficients must be non-negative");
  for (const auto* f : {&copper_frac, &iron_frac, &mech_frac}) {
    if ((f->array() < 0.0).any() || std::abs(f->sum() - 1.0) > 1e-9)
      throw SchemaError("loss injection fractions must be a distribution over the nodes");
  }
}

Eigen::Vector3d power_loss(const LptnParams& lp, double n_em_rpm, double t_em_nm) {
  const double n = std::abs(n_em_rpm);
  const double p_cu = lp.k_cu * t_em_nm * t_em_nm;
  const double p_fe = lp.k_fe * std::pow(n, 1.5);
  const double p_mech = lp.k_mech * n;
  return lp.copper_frac * p_cu + lp.iron_frac * p_fe + lp.mech_frac * p_mech;
}

Eigen::Vector3d lptn_rates(const LptnParams& lp, const PlantState& ps, double n_em_rpm,
                           double t_em_nm) {
  const Eigen::Vector3d p = power_loss(lp, n_em_rpm, t_em_nm);
  Eigen::Vector3d q = p;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j)
      if (j != i) q(i) += lp.conductance(i, j) * (ps.theta_c(j) - ps.theta_c(i));
    q(i) += lp.coolant_conductance(i) * (lp.coolant_temp_c - ps.theta_c(i));
  }
  return q.cwiseQuotient(lp.capacitance);
}

PlantState lptn_step(const LptnParams& lp, const PlantState& ps, double n_em_rpm, double t_em_nm,
                     double dk) {
  if (!(dk > 0)) throw std::invalid_argument("lptn_step: dk must be positive");
  PlantState next;
  next.theta_c = ps.theta_c + dk * lptn_rates(lp, ps, n_em_rpm, t_em_nm);
  if (!next.theta_c.allFinite() || next.theta_c.cwiseAbs().maxCoeff() > 500.0)
    throw PlantDiverged("plant temperatures left the plausible envelope");
  return next;
}

FaultKind fault_kind_from_string(const std::string& s) {
  if (s == "none") return FaultKind::none;
  if (s == "offset") return FaultKind::offset;
  if (s == "amplified_noise") return FaultKind::amplified_noise;
  throw SchemaError("unknown fault kind: " + s);
}

std::string to_string(FaultKind k) {
  switch (k) {
    case FaultKind::none: return "none";
    case FaultKind::offset: return "offset";
    case FaultKind::amplified_noise: return "amplified_noise";
  }
  return "none";
}

SensorChannel::SensorChannel(const SensorConfig& cfg, double dk) : cfg_(cfg) {
  if (!(dk > 0)) throw std::invalid_argument("SensorChannel: dk must be positive");
  if (cfg.delay_s < 0) throw SchemaError("sensor delay must be non-negative");
  if (cfg.noise_var_c2 < 0) throw SchemaError("sensor noise variance must be non-negative");
  delay_steps_ = static_cast<int>(std::lround(cfg.delay_s / dk));
  ring_.assign(static_cast<size_t>(delay_steps_) + 1, 0.0);
}

double SensorChannel::read(double truth_c, double t, std::mt19937_64& rng) {
  ring_[head_] = truth_c;
  // Oldest available sample; zero-order hold until the line fills.
  const size_t lag = std::min(filled_, ring_.size() - 1);
  const double delayed = ring_[(head_ + ring_.size() - lag) % ring_.size()];
  head_ = (head_ + 1) % ring_.size();
  if (filled_ < ring_.size() - 1) ++filled_;

  double var = cfg_.noise_var_c2;
  double bias = cfg_.noise_mean_c;
  if (cfg_.fault.active(t)) {
    if (cfg_.fault.kind == FaultKind::offset) bias += cfg_.fault.magnitude;
    if (cfg_.fault.kind == FaultKind::amplified_noise) var *= cfg_.fault.magnitude;
  }
  std::normal_distribution<double> noise(bias, std::sqrt(var));
  return delayed + noise(rng);
}

DrivingCycle synthesize_cycle(uint64_t seed, double duration_s, double aggressiveness,
                              double v_max) {
  if (duration_s <= 0) throw std::invalid_argument("synthesize_cycle: duration must be positive");
  const double a = std::clamp(aggressiveness, 0.0, 1.0);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);

  // Grade: two slow seeded sine components, bounded to roughly +-4.5 deg.
  const double p1 = 40.0 + 80.0 * uni(rng);
  const double p2 = 15.0 + 40.0 * uni(rng);
  const double ph1 = 2.0 * M_PI * uni(rng);
  const double ph2 = 2.0 * M_PI * uni(rng);
  const double grade_amp = 0.02 + 0.06 * a;

  const double v_lo = (0.04 + 0.08 * (1.0 - a)) * v_max;
  const double v_hi = (0.45 + 0.55 * a) * v_max;
  const double ramp = 0.6 + 2.2 * a;  // m/s^2 commanded ramp rate

  DrivingCycle c;
  const double dk = 0.1;
  double v_cmd = v_lo + (v_hi - v_lo) * uni(rng);
  double v_tgt = v_cmd;
  double hold_left = 2.0 + 10.0 * uni(rng);
  const int n = static_cast<int>(std::lround(duration_s / dk));
  c.samples.reserve(static_cast<size_t>(n) + 1);
  for (int k = 0; k <= n; ++k) {
    const double t = k * dk;
    if (std::abs(v_cmd - v_tgt) < 1e-9) {
      hold_left -= dk;
      if (hold_left <= 0.0) {
        v_tgt = v_lo + (v_hi - v_lo) * uni(rng);
        hold_left = 2.0 + (14.0 - 8.0 * a) * uni(rng);
      }
    }
    const double dv = std::clamp(v_tgt - v_cmd, -ramp * dk, ramp * dk);
    v_cmd += dv;
    const double phi = grade_amp * (0.65 * std::sin(2.0 * M_PI * t / p1 + ph1) +
                                    0.35 * std::sin(2.0 * M_PI * t / p2 + ph2));
    c.samples.push_back({t, v_cmd, phi});
  }
  return c;
}

Dataset generate_dataset(const DataGenConfig& cfg) {
  if (cfg.cycles < 1) throw std::invalid_argument("generate_dataset: need at least one cycle");
  cfg.vehicle.validate();
  cfg.plant.validate();

  Dataset d;
  std::mt19937_64 seeder(cfg.seed);
  for (int cyc = 0; cyc < cfg.cycles; ++cyc) {
    const uint64_t cycle_seed = seeder();
    const double frac = cfg.cycles == 1 ? 1.0 : static_cast<double>(cyc) / (cfg.cycles - 1);
    const double aggr = cfg.aggressiveness_lo + (cfg.aggressiveness_hi - cfg.aggressiveness_lo) * frac;
    const DrivingCycle cycle =
        synthesize_cycle(cycle_seed, cfg.cycle_duration_s, aggr, cfg.vehicle.v_max);

    const Eigen::Index steps = static_cast<Eigen::Index>(std::lround(cfg.cycle_duration_s / cfg.dk));
    DataSequence s;
    s.t.resize(steps);
    s.inputs.resize(steps, 4);
    s.targets.resize(steps, 2);

    double v = 0.0;
    PiState pi;
    PlantState ps = cfg.init;
    for (Eigen::Index k = 0; k < steps; ++k) {
      const double t = static_cast<double>(k) * cfg.dk;
      const auto [v_ref, phi] = cycle.at(t);
      auto [cmd, pi_next] = pi_driver_step(cfg.driver, cfg.vehicle, pi, v_ref, v, cfg.dk);
      pi = pi_next;
      const double n_em = em_speed(cfg.vehicle, v);
      const double t_em = cmd.t_em_total();
      const Eigen::Vector3d rates = lptn_rates(cfg.plant, ps, n_em, t_em);

      s.t(k) = t;
      s.inputs(k, 0) = n_em;
      s.inputs(k, 1) = t_em;
      s.inputs(k, 2) = ps.theta_c(0);
      s.inputs(k, 3) = ps.theta_c(1);
      s.targets(k, 0) = rates(0);
      s.targets(k, 1) = rates(1);

      ps = lptn_step(cfg.plant, ps, n_em, t_em, cfg.dk);
      v = vehicle_euler_step(cfg.vehicle, v, cmd, phi, cfg.dk);
    }
    d.sequences.push_back(std::move(s));
  }
  return d;
}

}  // namespace thermhe
