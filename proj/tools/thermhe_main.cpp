// Command line front end: data generation, training, closed-loop simulation,
// fault experiments and run report summaries.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "thermhe/csv.hpp"
#include "thermhe/dataset.hpp"
#include "thermhe/error.hpp"
#include "thermhe/sim.hpp"
#include "thermhe/thermal_plant.hpp"
#include "thermhe/training.hpp"
#include "thermhe/weights_io.hpp"

namespace {

using namespace thermhe;

TrainConfig load_train_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open train config: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("train config is not valid json: " + std::string(e.what()));
  }
  TrainConfig c;
  auto num = [&](const char* k, auto& field) {
    if (j.contains(k)) field = j.at(k).get<std::decay_t<decltype(field)>>();
  };
  num("max_epochs", c.max_epochs);
  num("mini_batch", c.mini_batch);
  num("lr0", c.lr0);
  num("lr_drop", c.lr_drop);
  num("lr_drop_period", c.lr_drop_period);
  num("l2", c.l2);
  num("grad_clip", c.grad_clip);
  num("val_frequency", c.val_frequency);
  num("adam_beta1", c.adam_beta1);
  num("adam_beta2", c.adam_beta2);
  num("adam_eps", c.adam_eps);
  num("hidden_dim", c.hidden_dim);
  num("chunk_len", c.chunk_len);
  num("seed", c.seed);
  return c;
}

int cmd_generate(const std::string& out, int cycles, uint64_t seed, double duration, double dk,
                 double aggr_lo, double aggr_hi) {
  DataGenConfig cfg;
  cfg.cycles = cycles;
  cfg.seed = seed;
  cfg.cycle_duration_s = duration;
  cfg.dk = dk;
  cfg.aggressiveness_lo = aggr_lo;
  cfg.aggressiveness_hi = aggr_hi;
  const Dataset d = generate_dataset(cfg);
  save_dataset_csv(out, d);
  std::printf("wrote %lld samples in %zu sequences to %s\n",
              static_cast<long long>(d.total_points()), d.sequences.size(), out.c_str());
  return 0;
}

int cmd_train(const std::string& data, const std::string& config, const std::string& out,
              const std::string& report, int decimate, double split_ratio, uint64_t split_seed) {
  TrainConfig cfg = config.empty() ? TrainConfig{} : load_train_config(config);
  Dataset d = load_dataset_csv(data);
  if (decimate > 1) d = decimate_dataset(d, decimate);
  auto [d_train, d_val] = split_dataset(d, split_ratio, split_seed);
  std::printf("training on %lld samples, validating on %lld\n",
              static_cast<long long>(d_train.total_points()),
              static_cast<long long>(d_val.total_points()));
  auto [params, rep] = train(d_train, d_val, cfg);
  save_weights(out, params);
  std::array<OutputMetrics, 2> metrics{};
  bool have_metrics = false;
  if (!d_val.sequences.empty()) {
    metrics = evaluate_metrics(params, d_val);
    have_metrics = true;
    std::printf("held-out nrmse: dtheta_w %.3f%%, dtheta_r %.3f%%\n", 100.0 * metrics[0].nrmse,
                100.0 * metrics[1].nrmse);
  }
  if (!report.empty()) save_train_report(report, cfg, rep, have_metrics ? &metrics : nullptr);
  std::printf("best val loss %.6g at iteration %lld (%.1f s)\n", rep.best_val_loss,
              static_cast<long long>(rep.best_iteration), rep.duration_s);
  return 0;
}

int cmd_simulate(const std::string& config, const std::string& out, const std::string& solver_log,
                 const std::string& metrics_path, long long seed_override) {
  SimConfig cfg = load_sim_config(config);
  if (seed_override >= 0) cfg.seed = static_cast<uint64_t>(seed_override);
  const LstmParams<double> net = load_weights(cfg.weights_file);
  const RunResult r = run_mil(cfg, net);
  save_run_csv(out, r.records);
  if (!solver_log.empty()) save_solver_log_csv(solver_log, r.records);
  if (!metrics_path.empty()) save_metrics_json(metrics_path, r.metrics);
  std::printf("run: %zu records, est rmse w/r %.3f/%.3f degC, meas rmse w/r %.3f/%.3f degC\n",
              r.records.size(), r.metrics.winding.rmse_est, r.metrics.rotor.rmse_est,
              r.metrics.winding.rmse_meas, r.metrics.rotor.rmse_meas);
  std::printf("solve time: mean %.2f ms, p99 %.2f ms, max %.2f ms\n", r.metrics.timing.mean_ms,
              r.metrics.timing.p99_ms, r.metrics.timing.max_ms);
  return 0;
}

int cmd_fault_test(const std::string& config, const std::string& out, const std::string& kind,
                   double magnitude, double t_start, double t_end) {
  SimConfig cfg = load_sim_config(config);
  const LstmParams<double> net = load_weights(cfg.weights_file);
  FaultProfile profile;
  profile.kind = fault_kind_from_string(kind);
  profile.magnitude = magnitude;
  profile.t_start = t_start;
  profile.t_end = t_end;
  const FaultReport rep = fault_experiment(cfg, net, profile);
  if (!out.empty()) save_fault_report_json(out, rep);
  if (rep.faulted.fault_window) {
    const auto& w = *rep.faulted.fault_window;
    std::printf("fault %s [%g, %g): in-window est bias w/r %.3f/%.3f degC, est rmse %.3f/%.3f, "
                "meas rmse %.3f/%.3f\n",
                kind.c_str(), w.t0, w.t1, w.winding.bias_est, w.rotor.bias_est, w.winding.rmse_est,
                w.rotor.rmse_est, w.winding.rmse_meas, w.rotor.rmse_meas);
  } else {
    std::printf("fault none: runs identical = %s\n", rep.runs_identical ? "true" : "false");
  }
  return 0;
}

int cmd_report(const std::string& in, const std::string& out, const std::string& series) {
  const std::vector<SimRecord> records = load_run_csv(in);
  if (!series.empty()) {
    CsvWriter w(series);
    w.header({"t_s", "truth_tw", "meas_tw", "est_tw", "truth_tr", "meas_tr", "est_tr"});
    for (const auto& r : records)
      w.row({r.t, r.truth_tw, r.meas_tw, r.est_tw, r.truth_tr, r.meas_tr, r.est_tr});
  }
  MheConfig est;  // default box just for violation counting
  const RunMetrics m = compute_metrics(records, est, nullptr);
  std::printf("records: %zu, span %.1f s\n", records.size(),
              records.empty() ? 0.0 : records.back().t - records.front().t);
  std::printf("winding: est rmse %.4f degC (bias %+.4f), meas rmse %.4f degC (bias %+.4f)\n",
              m.winding.rmse_est, m.winding.bias_est, m.winding.rmse_meas, m.winding.bias_meas);
  std::printf("rotor:   est rmse %.4f degC (bias %+.4f), meas rmse %.4f degC (bias %+.4f)\n",
              m.rotor.rmse_est, m.rotor.bias_est, m.rotor.rmse_meas, m.rotor.bias_meas);
  std::printf("solve time: mean %.3f ms, p99 %.3f ms, max %.3f ms\n", m.timing.mean_ms,
              m.timing.p99_ms, m.timing.max_ms);
  if (!out.empty()) save_metrics_json(out, m);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LSTM thermal model inside a moving horizon estimator: data, training, "
               "closed-loop simulation and reporting"};
  app.require_subcommand(1);

  // generate-data
  auto* gen = app.add_subcommand("generate-data", "synthesize drive cycles and record a dataset");
  std::string gen_out = "dataset.csv";
  int gen_cycles = 8;
  uint64_t gen_seed = 1;
  double gen_duration = 400.0, gen_dk = 0.01, gen_alo = 0.35, gen_ahi = 1.0;
  gen->add_option("--cycles", gen_cycles, "number of cycles")->check(CLI::PositiveNumber);
  gen->add_option("--seed", gen_seed, "rng seed");
  gen->add_option("--out", gen_out, "output csv")->required();
  gen->add_option("--duration", gen_duration, "cycle duration, s");
  gen->add_option("--dk", gen_dk, "sample step, s");
  gen->add_option("--aggressiveness-lo", gen_alo, "lower aggressiveness bound");
  gen->add_option("--aggressiveness-hi", gen_ahi, "upper aggressiveness bound");

  // train
  auto* tr = app.add_subcommand("train", "fit the thermal network on a dataset");
  std::string tr_data, tr_config, tr_out = "weights.json", tr_report;
  int tr_decimate = 1;
  double tr_ratio = 0.8;
  uint64_t tr_split_seed = 7;
  tr->add_option("--data", tr_data, "dataset csv")->required();
  tr->add_option("--config", tr_config, "training config json");
  tr->add_option("--out", tr_out, "weights json")->required();
  tr->add_option("--report", tr_report, "training report json");
  tr->add_option("--decimate", tr_decimate, "resample factor before training");
  tr->add_option("--split-ratio", tr_ratio, "training fraction of sequences");
  tr->add_option("--split-seed", tr_split_seed, "sequence shuffle seed");

  // simulate
  auto* si = app.add_subcommand("simulate", "closed-loop run with the estimator in the loop");
  std::string si_config, si_out = "run.csv", si_log, si_metrics;
  long long si_seed = -1;
  si->add_option("--config", si_config, "sim config json")->required();
  si->add_option("--out", si_out, "run csv")->required();
  si->add_option("--solver-log", si_log, "per-step solver log csv");
  si->add_option("--metrics", si_metrics, "metrics json");
  si->add_option("--seed", si_seed, "override config seed");

  // fault-test
  auto* ft = app.add_subcommand("fault-test", "compare a faulted run against the nominal one");
  std::string ft_config, ft_out, ft_kind = "offset";
  double ft_mag = -5.0, ft_t0 = 60.0, ft_t1 = 62.0;
  ft->add_option("--config", ft_config, "sim config json")->required();
  ft->add_option("--out", ft_out, "fault report json");
  ft->add_option("--kind", ft_kind, "none|offset|amplified_noise");
  ft->add_option("--magnitude", ft_mag, "offset degC or variance factor");
  ft->add_option("--t-start", ft_t0, "fault start, s");
  ft->add_option("--t-end", ft_t1, "fault end, s");

  // report
  auto* rp = app.add_subcommand("report", "summarize a recorded run");
  std::string rp_in, rp_out, rp_series;
  rp->add_option("--in", rp_in, "run csv")->required();
  rp->add_option("--out", rp_out, "metrics json");
  rp->add_option("--series", rp_series, "plot-ready temperature series csv");

  // exit 0 on success, 1 when the invocation or its inputs are invalid,
  // 2 when a run fails at runtime
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (gen->parsed())
      return cmd_generate(gen_out, gen_cycles, gen_seed, gen_duration, gen_dk, gen_alo, gen_ahi);
    if (tr->parsed())
      return cmd_train(tr_data, tr_config, tr_out, tr_report, tr_decimate, tr_ratio, tr_split_seed);
    if (si->parsed()) return cmd_simulate(si_config, si_out, si_log, si_metrics, si_seed);
    if (ft->parsed()) return cmd_fault_test(ft_config, ft_out, ft_kind, ft_mag, ft_t0, ft_t1);
    if (rp->parsed()) return cmd_report(rp_in, rp_out, rp_series);
  } catch (const SchemaError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const IoError& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return 1;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 1;
}
