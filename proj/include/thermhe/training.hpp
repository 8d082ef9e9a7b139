#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "thermhe/dataset.hpp"
#include "thermhe/lstm.hpp"

namespace thermhe {

struct TrainConfig {
  int max_epochs = 10000;
  int mini_batch = 512;          // chunks per update
  double lr0 = 0.02;
  double lr_drop = 0.25;         // fractional drop applied every lr_drop_period epochs
  int lr_drop_period = 500;
  double l2 = 1e-4;  // heavier decay visibly underfits the rate targets
  double grad_clip = 1.0;        // global norm threshold
  int val_frequency = 10;        // updates between validation passes
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int hidden_dim = 8;
  int chunk_len = 150;           // training slices per sequence; 0 keeps sequences whole
  uint64_t seed = 1;
};

double lr_schedule(const TrainConfig& cfg, int completed_epochs);

// Flat parameter vector covering the trainable tensors (normalization
// constants excluded), in a fixed documented order: w_u_*, w_h_*, b_* for
// gates (i, f, g, o), then fc_w, fc_b, all row-major.
Eigen::VectorXd pack_params(const LstmParams<double>& p);
void unpack_params(const Eigen::VectorXd& flat, LstmParams<double>& p);

// Seeded Glorot-uniform initialization; forget gate bias starts at 1.
LstmParams<double> init_params(int input_dim, int hidden_dim, uint64_t seed);

double mse_loss(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target);

// Gradient of the sequence MSE with respect to the flat parameter vector,
// via backpropagation through time from zero initial state. Also returns
// the loss.
std::pair<Eigen::VectorXd, double> bptt_gradients(const LstmParams<double>& p,
                                                  const Eigen::MatrixXd& inputs,
                                                  const Eigen::MatrixXd& targets);

Eigen::VectorXd clip_gradients(const Eigen::VectorXd& grads, double threshold);

struct AdamState {
  Eigen::VectorXd m, v;
  long t = 0;

  static AdamState zeros(Eigen::Index n) {
    return {Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n), 0};
  }
};

// One Adam update with bias correction. L2 regularization enters as
// l2 * params added to the raw gradient before the moment updates.
void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grads, AdamState& st,
               const TrainConfig& cfg, double lr);

// Deterministic sequence-level split; ratio is the training fraction.
std::pair<Dataset, Dataset> split_dataset(const Dataset& d, double train_ratio, uint64_t seed);

struct TrainLogEntry {
  long iteration = 0;
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = std::numeric_limits<double>::quiet_NaN();
};

struct OutputMetrics {
  double mae = 0.0;
  double rmse = 0.0;
  double nrmse = 0.0;           // rmse over target range
  bool range_defined = false;   // false when the target range collapses
};

struct TrainReport {
  std::vector<TrainLogEntry> log;
  double best_val_loss = std::numeric_limits<double>::infinity();
  long best_iteration = -1;
  long iterations = 0;
  int epochs = 0;
  double duration_s = 0.0;
};

void save_train_report(const std::string& path, const TrainConfig& cfg, const TrainReport& rep,
                       const std::array<OutputMetrics, 2>* test_metrics);

// Teacher-forced evaluation over whole sequences, per output channel.
std::array<OutputMetrics, 2> evaluate_metrics(const LstmParams<double>& p, const Dataset& d);

// Mini-batch Adam training with gradient clipping and periodic validation;
// returns the parameters of the best validation checkpoint.
std::pair<LstmParams<double>, TrainReport> train(const Dataset& d_train, const Dataset& d_val,
                                                 const TrainConfig& cfg);

}  // namespace thermhe
