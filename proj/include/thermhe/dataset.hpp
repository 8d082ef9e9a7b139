#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace thermhe {

// One recorded excitation sequence: per-row features (n_em_rpm, t_em_nm,
// theta_w_c, theta_r_c) and the matching temperature rate targets.
struct DataSequence {
  Eigen::VectorXd t;        // s
  Eigen::MatrixXd inputs;   // rows x 4
  Eigen::MatrixXd targets;  // rows x 2 (dtheta_w, dtheta_r in degC/s)
};

struct Dataset {
  std::vector<DataSequence> sequences;
  std::string split_tag;

  Eigen::Index total_points() const {
    Eigen::Index n = 0;
    for (const auto& s : sequences) n += s.inputs.rows();
    return n;
  }
};

Dataset load_dataset_csv(const std::string& path);
void save_dataset_csv(const std::string& path, const Dataset& d);

// Resample to a coarser grid: speed and torque are block-averaged over each
// new interval, temperatures taken at the interval start, and rate targets
// recomputed as finite differences of the temperatures across the interval.
// Keeping the targets consistent with the resampled grid matters more than
// preserving the raw per-sample rates.
Dataset decimate_dataset(const Dataset& d, int factor);

}  // namespace thermhe
