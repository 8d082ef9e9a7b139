#include "thermhe/dataset.hpp"

#include <stdexcept>

#include "thermhe/csv.hpp"
#include "thermhe/error.hpp"

namespace thermhe {

Dataset load_dataset_csv(const std::string& path) {
  const CsvTable t = read_csv(path);
  const int cs = t.column_index("seq_id");
  const int ct = t.column_index("t_s");
  const int cn = t.column_index("n_em_rpm");
  const int cq = t.column_index("t_em_nm");
  const int cw = t.column_index("theta_w_c");
  const int cr = t.column_index("theta_r_c");
  const int cdw = t.column_index("dtheta_w_cps");
  const int cdr = t.column_index("dtheta_r_cps");

  Dataset d;
  std::vector<std::vector<double>> block;
  double cur_id = 0.0;
  bool open = false;

  auto flush = [&]() {
    if (block.empty()) return;
    DataSequence s;
    const Eigen::Index n = static_cast<Eigen::Index>(block.size());
    s.t.resize(n);
    s.inputs.resize(n, 4);
    s.targets.resize(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& row = block[static_cast<size_t>(i)];
      s.t(i) = row[ct];
      s.inputs(i, 0) = row[cn];
      s.inputs(i, 1) = row[cq];
      s.inputs(i, 2) = row[cw];
      s.inputs(i, 3) = row[cr];
      s.targets(i, 0) = row[cdw];
      s.targets(i, 1) = row[cdr];
    }
    d.sequences.push_back(std::move(s));
    block.clear();
  };

  for (const auto& row : t.rows) {
    if (open && row[cs] != cur_id) flush();
    cur_id = row[cs];
    open = true;
    block.push_back(row);
  }
  flush();
  if (d.sequences.empty()) throw SchemaError("dataset has no rows: " + path);
  return d;
}

void save_dataset_csv(const std::string& path, const Dataset& d) {
  CsvWriter w(path);
  w.header({"seq_id", "t_s", "n_em_rpm", "t_em_nm", "theta_w_c", "theta_r_c", "dtheta_w_cps",
            "dtheta_r_cps"});
  for (size_t si = 0; si < d.sequences.size(); ++si) {
    const auto& s = d.sequences[si];
    for (Eigen::Index i = 0; i < s.inputs.rows(); ++i)
      w.row({static_cast<double>(si), s.t(i), s.inputs(i, 0), s.inputs(i, 1), s.inputs(i, 2),
             s.inputs(i, 3), s.targets(i, 0), s.targets(i, 1)});
  }
}

Dataset decimate_dataset(const Dataset& d, int factor) {
  if (factor < 1) throw std::invalid_argument("decimate_dataset: factor must be >= 1");
  if (factor == 1) return d;
  Dataset out;
  out.split_tag = d.split_tag;
  for (const auto& s : d.sequences) {
    const Eigen::Index n = s.inputs.rows();
    const Eigen::Index m = (n - 1) / factor;
    if (m < 1) continue;
    DataSequence r;
    r.t.resize(m);
    r.inputs.resize(m, 4);
    r.targets.resize(m, 2);
    for (Eigen::Index j = 0; j < m; ++j) {
      const Eigen::Index a = j * factor;
      const Eigen::Index b = a + factor;  // exclusive end, b <= n-1 guaranteed
      r.t(j) = s.t(a);
      r.inputs(j, 0) = s.inputs.col(0).segment(a, factor).mean();
      r.inputs(j, 1) = s.inputs.col(1).segment(a, factor).mean();
      r.inputs(j, 2) = s.inputs(a, 2);
      r.inputs(j, 3) = s.inputs(a, 3);
      const double dt = s.t(b) - s.t(a);
      r.targets(j, 0) = (s.inputs(b, 2) - s.inputs(a, 2)) / dt;
      r.targets(j, 1) = (s.inputs(b, 3) - s.inputs(a, 3)) / dt;
    }
    out.sequences.push_back(std::move(r));
  }
  if (out.sequences.empty()) throw SchemaError("decimate_dataset: sequences too short for factor");
  return out;
}

}  // namespace thermhe
