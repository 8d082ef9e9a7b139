#include "thermhe/weights_io.hpp"

#include <fstream>
#include <vector>

#include <json.hpp>

#include "thermhe/error.hpp"

namespace thermhe {
namespace {

using nlohmann::json;

const std::vector<std::string> kFeatureOrder = {"n_em_rpm", "t_em_nm", "theta_w_c", "theta_r_c"};

MatX<double> matrix_from_json(const json& j, const char* name, Eigen::Index rows, Eigen::Index cols) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows)
    throw SchemaError(std::string(name) + ": expected " + std::to_string(rows) + " rows");
  MatX<double> m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const json& row = j[static_cast<size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      throw SchemaError(std::string(name) + ": expected " + std::to_string(cols) + " columns");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row[static_cast<size_t>(c)].get<double>();
  }
  return m;
}

VecX<double> vector_from_json(const json& j, const char* name, Eigen::Index n) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != n)
    throw SchemaError(std::string(name) + ": expected length " + std::to_string(n));
  VecX<double> v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = j[static_cast<size_t>(i)].get<double>();
  return v;
}

json matrix_to_json(const MatX<double>& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_to_json(const VecX<double>& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

}  // namespace

LstmParams<double> load_weights(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open weights file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw SchemaError("weights file is not valid json: " + std::string(e.what()));
  }

  for (const char* key : {"input_dim", "hidden_dim", "feature_order", "norm_mean", "norm_std",
                          "w_u_i", "w_u_f", "w_u_g", "w_u_o", "w_h_i", "w_h_f", "w_h_g", "w_h_o",
                          "b_i", "b_f", "b_g", "b_o", "fc_w", "fc_b"})
    if (!j.contains(key)) throw SchemaError(std::string("weights file missing key: ") + key);

  const Eigen::Index in_dim = j["input_dim"].get<Eigen::Index>();
  const Eigen::Index hd = j["hidden_dim"].get<Eigen::Index>();
  if (in_dim <= 0 || hd <= 0) throw SchemaError("weights file: non-positive dimensions");

  const auto order = j["feature_order"].get<std::vector<std::string>>();
  if (order != kFeatureOrder) throw SchemaError("weights file: unexpected feature_order");
  if (in_dim != static_cast<Eigen::Index>(kFeatureOrder.size()))
    throw SchemaError("weights file: input_dim does not match feature_order");

  LstmParams<double> p;
  p.w_u_i = matrix_from_json(j["w_u_i"], "w_u_i", hd, in_dim);
  p.w_u_f = matrix_from_json(j["w_u_f"], "w_u_f", hd, in_dim);
  p.w_u_g = matrix_from_json(j["w_u_g"], "w_u_g", hd, in_dim);
  p.w_u_o = matrix_from_json(j["w_u_o"], "w_u_o", hd, in_dim);
  p.w_h_i = matrix_from_json(j["w_h_i"], "w_h_i", hd, hd);
  p.w_h_f = matrix_from_json(j["w_h_f"], "w_h_f", hd, hd);
  p.w_h_g = matrix_from_json(j["w_h_g"], "w_h_g", hd, hd);
  p.w_h_o = matrix_from_json(j["w_h_o"], "w_h_o", hd, hd);
  p.b_i = vector_from_json(j["b_i"], "b_i", hd);
  p.b_f = vector_from_json(j["b_f"], "b_f", hd);
  p.b_g = vector_from_json(j["b_g"], "b_g", hd);
  p.b_o = vector_from_json(j["b_o"], "b_o", hd);
  p.fc_w = matrix_from_json(j["fc_w"], "fc_w", 2, hd);
  p.fc_b = vector_from_json(j["fc_b"], "fc_b", 2);
  p.norm_mean = vector_from_json(j["norm_mean"], "norm_mean", in_dim);
  p.norm_std = vector_from_json(j["norm_std"], "norm_std", in_dim);

  if (!p.shapes_consistent()) throw SchemaError("weights file: inconsistent shapes");
  if (!p.all_finite()) throw SchemaError("weights file: non-finite values");
  if ((p.norm_std.array() <= 0.0).any()) throw SchemaError("weights file: norm_std must be positive");
  return p;
}

void save_weights(const std::string& path, const LstmParams<double>& params) {
  if (!params.shapes_consistent()) throw SchemaError("save_weights: inconsistent shapes");
  if (!params.all_finite()) throw SchemaError("save_weights: non-finite values");
  json j;
  j["input_dim"] = params.input_dim();
  j["hidden_dim"] = params.hidden_dim();
  j["feature_order"] = kFeatureOrder;
  j["norm_mean"] = vector_to_json(params.norm_mean);
  j["norm_std"] = vector_to_json(params.norm_std);
  j["w_u_i"] = matrix_to_json(params.w_u_i);
  j["w_u_f"] = matrix_to_json(params.w_u_f);
  j["w_u_g"] = matrix_to_json(params.w_u_g);
  j["w_u_o"] = matrix_to_json(params.w_u_o);
  j["w_h_i"] = matrix_to_json(params.w_h_i);
  j["w_h_f"] = matrix_to_json(params.w_h_f);
  j["w_h_g"] = matrix_to_json(params.w_h_g);
  j["w_h_o"] = matrix_to_json(params.w_h_o);
  j["b_i"] = vector_to_json(params.b_i);
  j["b_f"] = vector_to_json(params.b_f);
  j["b_g"] = vector_to_json(params.b_g);
  j["b_o"] = vector_to_json(params.b_o);
  j["fc_w"] = matrix_to_json(params.fc_w);
  j["fc_b"] = vector_to_json(params.fc_b);
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << j.dump(1) << '\n';
}

}  // namespace thermhe
