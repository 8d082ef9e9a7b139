#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <utility>

namespace thermhe {

template <typename Scalar>
using MatX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VecX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// Numerically stable logistic function. Evaluates the exp on the negative
// side only, so large |z| saturates cleanly instead of overflowing.
template <typename Scalar>
inline Scalar sigmoid(Scalar z) {
  if (z >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-z));
  const Scalar e = std::exp(z);
  return e / (Scalar(1) + e);
}

template <typename Scalar>
inline Scalar tanh_act(Scalar z) {
  return std::tanh(z);
}

template <typename Scalar>
inline VecX<Scalar> sigmoid_vec(const VecX<Scalar>& z) {
  return z.unaryExpr([](Scalar v) { return sigmoid(v); });
}

template <typename Scalar>
inline VecX<Scalar> tanh_vec(const VecX<Scalar>& z) {
  return z.unaryExpr([](Scalar v) { return tanh_act(v); });
}

// Recurrent thermal network: one LSTM cell followed by a linear read-out
// that maps the hidden vector to two temperature rates. Input features are
// z-scored with the stored normalization constants before entering the cell.
template <typename Scalar>
struct LstmParams {
  MatX<Scalar> w_u_i, w_u_f, w_u_g, w_u_o;  // hidden x input
  MatX<Scalar> w_h_i, w_h_f, w_h_g, w_h_o;  // hidden x hidden
  VecX<Scalar> b_i, b_f, b_g, b_o;          // hidden
  MatX<Scalar> fc_w;                        // 2 x hidden
  VecX<Scalar> fc_b;                        // 2
  VecX<Scalar> norm_mean, norm_std;         // input feature z-score constants

  Eigen::Index input_dim() const { return w_u_i.cols(); }
  Eigen::Index hidden_dim() const { return w_u_i.rows(); }
  Eigen::Index output_dim() const { return fc_w.rows(); }

  static LstmParams zeros(Eigen::Index input_dim, Eigen::Index hidden_dim) {
    LstmParams p;
    p.w_u_i = p.w_u_f = p.w_u_g = p.w_u_o = MatX<Scalar>::Zero(hidden_dim, input_dim);
    p.w_h_i = p.w_h_f = p.w_h_g = p.w_h_o = MatX<Scalar>::Zero(hidden_dim, hidden_dim);
    p.b_i = p.b_f = p.b_g = p.b_o = VecX<Scalar>::Zero(hidden_dim);
    p.fc_w = MatX<Scalar>::Zero(2, hidden_dim);
    p.fc_b = VecX<Scalar>::Zero(2);
    p.norm_mean = VecX<Scalar>::Zero(input_dim);
    p.norm_std = VecX<Scalar>::Ones(input_dim);
    return p;
  }

  bool shapes_consistent() const {
    const Eigen::Index h = hidden_dim();
    const Eigen::Index n = input_dim();
    auto ok_u = [&](const MatX<Scalar>& m) { return m.rows() == h && m.cols() == n; };
    auto ok_h = [&](const MatX<Scalar>& m) { return m.rows() == h && m.cols() == h; };
    auto ok_b = [&](const VecX<Scalar>& v) { return v.size() == h; };
    return h > 0 && n > 0 && ok_u(w_u_i) && ok_u(w_u_f) && ok_u(w_u_g) && ok_u(w_u_o) &&
           ok_h(w_h_i) && ok_h(w_h_f) && ok_h(w_h_g) && ok_h(w_h_o) &&
           ok_b(b_i) && ok_b(b_f) && ok_b(b_g) && ok_b(b_o) &&
           fc_w.rows() == 2 && fc_w.cols() == h && fc_b.size() == 2 &&
           norm_mean.size() == n && norm_std.size() == n;
  }

  bool all_finite() const {
    auto fm = [](const MatX<Scalar>& m) { return m.allFinite(); };
    auto fv = [](const VecX<Scalar>& v) { return v.allFinite(); };
    return fm(w_u_i) && fm(w_u_f) && fm(w_u_g) && fm(w_u_o) && fm(w_h_i) && fm(w_h_f) &&
           fm(w_h_g) && fm(w_h_o) && fv(b_i) && fv(b_f) && fv(b_g) && fv(b_o) && fm(fc_w) &&
           fv(fc_b) && fv(norm_mean) && fv(norm_std);
  }
};

template <typename Scalar>
struct LstmState {
  VecX<Scalar> h, c;

  static LstmState zeros(Eigen::Index hidden_dim) {
    return {VecX<Scalar>::Zero(hidden_dim), VecX<Scalar>::Zero(hidden_dim)};
  }
};

// Physical inputs of one step, in engineering units.
template <typename Scalar>
struct DnnInput {
  Scalar n_em;     // machine speed, rpm
  Scalar t_em;     // machine torque, Nm
  Scalar theta_w;  // winding temperature, degC
  Scalar theta_r;  // rotor temperature, degC

  VecX<Scalar> as_vector() const {
    VecX<Scalar> u(4);
    u << n_em, t_em, theta_w, theta_r;
    return u;
  }
};

template <typename Scalar>
struct ThermalRates {
  Scalar dtheta_w;  // degC/s
  Scalar dtheta_r;  // degC/s
};

template <typename Scalar>
inline VecX<Scalar> normalize_input(const LstmParams<Scalar>& p, const DnnInput<Scalar>& x) {
  VecX<Scalar> u = x.as_vector();
  if (u.size() != p.input_dim()) throw std::invalid_argument("input feature count mismatch");
  return (u - p.norm_mean).cwiseQuotient(p.norm_std);
}

// One cell update. `u` is the already normalized feature vector.
template <typename Scalar>
LstmState<Scalar> lstm_cell_step(const LstmParams<Scalar>& p, const VecX<Scalar>& u,
                                 const LstmState<Scalar>& s) {
  if (u.size() != p.input_dim()) throw std::invalid_argument("lstm_cell_step: bad input size");
  if (s.h.size() != p.hidden_dim() || s.c.size() != p.hidden_dim())
    throw std::invalid_argument("lstm_cell_step: bad state size");
  const VecX<Scalar> i = sigmoid_vec<Scalar>(p.w_u_i * u + p.w_h_i * s.h + p.b_i);
  const VecX<Scalar> f = sigmoid_vec<Scalar>(p.w_u_f * u + p.w_h_f * s.h + p.b_f);
  const VecX<Scalar> g = tanh_vec<Scalar>(p.w_u_g * u + p.w_h_g * s.h + p.b_g);
  const VecX<Scalar> o = sigmoid_vec<Scalar>(p.w_u_o * u + p.w_h_o * s.h + p.b_o);
  LstmState<Scalar> out;
  out.c = f.cwiseProduct(s.c) + i.cwiseProduct(g);
  out.h = o.cwiseProduct(tanh_vec<Scalar>(out.c));
  return out;
}

template <typename Scalar>
ThermalRates<Scalar> fc_forward(const LstmParams<Scalar>& p, const VecX<Scalar>& h) {
  if (h.size() != p.hidden_dim()) throw std::invalid_argument("fc_forward: bad hidden size");
  const VecX<Scalar> y = p.fc_w * h + p.fc_b;
  return {y(0), y(1)};
}

// Full network step on physical inputs: normalize, advance the cell, read out rates.
template <typename Scalar>
std::pair<ThermalRates<Scalar>, LstmState<Scalar>> dnn_forward(const LstmParams<Scalar>& p,
                                                               const DnnInput<Scalar>& x,
                                                               const LstmState<Scalar>& s) {
  const LstmState<Scalar> next = lstm_cell_step(p, normalize_input(p, x), s);
  return {fc_forward(p, next.h), next};
}

// Explicit Euler update of the two temperatures.
template <typename Scalar>
std::pair<Scalar, Scalar> thermal_euler_step(Scalar theta_w, Scalar theta_r,
                                             const ThermalRates<Scalar>& rates, Scalar dk) {
  if (!(dk > Scalar(0))) throw std::invalid_argument("thermal_euler_step: dk must be positive");
  return {theta_w + dk * rates.dtheta_w, theta_r + dk * rates.dtheta_r};
}

// Partial derivatives of one network step with respect to the differentiable
// inputs that matter downstream: the two temperature features and the carried
// (h, c) state. Gate pre-activations are recomputed locally; the layout of
// each block is rows = outputs, cols = inputs.
template <typename Scalar>
struct DnnJacobian {
  MatX<Scalar> rates_theta;  // 2 x 2
  MatX<Scalar> rates_h;      // 2 x H
  MatX<Scalar> rates_c;      // 2 x H
  MatX<Scalar> hnew_theta;   // H x 2
  MatX<Scalar> hnew_h;       // H x H
  MatX<Scalar> hnew_c;       // H x H
  MatX<Scalar> cnew_theta;   // H x 2
  MatX<Scalar> cnew_h;       // H x H
  MatX<Scalar> cnew_c;       // H x H
};

template <typename Scalar>
DnnJacobian<Scalar> dnn_jacobian(const LstmParams<Scalar>& p, const DnnInput<Scalar>& x,
                                 const LstmState<Scalar>& s) {
  const Eigen::Index hd = p.hidden_dim();
  const VecX<Scalar> u = normalize_input(p, x);

  const VecX<Scalar> i = sigmoid_vec<Scalar>(p.w_u_i * u + p.w_h_i * s.h + p.b_i);
  const VecX<Scalar> f = sigmoid_vec<Scalar>(p.w_u_f * u + p.w_h_f * s.h + p.b_f);
  const VecX<Scalar> g = tanh_vec<Scalar>(p.w_u_g * u + p.w_h_g * s.h + p.b_g);
  const VecX<Scalar> o = sigmoid_vec<Scalar>(p.w_u_o * u + p.w_h_o * s.h + p.b_o);
  const VecX<Scalar> c_new = f.cwiseProduct(s.c) + i.cwiseProduct(g);
  const VecX<Scalar> t = tanh_vec<Scalar>(c_new);

  const VecX<Scalar> di = i.array() * (Scalar(1) - i.array());
  const VecX<Scalar> df = f.array() * (Scalar(1) - f.array());
  const VecX<Scalar> dg = Scalar(1) - g.array().square();
  const VecX<Scalar> do_ = o.array() * (Scalar(1) - o.array());
  const VecX<Scalar> dt = Scalar(1) - t.array().square();

  // Temperature features sit at slots 2 and 3; the z-score scales each column.
  auto theta_cols = [&](const MatX<Scalar>& w_u) -> MatX<Scalar> {
    MatX<Scalar> m(hd, 2);
    m.col(0) = w_u.col(2) / p.norm_std(2);
    m.col(1) = w_u.col(3) / p.norm_std(3);
    return m;
  };

  DnnJacobian<Scalar> j;
  auto chain = [&](const MatX<Scalar>& da_i, const MatX<Scalar>& da_f, const MatX<Scalar>& da_g,
                   const MatX<Scalar>& da_o, const MatX<Scalar>& dc_prev, MatX<Scalar>& dc_out,
                   MatX<Scalar>& dh_out) {
    dc_out = s.c.cwiseProduct(df).asDiagonal() * da_f + g.cwiseProduct(di).asDiagonal() * da_i +
             i.cwiseProduct(dg).asDiagonal() * da_g + f.asDiagonal() * dc_prev;
    dh_out = t.cwiseProduct(do_).asDiagonal() * da_o + o.cwiseProduct(dt).asDiagonal() * dc_out;
  };

  const MatX<Scalar> z_h2 = MatX<Scalar>::Zero(hd, 2);
  const MatX<Scalar> z_hh = MatX<Scalar>::Zero(hd, hd);
  const MatX<Scalar> id_hh = MatX<Scalar>::Identity(hd, hd);

  chain(theta_cols(p.w_u_i), theta_cols(p.w_u_f), theta_cols(p.w_u_g), theta_cols(p.w_u_o), z_h2,
        j.cnew_theta, j.hnew_theta);
  chain(p.w_h_i, p.w_h_f, p.w_h_g, p.w_h_o, z_hh, j.cnew_h, j.hnew_h);
  chain(z_hh, z_hh, z_hh, z_hh, id_hh, j.cnew_c, j.hnew_c);

  j.rates_theta = p.fc_w * j.hnew_theta;
  j.rates_h = p.fc_w * j.hnew_h;
  j.rates_c = p.fc_w * j.hnew_c;
  return j;
}

}  // namespace thermhe
