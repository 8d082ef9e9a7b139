#include "thermhe/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include <json.hpp>

#include "thermhe/error.hpp"

namespace thermhe {
namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

Index param_count(const LstmParams<double>& p) {
  const Index h = p.hidden_dim();
  const Index n = p.input_dim();
  return 4 * h * n + 4 * h * h + 4 * h + 2 * h + 2;
}

struct Cursor {
  VectorXd* flat;
  Index pos = 0;

  void put(const MatX<double>& m) {
    for (Index r = 0; r < m.rows(); ++r)
      for (Index c = 0; c < m.cols(); ++c) (*flat)(pos++) = m(r, c);
  }
  void put(const VecX<double>& v) {
    flat->segment(pos, v.size()) = v;
    pos += v.size();
  }
};

struct Reader {
  const VectorXd* flat;
  Index pos = 0;

  void get(MatX<double>& m) {
    for (Index r = 0; r < m.rows(); ++r)
      for (Index c = 0; c < m.cols(); ++c) m(r, c) = (*flat)(pos++);
  }
  void get(VecX<double>& v) {
    v = flat->segment(pos, v.size());
    pos += v.size();
  }
};

template <typename Params, typename Fn>
void for_each_tensor(Params& p, Fn&& fn) {
  fn(p.w_u_i); fn(p.w_u_f); fn(p.w_u_g); fn(p.w_u_o);
  fn(p.w_h_i); fn(p.w_h_f); fn(p.w_h_g); fn(p.w_h_o);
  fn(p.b_i); fn(p.b_f); fn(p.b_g); fn(p.b_o);
  fn(p.fc_w); fn(p.fc_b);
}

// Accumulates the gradient of the sum of squared errors over one slice into
// `grad`, and returns the slice SSE plus the number of scalar residuals.
void bptt_sse(const LstmParams<double>& p, const Eigen::Ref<const MatrixXd>& inputs,
              const Eigen::Ref<const MatrixXd>& targets, LstmParams<double>& grad, double& sse,
              Index& count) {
  const Index steps = inputs.rows();
  const Index hd = p.hidden_dim();

  std::vector<VectorXd> us(steps), is(steps), fs(steps), gs(steps), os(steps), cs(steps),
      ts(steps), hs(steps);
  std::vector<Eigen::Vector2d> errs(steps);

  VectorXd h = VectorXd::Zero(hd);
  VectorXd c = VectorXd::Zero(hd);
  for (Index k = 0; k < steps; ++k) {
    const VectorXd u = (inputs.row(k).transpose() - p.norm_mean).cwiseQuotient(p.norm_std);
    const VectorXd i = sigmoid_vec<double>(p.w_u_i * u + p.w_h_i * h + p.b_i);
    const VectorXd f = sigmoid_vec<double>(p.w_u_f * u + p.w_h_f * h + p.b_f);
    const VectorXd g = tanh_vec<double>(p.w_u_g * u + p.w_h_g * h + p.b_g);
    const VectorXd o = sigmoid_vec<double>(p.w_u_o * u + p.w_h_o * h + p.b_o);
    c = f.cwiseProduct(c) + i.cwiseProduct(g);
    const VectorXd t = tanh_vec<double>(c);
    h = o.cwiseProduct(t);
    const Eigen::Vector2d y = p.fc_w * h + p.fc_b;
    errs[k] = y - targets.row(k).transpose();
    sse += errs[k].squaredNorm();
    us[k] = u; is[k] = i; fs[k] = f; gs[k] = g; os[k] = o; cs[k] = c; ts[k] = t; hs[k] = h;
  }
  count += steps * 2;

  VectorXd dh = VectorXd::Zero(hd);
  VectorXd dc = VectorXd::Zero(hd);
  for (Index k = steps - 1; k >= 0; --k) {
    const Eigen::Vector2d de = 2.0 * errs[k];
    grad.fc_w += de * hs[k].transpose();
    grad.fc_b += de;
    dh += p.fc_w.transpose() * de;
    dc += dh.cwiseProduct(os[k]).cwiseProduct(
        (1.0 - ts[k].array().square()).matrix());

    const VectorXd c_prev = k > 0 ? cs[k - 1] : VectorXd::Zero(hd);
    const VectorXd h_prev = k > 0 ? hs[k - 1] : VectorXd::Zero(hd);

    const VectorXd da_o =
        dh.cwiseProduct(ts[k]).cwiseProduct(os[k]).cwiseProduct((1.0 - os[k].array()).matrix());
    const VectorXd da_f =
        dc.cwiseProduct(c_prev).cwiseProduct(fs[k]).cwiseProduct((1.0 - fs[k].array()).matrix());
    const VectorXd da_i =
        dc.cwiseProduct(gs[k]).cwiseProduct(is[k]).cwiseProduct((1.0 - is[k].array()).matrix());
    const VectorXd da_g = dc.cwiseProduct(is[k]).cwiseProduct((1.0 - gs[k].array().square()).matrix());

    grad.w_u_i += da_i * us[k].transpose();
    grad.w_u_f += da_f * us[k].transpose();
    grad.w_u_g += da_g * us[k].transpose();
    grad.w_u_o += da_o * us[k].transpose();
    grad.w_h_i += da_i * h_prev.transpose();
    grad.w_h_f += da_f * h_prev.transpose();
    grad.w_h_g += da_g * h_prev.transpose();
    grad.w_h_o += da_o * h_prev.transpose();
    grad.b_i += da_i;
    grad.b_f += da_f;
    grad.b_g += da_g;
    grad.b_o += da_o;

    dh = p.w_h_i.transpose() * da_i + p.w_h_f.transpose() * da_f + p.w_h_g.transpose() * da_g +
         p.w_h_o.transpose() * da_o;
    dc = dc.cwiseProduct(fs[k]);
  }
}

double dataset_sse(const LstmParams<double>& p, const Dataset& d, Index& count) {
  double sse = 0.0;
  for (const auto& s : d.sequences) {
    LstmState<double> st = LstmState<double>::zeros(p.hidden_dim());
    for (Index k = 0; k < s.inputs.rows(); ++k) {
      const DnnInput<double> x{s.inputs(k, 0), s.inputs(k, 1), s.inputs(k, 2), s.inputs(k, 3)};
      auto [rates, next] = dnn_forward(p, x, st);
      st = next;
      const double ew = rates.dtheta_w - s.targets(k, 0);
      const double er = rates.dtheta_r - s.targets(k, 1);
      sse += ew * ew + er * er;
      count += 2;
    }
  }
  return sse;
}

struct Chunk {
  const DataSequence* seq;
  Index begin;
  Index len;
};

std::vector<Chunk> make_chunks(const Dataset& d, int chunk_len) {
  std::vector<Chunk> chunks;
  for (const auto& s : d.sequences) {
    const Index n = s.inputs.rows();
    if (n == 0) continue;
    if (chunk_len <= 0) {
      chunks.push_back({&s, 0, n});
      continue;
    }
    for (Index b = 0; b < n; b += chunk_len) chunks.push_back({&s, b, std::min<Index>(chunk_len, n - b)});
  }
  return chunks;
}

}  // namespace

double lr_schedule(const TrainConfig& cfg, int completed_epochs) {
  if (completed_epochs < 0) throw std::invalid_argument("lr_schedule: negative epoch");
  const int drops = cfg.lr_drop_period > 0 ? completed_epochs / cfg.lr_drop_period : 0;
  return cfg.lr0 * std::pow(1.0 - cfg.lr_drop, drops);
}

Eigen::VectorXd pack_params(const LstmParams<double>& p) {
  VectorXd flat(param_count(p));
  Cursor cur{&flat};
  for_each_tensor(p, [&](const auto& t) { cur.put(t); });
  return flat;
}

void unpack_params(const Eigen::VectorXd& flat, LstmParams<double>& p) {
  if (flat.size() != param_count(p)) throw std::invalid_argument("unpack_params: size mismatch");
  Reader rd{&flat};
  for_each_tensor(p, [&](auto& t) { rd.get(t); });
}

LstmParams<double> init_params(int input_dim, int hidden_dim, uint64_t seed) {
  LstmParams<double> p = LstmParams<double>::zeros(input_dim, hidden_dim);
  std::mt19937_64 rng(seed);
  auto fill = [&rng](MatX<double>& m, double fan_in, double fan_out) {
    const double s = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> uni(-s, s);
    for (Index r = 0; r < m.rows(); ++r)
      for (Index c = 0; c < m.cols(); ++c) m(r, c) = uni(rng);
  };
  fill(p.w_u_i, input_dim, hidden_dim);
  fill(p.w_u_f, input_dim, hidden_dim);
  fill(p.w_u_g, input_dim, hidden_dim);
  fill(p.w_u_o, input_dim, hidden_dim);
  fill(p.w_h_i, hidden_dim, hidden_dim);
  fill(p.w_h_f, hidden_dim, hidden_dim);
  fill(p.w_h_g, hidden_dim, hidden_dim);
  fill(p.w_h_o, hidden_dim, hidden_dim);
  fill(p.fc_w, hidden_dim, 2);
  p.b_f.setOnes();  // bias the cell toward remembering early in training
  return p;
}

double mse_loss(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols())
    throw std::invalid_argument("mse_loss: shape mismatch");
  if (pred.size() == 0) throw std::invalid_argument("mse_loss: empty input");
  return (pred - target).squaredNorm() / static_cast<double>(pred.size());
}

std::pair<Eigen::VectorXd, double> bptt_gradients(const LstmParams<double>& p,
                                                  const Eigen::MatrixXd& inputs,
                                                  const Eigen::MatrixXd& targets) {
  if (inputs.rows() != targets.rows() || inputs.cols() != p.input_dim() || targets.cols() != 2)
    throw std::invalid_argument("bptt_gradients: shape mismatch");
  if (inputs.rows() == 0) throw std::invalid_argument("bptt_gradients: empty sequence");
  LstmParams<double> grad = LstmParams<double>::zeros(p.input_dim(), p.hidden_dim());
  grad.norm_mean = p.norm_mean;
  grad.norm_std = p.norm_std;
  double sse = 0.0;
  Index count = 0;
  bptt_sse(p, inputs, targets, grad, sse, count);
  return {pack_params(grad) / static_cast<double>(count), sse / static_cast<double>(count)};
}

Eigen::VectorXd clip_gradients(const Eigen::VectorXd& grads, double threshold) {
  if (!(threshold > 0)) throw std::invalid_argument("clip_gradients: threshold must be positive");
  const double norm = grads.norm();
  if (norm <= threshold) return grads;
  return grads * (threshold / norm);
}

void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grads, AdamState& st,
               const TrainConfig& cfg, double lr) {
  if (params.size() != grads.size() || params.size() != st.m.size() || params.size() != st.v.size())
    throw std::invalid_argument("adam_step: size mismatch");
  const VectorXd g = grads + cfg.l2 * params;
  st.t += 1;
  st.m = cfg.adam_beta1 * st.m + (1.0 - cfg.adam_beta1) * g;
  st.v = cfg.adam_beta2 * st.v + (1.0 - cfg.adam_beta2) * g.cwiseProduct(g);
  const double bc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(st.t));
  const double bc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(st.t));
  const VectorXd mhat = st.m / bc1;
  const VectorXd vhat = st.v / bc2;
  params -= lr * (mhat.array() / (vhat.array().sqrt() + cfg.adam_eps)).matrix();
  if (!params.allFinite()) throw TrainingDiverged("adam_step produced non-finite parameters");
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& d, double train_ratio, uint64_t seed) {
  const size_t n = d.sequences.size();
  if (n == 0) throw std::invalid_argument("split_dataset: empty dataset");
  if (!(train_ratio > 0.0) || !(train_ratio < 1.0))
    throw std::invalid_argument("split_dataset: ratio must be in (0, 1)");
  std::vector<size_t> idx(n);
  std::iota(idx.begin(), idx.end(), size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  size_t n_train = static_cast<size_t>(std::lround(train_ratio * static_cast<double>(n)));
  if (n > 1) n_train = std::clamp<size_t>(n_train, 1, n - 1);
  Dataset train_d, val_d;
  train_d.split_tag = "train";
  val_d.split_tag = "val";
  for (size_t i = 0; i < n; ++i)
    (i < n_train ? train_d : val_d).sequences.push_back(d.sequences[idx[i]]);
  return {train_d, val_d};
}

std::array<OutputMetrics, 2> evaluate_metrics(const LstmParams<double>& p, const Dataset& d) {
  std::array<OutputMetrics, 2> out{};
  std::array<double, 2> abs_sum{0, 0}, sq_sum{0, 0};
  std::array<double, 2> tmin, tmax;
  tmin.fill(std::numeric_limits<double>::infinity());
  tmax.fill(-std::numeric_limits<double>::infinity());
  Index n = 0;
  for (const auto& s : d.sequences) {
    LstmState<double> st = LstmState<double>::zeros(p.hidden_dim());
    for (Index k = 0; k < s.inputs.rows(); ++k) {
      const DnnInput<double> x{s.inputs(k, 0), s.inputs(k, 1), s.inputs(k, 2), s.inputs(k, 3)};
      auto [rates, next] = dnn_forward(p, x, st);
      st = next;
      const double pred[2] = {rates.dtheta_w, rates.dtheta_r};
      for (int j = 0; j < 2; ++j) {
        const double e = pred[j] - s.targets(k, j);
        abs_sum[j] += std::abs(e);
        sq_sum[j] += e * e;
        tmin[j] = std::min(tmin[j], s.targets(k, j));
        tmax[j] = std::max(tmax[j], s.targets(k, j));
      }
      ++n;
    }
  }
  if (n == 0) throw std::invalid_argument("evaluate_metrics: empty dataset");
  for (int j = 0; j < 2; ++j) {
    out[j].mae = abs_sum[j] / static_cast<double>(n);
    out[j].rmse = std::sqrt(sq_sum[j] / static_cast<double>(n));
    const double range = tmax[j] - tmin[j];
    out[j].range_defined = range > 0.0;
    out[j].nrmse = out[j].range_defined ? out[j].rmse / range
                                        : std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

std::pair<LstmParams<double>, TrainReport> train(const Dataset& d_train, const Dataset& d_val,
                                                 const TrainConfig& cfg) {
  if (d_train.sequences.empty()) throw std::invalid_argument("train: empty training set");
  if (cfg.mini_batch < 1 || cfg.max_epochs < 0 || cfg.val_frequency < 1)
    throw std::invalid_argument("train: bad config");
  const auto t0 = std::chrono::steady_clock::now();

  LstmParams<double> net = init_params(4, cfg.hidden_dim, cfg.seed);
  {
    // Feature z-score constants from the training split.
    Eigen::Vector4d sum = Eigen::Vector4d::Zero(), sq = Eigen::Vector4d::Zero();
    double n = 0;
    for (const auto& s : d_train.sequences) {
      sum += s.inputs.colwise().sum().transpose();
      sq += s.inputs.array().square().colwise().sum().matrix().transpose();
      n += static_cast<double>(s.inputs.rows());
    }
    net.norm_mean = sum / n;
    net.norm_std = ((sq / n - net.norm_mean.cwiseProduct(net.norm_mean)).cwiseMax(1e-12)).cwiseSqrt();
    net.norm_std = net.norm_std.cwiseMax(1e-6);
  }

  VectorXd flat = pack_params(net);
  AdamState adam = AdamState::zeros(flat.size());
  const std::vector<Chunk> chunks = make_chunks(d_train, cfg.chunk_len);

  TrainReport rep;
  LstmParams<double> best = net;
  long iter = 0;
  bool validated = false;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const double lr = lr_schedule(cfg, epoch - 1);
    for (size_t b0 = 0; b0 < chunks.size(); b0 += static_cast<size_t>(cfg.mini_batch)) {
      const size_t b1 = std::min(chunks.size(), b0 + static_cast<size_t>(cfg.mini_batch));
      unpack_params(flat, net);
      LstmParams<double> grad = LstmParams<double>::zeros(4, cfg.hidden_dim);
      double sse = 0.0;
      Index count = 0;
      for (size_t ci = b0; ci < b1; ++ci) {
        const Chunk& ch = chunks[ci];
        bptt_sse(net, ch.seq->inputs.middleRows(ch.begin, ch.len),
                 ch.seq->targets.middleRows(ch.begin, ch.len), grad, sse, count);
      }
      const double loss = sse / static_cast<double>(count);
      if (!std::isfinite(loss)) throw TrainingDiverged("non-finite training loss");
      const VectorXd g = clip_gradients(pack_params(grad) / static_cast<double>(count),
                                        cfg.grad_clip);
      adam_step(flat, g, adam, cfg, lr);
      ++iter;

      TrainLogEntry entry;
      entry.iteration = iter;
      entry.epoch = epoch;
      entry.train_loss = loss;
      if (iter % cfg.val_frequency == 0 && !d_val.sequences.empty()) {
        unpack_params(flat, net);
        Index vcount = 0;
        const double vloss = dataset_sse(net, d_val, vcount) / static_cast<double>(vcount);
        entry.val_loss = vloss;
        validated = true;
        if (vloss < rep.best_val_loss) {
          rep.best_val_loss = vloss;
          rep.best_iteration = iter;
          best = net;
        }
      }
      rep.log.push_back(entry);
    }
    rep.epochs = epoch;
  }

  if (!validated) {
    unpack_params(flat, net);
    best = net;
  }
  rep.iterations = iter;
  rep.duration_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {best, rep};
}

void save_train_report(const std::string& path, const TrainConfig& cfg, const TrainReport& rep,
                       const std::array<OutputMetrics, 2>* test_metrics) {
  nlohmann::json j;
  j["config"] = {{"max_epochs", cfg.max_epochs}, {"mini_batch", cfg.mini_batch},
                 {"lr0", cfg.lr0},               {"lr_drop", cfg.lr_drop},
                 {"lr_drop_period", cfg.lr_drop_period}, {"l2", cfg.l2},
                 {"grad_clip", cfg.grad_clip},   {"val_frequency", cfg.val_frequency},
                 {"hidden_dim", cfg.hidden_dim}, {"chunk_len", cfg.chunk_len},
                 {"seed", cfg.seed}};
  j["iterations"] = rep.iterations;
  j["epochs"] = rep.epochs;
  j["duration_s"] = rep.duration_s;
  j["best_iteration"] = rep.best_iteration;
  if (std::isfinite(rep.best_val_loss)) j["best_val_loss"] = rep.best_val_loss;
  else j["best_val_loss"] = nullptr;
  nlohmann::json log = nlohmann::json::array();
  for (const auto& e : rep.log) {
    nlohmann::json row = {{"iteration", e.iteration}, {"epoch", e.epoch},
                          {"train_loss", e.train_loss}};
    if (std::isfinite(e.val_loss)) row["val_loss"] = e.val_loss;
    log.push_back(std::move(row));
  }
  j["log"] = std::move(log);
  if (test_metrics) {
    auto m = [](const OutputMetrics& om) {
      nlohmann::json mj = {{"mae", om.mae}, {"rmse", om.rmse}};
      if (om.range_defined) mj["nrmse"] = om.nrmse;
      else mj["nrmse"] = nullptr;
      return mj;
    };
    j["test_metrics"] = {{"dtheta_w", m((*test_metrics)[0])}, {"dtheta_r", m((*test_metrics)[1])}};
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << j.dump(1) << '\n';
}

}  // namespace thermhe
