#include "impact/lstm.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "impact/kinematics.hpp"

namespace impact {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

MatrixXd sigmoid(const MatrixXd& x) {
  return ((-x.array()).exp() + 1.0).inverse().matrix();
}

// Activated gate states and cell history of one layer over a batch.
struct LayerCache {
  std::vector<MatrixXd> x;       // B x in, input at each step
  std::vector<MatrixXd> gates;   // B x 4D, [input | forget | candidate | output]
  std::vector<MatrixXd> c;       // B x D
  std::vector<MatrixXd> tanh_c;  // B x D
  std::vector<MatrixXd> h;       // B x D
};

void layer_forward(const LstmLayer& p, int hidden, LayerCache& cache) {
  const int steps = static_cast<int>(cache.x.size());
  const Eigen::Index batch = cache.x[0].rows();
  const int d = hidden;

  cache.gates.resize(steps);
  cache.c.resize(steps);
  cache.tanh_c.resize(steps);
  cache.h.resize(steps);

  MatrixXd h_prev = MatrixXd::Zero(batch, d);
  MatrixXd c_prev = MatrixXd::Zero(batch, d);
  MatrixXd pre(batch, 4 * d);
  for (int t = 0; t < steps; ++t) {
    pre.noalias() = cache.x[t] * p.wx.transpose();
    pre.noalias() += h_prev * p.wh.transpose();
    pre.rowwise() += p.b.transpose();

    MatrixXd& g = cache.gates[t];
    g.resize(batch, 4 * d);
    g.leftCols(2 * d) = sigmoid(pre.leftCols(2 * d));
    g.middleCols(2 * d, d) = pre.middleCols(2 * d, d).array().tanh().matrix();
    g.rightCols(d) = sigmoid(pre.rightCols(d));

    cache.c[t] = g.middleCols(d, d).cwiseProduct(c_prev) +
                 g.leftCols(d).cwiseProduct(g.middleCols(2 * d, d));
    cache.tanh_c[t] = cache.c[t].array().tanh().matrix();
    cache.h[t] = g.rightCols(d).cwiseProduct(cache.tanh_c[t]);

    h_prev = cache.h[t];
    c_prev = cache.c[t];
  }
}

// dh_ext[t] may be empty (treated as zero). dx, when requested, receives the
// gradient with respect to the layer inputs.
void layer_backward(const LstmLayer& p, int hidden, const LayerCache& cache,
                    const std::vector<MatrixXd>& dh_ext, LstmLayer& grad,
                    std::vector<MatrixXd>* dx) {
  const int steps = static_cast<int>(cache.x.size());
  const Eigen::Index batch = cache.x[0].rows();
  const int d = hidden;

  grad.wx.setZero(p.wx.rows(), p.wx.cols());
  grad.wh.setZero(p.wh.rows(), p.wh.cols());
  grad.b.setZero(p.b.size());
  if (dx != nullptr) dx->resize(steps);

  MatrixXd dh_next = MatrixXd::Zero(batch, d);
  MatrixXd dc_next = MatrixXd::Zero(batch, d);
  MatrixXd da(batch, 4 * d);
  for (int t = steps - 1; t >= 0; --t) {
    MatrixXd dh = dh_next;
    if (dh_ext[t].size() != 0) dh += dh_ext[t];

    const MatrixXd& g = cache.gates[t];
    const auto gi = g.leftCols(d);
    const auto gf = g.middleCols(d, d);
    const auto gg = g.middleCols(2 * d, d);
    const auto go = g.rightCols(d);

    const MatrixXd dout = dh.cwiseProduct(cache.tanh_c[t]);
    const MatrixXd dc =
        dc_next +
        (dh.array() * go.array() * (1.0 - cache.tanh_c[t].array().square())).matrix();

    da.leftCols(d) = (dc.cwiseProduct(gg).array() * gi.array() * (1.0 - gi.array()))
                         .matrix();  // input gate
    if (t > 0) {
      da.middleCols(d, d) =
          (dc.cwiseProduct(cache.c[t - 1]).array() * gf.array() * (1.0 - gf.array()))
              .matrix();
    } else {
      da.middleCols(d, d).setZero();  // c[-1] = 0
    }
    da.middleCols(2 * d, d) =
        (dc.cwiseProduct(gi).array() * (1.0 - gg.array().square())).matrix();
    da.rightCols(d) = (dout.array() * go.array() * (1.0 - go.array())).matrix();

    grad.wx.noalias() += da.transpose() * cache.x[t];
    if (t > 0) grad.wh.noalias() += da.transpose() * cache.h[t - 1];
    grad.b += da.colwise().sum().transpose();

    if (dx != nullptr) (*dx)[t].noalias() = da * p.wx;
    dh_next.noalias() = da * p.wh;
    dc_next = dc.cwiseProduct(gf);
  }
}

// Inverted-dropout mask: entries are 0 or 1/(1-p).
MatrixXd dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, Rng& rng) {
  MatrixXd mask(rows, cols);
  const double scale = 1.0 / (1.0 - p);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) {
      mask(i, j) = rng.uniform() < p ? 0.0 : scale;
    }
  }
  return mask;
}

struct BatchResult {
  LayerCache c1, c2;
  std::vector<MatrixXd> drop1;  // empty when dropout is off
  std::vector<MatrixXd> drop2;
  MatrixXd pred;  // B x T_out, normalized space
};

// Full forward pass over an assembled batch x[t] (B x input_dim, normalized).
void model_forward(const LstmModel& model, std::vector<MatrixXd> x, bool training,
                   Rng* rng, BatchResult& out) {
  const int steps = static_cast<int>(x.size());
  const Eigen::Index batch = x[0].rows();
  const int d = model.hidden;
  const bool drop = training && model.hyper.dropout_rate > 0.0;
  require(!drop || rng != nullptr, ErrorCode::InvalidArgument,
          "training forward with dropout needs an rng");

  out.c1.x = std::move(x);
  layer_forward(model.l1, d, out.c1);

  out.drop1.clear();
  out.drop2.clear();
  out.c2.x.resize(steps);
  if (drop) out.drop1.resize(steps);
  for (int t = 0; t < steps; ++t) {
    if (drop) {
      out.drop1[t] = dropout_mask(batch, d, model.hyper.dropout_rate, *rng);
      out.c2.x[t] = out.c1.h[t].cwiseProduct(out.drop1[t]);
    } else {
      out.c2.x[t] = out.c1.h[t];
    }
  }
  layer_forward(model.l2, d, out.c2);

  if (model.mode == OutputMode::Scalar) {
    MatrixXd h_last = out.c2.h[steps - 1];
    if (drop) {
      out.drop2.resize(1);
      out.drop2[0] = dropout_mask(batch, d, model.hyper.dropout_rate, *rng);
      h_last = h_last.cwiseProduct(out.drop2[0]);
    }
    out.pred.resize(batch, 1);
    out.pred.col(0) = h_last * model.dense_w;
    out.pred.col(0).array() += model.dense_b;
  } else {
    out.pred.resize(batch, steps);
    if (drop) out.drop2.resize(steps);
    for (int t = 0; t < steps; ++t) {
      MatrixXd h = out.c2.h[t];
      if (drop) {
        out.drop2[t] = dropout_mask(batch, d, model.hyper.dropout_rate, *rng);
        h = h.cwiseProduct(out.drop2[t]);
      }
      out.pred.col(t) = h * model.dense_w;
      out.pred.col(t).array() += model.dense_b;
    }
  }
}

double reduce_loss(const MatrixXd& pred, const MatrixXd& targets, LossKind kind,
                   MatrixXd* dpred) {
  require(pred.rows() == targets.rows() && pred.cols() == targets.cols(),
          ErrorCode::InvalidArgument, "prediction/target shape mismatch");
  const double count = static_cast<double>(pred.size());
  const MatrixXd r = pred - targets;
  if (kind == LossKind::MeanAbsolute) {
    if (dpred != nullptr) *dpred = r.array().sign().matrix() / count;
    return r.array().abs().sum() / count;
  }
  if (dpred != nullptr) *dpred = 2.0 * r / count;
  return r.array().square().sum() / count;
}

double kernel_penalty(const LstmModel& model, double l2_kernel) {
  if (l2_kernel == 0.0) return 0.0;
  return l2_kernel * (model.l1.wx.squaredNorm() + model.l2.wx.squaredNorm());
}

// Backward through the dense head and both layers; grads must be
// zero-initialized by the caller only for dense (layers are overwritten).
void model_backward(const LstmModel& model, const BatchResult& fwd,
                    const MatrixXd& dpred, double l2_kernel, Gradients& grads) {
  const int steps = static_cast<int>(fwd.c1.x.size());
  const Eigen::Index batch = fwd.c1.x[0].rows();
  const int d = model.hidden;
  const bool drop = !fwd.drop1.empty();

  grads.dense_w.setZero(d);
  grads.dense_b = 0.0;
  std::vector<MatrixXd> dh2(steps);

  if (model.mode == OutputMode::Scalar) {
    const VectorXd dy = dpred.col(0);
    MatrixXd h_last = fwd.c2.h[steps - 1];
    if (drop) h_last = h_last.cwiseProduct(fwd.drop2[0]);
    grads.dense_w.noalias() = h_last.transpose() * dy;
    grads.dense_b = dy.sum();
    MatrixXd dh = dy * model.dense_w.transpose();
    if (drop) dh = dh.cwiseProduct(fwd.drop2[0]);
    dh2[steps - 1] = dh;
  } else {
    for (int t = 0; t < steps; ++t) {
      const VectorXd dy = dpred.col(t);
      MatrixXd h = fwd.c2.h[t];
      if (drop) h = h.cwiseProduct(fwd.drop2[t]);
      grads.dense_w.noalias() += h.transpose() * dy;
      grads.dense_b += dy.sum();
      MatrixXd dh = dy * model.dense_w.transpose();
      if (drop) dh = dh.cwiseProduct(fwd.drop2[t]);
      dh2[t] = std::move(dh);
    }
  }

  std::vector<MatrixXd> dx2;
  layer_backward(model.l2, d, fwd.c2, dh2, grads.l2, &dx2);

  std::vector<MatrixXd> dh1(steps);
  for (int t = 0; t < steps; ++t) {
    dh1[t] = drop ? dx2[t].cwiseProduct(fwd.drop1[t]) : std::move(dx2[t]);
  }
  layer_backward(model.l1, d, fwd.c1, dh1, grads.l1, nullptr);

  if (l2_kernel != 0.0) {
    grads.l1.wx += 2.0 * l2_kernel * model.l1.wx;
    grads.l2.wx += 2.0 * l2_kernel * model.l2.wx;
  }
  (void)batch;
}

std::vector<MatrixXd> assemble_steps(
    const std::vector<const MatrixXd*>& normalized_features,
    const std::vector<Eigen::Index>& rows) {
  const int steps = kSamples;
  const Eigen::Index batch = static_cast<Eigen::Index>(rows.size());
  std::vector<MatrixXd> x(steps);
  const Eigen::Index in = normalized_features[rows.empty() ? 0 : rows[0]]->cols();
  for (int t = 0; t < steps; ++t) x[t].resize(batch, in);
  for (Eigen::Index b = 0; b < batch; ++b) {
    const MatrixXd& f = *normalized_features[rows[b]];
    for (int t = 0; t < steps; ++t) x[t].row(b) = f.row(t);
  }
  return x;
}

std::vector<Eigen::Index> iota_rows(Eigen::Index n) {
  std::vector<Eigen::Index> rows(n);
  for (Eigen::Index i = 0; i < n; ++i) rows[i] = i;
  return rows;
}

}  // namespace

// ---------------------------------------------------------------------------
// Public surface
// ---------------------------------------------------------------------------

LstmModel init_model(OutputMode mode, const std::string& target_name,
                     const Hyperparameters& hyper, Rng& rng, int input_dim) {
  hyper.validate();
  const int d = hyper.hidden_units;
  LstmModel m;
  m.mode = mode;
  m.input_dim = input_dim;
  m.hidden = d;
  m.target_name = target_name;
  m.hyper = hyper;

  const auto glorot = [&rng](MatrixXd& w, int fan_in, int fan_out) {
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      w.data()[i] = rng.uniform(-limit, limit);
    }
  };

  m.l1.wx.resize(4 * d, input_dim);
  m.l1.wh.resize(4 * d, d);
  m.l2.wx.resize(4 * d, d);
  m.l2.wh.resize(4 * d, d);
  glorot(m.l1.wx, input_dim, 4 * d);
  glorot(m.l1.wh, d, 4 * d);
  glorot(m.l2.wx, d, 4 * d);
  glorot(m.l2.wh, d, 4 * d);
  // Zero biases, forget gate at 1.
  m.l1.b = VectorXd::Zero(4 * d);
  m.l2.b = VectorXd::Zero(4 * d);
  m.l1.b.segment(d, d).setOnes();
  m.l2.b.segment(d, d).setOnes();
  m.dense_w.resize(d);
  {
    MatrixXd tmp(d, 1);
    glorot(tmp, d, 1);
    m.dense_w = tmp.col(0);
  }
  m.dense_b = 0.0;

  m.feature_stats.mean = VectorXd::Zero(input_dim);
  m.feature_stats.std = VectorXd::Ones(input_dim);
  return m;
}

Eigen::VectorXd forward(const LstmModel& model, const FeatureTensor& normalized,
                        bool training, Rng* rng) {
  require(normalized.data.rows() == kSamples && normalized.data.cols() == model.input_dim,
          ErrorCode::InvalidArgument, "feature tensor shape mismatch");
  std::vector<MatrixXd> x(kSamples);
  for (int t = 0; t < kSamples; ++t) x[t] = normalized.data.row(t);
  BatchResult fwd;
  model_forward(model, std::move(x), training, rng, fwd);
  return fwd.pred.row(0).transpose();
}

double loss(const MatrixXd& predictions, const MatrixXd& targets, const LstmModel& model,
            double l2_kernel, LossKind kind) {
  return reduce_loss(predictions, targets, kind, nullptr) +
         kernel_penalty(model, l2_kernel);
}

double compute_loss(const LstmModel& model,
                    const std::vector<const MatrixXd*>& normalized_features,
                    const MatrixXd& normalized_targets, LossKind kind, double l2_kernel) {
  BatchResult fwd;
  model_forward(model,
                assemble_steps(normalized_features,
                               iota_rows(static_cast<Eigen::Index>(normalized_features.size()))),
                false, nullptr, fwd);
  return reduce_loss(fwd.pred, normalized_targets, kind, nullptr) +
         kernel_penalty(model, l2_kernel);
}

double compute_gradients(const LstmModel& model,
                         const std::vector<const MatrixXd*>& normalized_features,
                         const MatrixXd& normalized_targets, LossKind kind,
                         double l2_kernel, Gradients& grads) {
  BatchResult fwd;
  model_forward(model,
                assemble_steps(normalized_features,
                               iota_rows(static_cast<Eigen::Index>(normalized_features.size()))),
                false, nullptr, fwd);
  MatrixXd dpred;
  const double value = reduce_loss(fwd.pred, normalized_targets, kind, &dpred) +
                       kernel_penalty(model, l2_kernel);
  model_backward(model, fwd, dpred, l2_kernel, grads);
  return value;
}

std::vector<ParamView> parameter_views(LstmModel& model) {
  return {
      {"l1.wx", model.l1.wx.data(), model.l1.wx.size()},
      {"l1.wh", model.l1.wh.data(), model.l1.wh.size()},
      {"l1.b", model.l1.b.data(), model.l1.b.size()},
      {"l2.wx", model.l2.wx.data(), model.l2.wx.size()},
      {"l2.wh", model.l2.wh.data(), model.l2.wh.size()},
      {"l2.b", model.l2.b.data(), model.l2.b.size()},
      {"dense.w", model.dense_w.data(), model.dense_w.size()},
      {"dense.b", &model.dense_b, 1},
  };
}

std::vector<ParamView> gradient_views(Gradients& g) {
  return {
      {"l1.wx", g.l1.wx.data(), g.l1.wx.size()},
      {"l1.wh", g.l1.wh.data(), g.l1.wh.size()},
      {"l1.b", g.l1.b.data(), g.l1.b.size()},
      {"l2.wx", g.l2.wx.data(), g.l2.wx.size()},
      {"l2.wh", g.l2.wh.data(), g.l2.wh.size()},
      {"l2.b", g.l2.b.data(), g.l2.b.size()},
      {"dense.w", g.dense_w.data(), g.dense_w.size()},
      {"dense.b", &g.dense_b, 1},
  };
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

namespace {

struct AdamState {
  MatrixXd m, v;
};

class AdamOptimizer {
 public:
  AdamOptimizer(double lr) : lr_(lr) {}

  void step(LstmModel& model, Gradients& grads) {
    ++t_;
    auto params = parameter_views(model);
    auto gs = gradient_views(grads);
    if (states_.empty()) {
      states_.resize(params.size());
      for (std::size_t i = 0; i < params.size(); ++i) {
        states_[i].m = MatrixXd::Zero(params[i].size, 1);
        states_[i].v = MatrixXd::Zero(params[i].size, 1);
      }
    }
    const double bc1 = 1.0 - std::pow(kBeta1, t_);
    const double bc2 = 1.0 - std::pow(kBeta2, t_);
    for (std::size_t i = 0; i < params.size(); ++i) {
      Eigen::Map<VectorXd> w(params[i].data, params[i].size);
      Eigen::Map<const VectorXd> g(gs[i].data, gs[i].size);
      auto& s = states_[i];
      s.m = kBeta1 * s.m + (1.0 - kBeta1) * g.matrix();
      s.v = kBeta2 * s.v + (1.0 - kBeta2) * g.array().square().matrix();
      w.array() -= lr_ * (s.m.array() / bc1) /
                   ((s.v.array() / bc2).sqrt() + kEps);
    }
  }

 private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;
  double lr_;
  int t_ = 0;
  std::vector<AdamState> states_;
};

struct NormalizedSet {
  std::vector<MatrixXd> features;  // owned normalized copies
  std::vector<const MatrixXd*> feature_ptrs;
  MatrixXd targets;  // normalized
};

double effective_std(const TargetStats& s) { return s.std >= kStdFloor ? s.std : 1.0; }

NormalizedSet normalize_set(const RegressionDataset& set, const ChannelStats& fstats,
                            const TargetStats& tstats) {
  NormalizedSet out;
  out.features.reserve(set.features.size());
  for (const MatrixXd* f : set.features) {
    MatrixXd n = *f;
    for (Eigen::Index c = 0; c < n.cols(); ++c) {
      n.col(c).array() -= fstats.mean[c];
      if (fstats.std[c] >= kStdFloor) n.col(c) /= fstats.std[c];
    }
    out.features.push_back(std::move(n));
  }
  out.feature_ptrs.reserve(out.features.size());
  for (const MatrixXd& f : out.features) out.feature_ptrs.push_back(&f);
  out.targets = (set.targets.array() - tstats.mean).matrix() / effective_std(tstats);
  return out;
}

// Validation MAE in original units, evaluated in batches without dropout.
double validation_mae(const LstmModel& model, const NormalizedSet& val, int batch_size) {
  const Eigen::Index n = static_cast<Eigen::Index>(val.features.size());
  double abs_sum = 0.0;
  for (Eigen::Index start = 0; start < n; start += batch_size) {
    const Eigen::Index count = std::min<Eigen::Index>(batch_size, n - start);
    std::vector<Eigen::Index> rows(count);
    for (Eigen::Index i = 0; i < count; ++i) rows[i] = start + i;
    BatchResult fwd;
    model_forward(model, assemble_steps(val.feature_ptrs, rows), false, nullptr, fwd);
    abs_sum += (fwd.pred - val.targets.middleRows(start, count)).array().abs().sum();
  }
  const double count = static_cast<double>(n) * model.output_length();
  return abs_sum / count * effective_std(model.target_stats);
}

struct Snapshot {
  LstmLayer l1, l2;
  VectorXd dense_w;
  double dense_b;
};

Snapshot snapshot(const LstmModel& m) {
  return Snapshot{m.l1, m.l2, m.dense_w, m.dense_b};
}

void restore(LstmModel& m, const Snapshot& s) {
  m.l1 = s.l1;
  m.l2 = s.l2;
  m.dense_w = s.dense_w;
  m.dense_b = s.dense_b;
}

}  // namespace

TrainResult train(const RegressionDataset& train_set, const RegressionDataset& val_set,
                  const Hyperparameters& hyper, OutputMode mode,
                  const std::string& target_name) {
  hyper.validate();
  require(train_set.size() > 0, ErrorCode::InvalidArgument, "training set is empty");
  require(val_set.size() > 0, ErrorCode::InvalidArgument, "validation set is empty");
  require(train_set.targets.allFinite() && val_set.targets.allFinite(),
          ErrorCode::InvalidArgument, "targets contain non-finite values");
  const int t_out = mode == OutputMode::Scalar ? 1 : kSamples;
  require(train_set.targets.cols() == t_out && val_set.targets.cols() == t_out,
          ErrorCode::InvalidArgument, "target width does not match the output mode");

  Rng rng(hyper.seed);
  LstmModel model = init_model(mode, target_name, hyper, rng,
                               static_cast<int>(train_set.features[0]->cols()));

  // Normalization stats come from the training split only.
  {
    const Eigen::Index in = train_set.features[0]->cols();
    VectorXd sum = VectorXd::Zero(in);
    VectorXd sum_sq = VectorXd::Zero(in);
    std::int64_t rows = 0;
    for (const MatrixXd* f : train_set.features) {
      sum += f->colwise().sum().transpose();
      sum_sq += f->array().square().colwise().sum().matrix().transpose();
      rows += f->rows();
    }
    model.feature_stats.mean = sum / static_cast<double>(rows);
    model.feature_stats.std =
        (sum_sq / static_cast<double>(rows) -
         model.feature_stats.mean.array().square().matrix())
            .cwiseMax(0.0)
            .cwiseSqrt();
  }
  model.target_stats.mean = train_set.targets.mean();
  model.target_stats.std = std::sqrt(
      (train_set.targets.array() - model.target_stats.mean).square().mean());

  const NormalizedSet train_n = normalize_set(train_set, model.feature_stats, model.target_stats);
  const NormalizedSet val_n = normalize_set(val_set, model.feature_stats, model.target_stats);

  AdamOptimizer adam(hyper.learning_rate);
  Gradients grads;
  TrainingLog log;
  Snapshot best = snapshot(model);
  double best_val = std::numeric_limits<double>::infinity();
  int best_epoch = -1;

  std::vector<Eigen::Index> order = iota_rows(train_set.size());
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    Eigen::Index seen = 0;
    for (Eigen::Index start = 0; start < train_set.size(); start += hyper.batch_size) {
      const Eigen::Index count =
          std::min<Eigen::Index>(hyper.batch_size, train_set.size() - start);
      std::vector<Eigen::Index> rows(order.begin() + start, order.begin() + start + count);
      MatrixXd targets(count, t_out);
      for (Eigen::Index i = 0; i < count; ++i) targets.row(i) = train_n.targets.row(rows[i]);

      BatchResult fwd;
      model_forward(model, assemble_steps(train_n.feature_ptrs, rows), true, &rng, fwd);
      MatrixXd dpred;
      const double batch_loss = reduce_loss(fwd.pred, targets, LossKind::MeanAbsolute, &dpred) +
                                kernel_penalty(model, hyper.l2_kernel);
      model_backward(model, fwd, dpred, hyper.l2_kernel, grads);
      adam.step(model, grads);

      loss_sum += batch_loss * static_cast<double>(count);
      seen += count;
    }
    const double epoch_loss = loss_sum / static_cast<double>(seen);
    require(std::isfinite(epoch_loss), ErrorCode::TrainingDiverged,
            "training diverged at epoch " + std::to_string(epoch));
    const double val_mae = validation_mae(model, val_n, hyper.batch_size);
    require(std::isfinite(val_mae), ErrorCode::TrainingDiverged,
            "validation diverged at epoch " + std::to_string(epoch));
    log.train_loss.push_back(epoch_loss);
    log.val_mae.push_back(val_mae);
    if (val_mae < best_val) {
      best_val = val_mae;
      best_epoch = epoch;
      best = snapshot(model);
    }
  }

  restore(model, best);
  log.best_epoch = best_epoch;
  log.best_val_mae = best_val;
  return TrainResult{std::move(model), std::move(log)};
}

TrainResult train(const RegressionDataset& dataset, const Hyperparameters& hyper,
                  double val_split, OutputMode mode, const std::string& target_name) {
  require(val_split > 0.0 && val_split < 1.0, ErrorCode::InvalidArgument,
          "validation split must lie in (0, 1)");
  const Eigen::Index n = dataset.size();
  const Eigen::Index n_val = std::max<Eigen::Index>(1, static_cast<Eigen::Index>(val_split * n));
  require(n - n_val >= 1, ErrorCode::InvalidArgument, "dataset too small for the split");

  Rng rng(mix_seed(hyper.seed, 0x5eed5));
  std::vector<Eigen::Index> order = iota_rows(n);
  rng.shuffle(order);

  RegressionDataset tr, va;
  tr.targets.resize(n - n_val, dataset.targets.cols());
  va.targets.resize(n_val, dataset.targets.cols());
  for (Eigen::Index i = 0; i < n - n_val; ++i) {
    tr.features.push_back(dataset.features[order[i]]);
    tr.targets.row(i) = dataset.targets.row(order[i]);
  }
  for (Eigen::Index i = 0; i < n_val; ++i) {
    va.features.push_back(dataset.features[order[n - n_val + i]]);
    va.targets.row(i) = dataset.targets.row(order[n - n_val + i]);
  }
  return train(tr, va, hyper, mode, target_name);
}

Hyperparameters tune(const RegressionDataset& train_set, const RegressionDataset& val_set,
                     const HyperGrid& grid, OutputMode mode, std::uint64_t seed) {
  require(!grid.hidden_units.empty() && !grid.learning_rate.empty() &&
              !grid.epochs.empty() && !grid.dropout_rate.empty() &&
              !grid.l2_kernel.empty() && !grid.batch_size.empty(),
          ErrorCode::InvalidArgument, "hyperparameter grid has an empty axis");

  Hyperparameters best;
  double best_mae = std::numeric_limits<double>::infinity();
  bool first = true;
  for (int d : grid.hidden_units)
    for (double lr : grid.learning_rate)
      for (int ep : grid.epochs)
        for (double dr : grid.dropout_rate)
          for (double l2 : grid.l2_kernel)
            for (int bs : grid.batch_size) {
              Hyperparameters h;
              h.hidden_units = d;
              h.learning_rate = lr;
              h.epochs = ep;
              h.dropout_rate = dr;
              h.l2_kernel = l2;
              h.batch_size = bs;
              h.seed = seed;
              const TrainResult r = train(train_set, val_set, h, mode, "tune");
              const double mae = r.log.best_val_mae;
              const bool better =
                  first || mae < best_mae ||
                  (mae == best_mae &&
                   (d < best.hidden_units ||
                    (d == best.hidden_units && lr < best.learning_rate)));
              if (better) {
                best = h;
                best_mae = mae;
                first = false;
              }
            }
  return best;
}

// ---------------------------------------------------------------------------
// Prediction
// ---------------------------------------------------------------------------

Eigen::VectorXd predict(const LstmModel& model, const FeatureTensor& raw_features) {
  const FeatureTensor normalized = normalize(raw_features, model.feature_stats);
  const VectorXd out = forward(model, normalized);
  return (out.array() * effective_std(model.target_stats) + model.target_stats.mean)
      .matrix();
}

ImpactInfo predict_impact_info(const std::array<const LstmModel*, 5>& models,
                               const FeatureTensor& raw_features) {
  for (std::size_t i = 0; i < models.size(); ++i) {
    require(models[i] != nullptr, ErrorCode::InvalidArgument,
            std::string("missing model for target ") + kScalarTargets[i]);
    require(models[i]->target_name == kScalarTargets[i], ErrorCode::InvalidArgument,
            "model order must be speed, alpha, beta, y, z");
  }
  ImpactInfo info;
  info.speed_mps = predict(*models[0], raw_features)[0];
  info.alpha_deg = predict(*models[1], raw_features)[0];
  info.beta_deg = predict(*models[2], raw_features)[0];
  info.y_mm = predict(*models[3], raw_features)[0];
  info.z_mm = predict(*models[4], raw_features)[0];
  return info;
}

std::pair<ForceProfile, ForceProfile> predict_force(const LstmModel& helmet_model,
                                                    const LstmModel& head_model,
                                                    const FeatureTensor& raw_features) {
  require(helmet_model.mode == OutputMode::Sequence &&
              head_model.mode == OutputMode::Sequence,
          ErrorCode::InvalidArgument, "force prediction needs sequence-mode models");
  ForceProfile helmet, head;
  helmet.values_kN = predict(helmet_model, raw_features).cwiseMax(0.0);
  head.values_kN = predict(head_model, raw_features).cwiseMax(0.0);
  return {helmet, head};
}

LocationPrediction location_from_setup(const ImpactSetup& setup) {
  const ImpactLine line = impact_line(setup);
  const auto hit = sphere_intersection(line);
  LocationPrediction out;
  if (hit.has_value()) {
    out.location = to_location(*hit);
    out.missed_sphere = false;
  } else {
    // Closest sphere point to the line: the foot of the perpendicular from
    // the center, pushed out to the surface.
    const Eigen::Vector3d foot =
        line.point - line.point.dot(line.direction) * line.direction;
    out.location = to_location(kSphereRadiusMm * foot.normalized());
    out.missed_sphere = true;
  }
  out.region = classify_region(out.location);
  return out;
}

LocationPrediction predict_location(const std::array<const LstmModel*, 5>& models,
                                    const FeatureTensor& raw_features) {
  const ImpactInfo info = predict_impact_info(models, raw_features);
  ImpactSetup setup;
  setup.alpha_deg = info.alpha_deg;
  setup.beta_deg = info.beta_deg;
  setup.y_mm = info.y_mm;
  setup.z_mm = info.z_mm;
  setup.speed_mps = info.speed_mps;
  return location_from_setup(setup);
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'I', 'M', 'P', 'A', 'C', 'T', 'M', '1'};
constexpr std::uint32_t kModelVersion = 1;

void write_matrix_row_major(std::ofstream& out, const MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const double v = m(r, c);
      out.write(reinterpret_cast<const char*>(&v), sizeof(double));
    }
  }
}

MatrixXd read_matrix_row_major(std::ifstream& in, Eigen::Index rows, Eigen::Index cols,
                               const std::string& context) {
  MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      double v = 0.0;
      in.read(reinterpret_cast<char*>(&v), sizeof(double));
      m(r, c) = v;
    }
  }
  require(in.good(), ErrorCode::ParseError, context + ": truncated weight data");
  return m;
}

}  // namespace

void save_model(const std::filesystem::path& path, const LstmModel& model) {
  nlohmann::json header;
  header["mode"] = model.mode == OutputMode::Scalar ? "scalar" : "sequence";
  header["input_dim"] = model.input_dim;
  header["hidden"] = model.hidden;
  header["target_name"] = model.target_name;
  header["hyper"] = {{"hidden_units", model.hyper.hidden_units},
                     {"learning_rate", model.hyper.learning_rate},
                     {"epochs", model.hyper.epochs},
                     {"dropout_rate", model.hyper.dropout_rate},
                     {"l2_kernel", model.hyper.l2_kernel},
                     {"batch_size", model.hyper.batch_size},
                     {"seed", model.hyper.seed}};
  header["feature_mean"] = std::vector<double>(
      model.feature_stats.mean.data(), model.feature_stats.mean.data() + model.feature_stats.mean.size());
  header["feature_std"] = std::vector<double>(
      model.feature_stats.std.data(), model.feature_stats.std.data() + model.feature_stats.std.size());
  header["target_mean"] = model.target_stats.mean;
  header["target_std"] = model.target_stats.std;
  const std::string header_str = header.dump();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), ErrorCode::IoError, "cannot write model file " + path.string());
  out.write(kMagic, sizeof(kMagic));
  const std::uint32_t version = kModelVersion;
  const std::uint32_t header_len = static_cast<std::uint32_t>(header_str.size());
  out.write(reinterpret_cast<const char*>(&version), sizeof(version));
  out.write(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
  out.write(header_str.data(), header_str.size());
  write_matrix_row_major(out, model.l1.wx);
  write_matrix_row_major(out, model.l1.wh);
  write_matrix_row_major(out, model.l1.b);
  write_matrix_row_major(out, model.l2.wx);
  write_matrix_row_major(out, model.l2.wh);
  write_matrix_row_major(out, model.l2.b);
  write_matrix_row_major(out, model.dense_w);
  MatrixXd bias(1, 1);
  bias(0, 0) = model.dense_b;
  write_matrix_row_major(out, bias);
  require(out.good(), ErrorCode::IoError, "write failed for " + path.string());
}

LstmModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::IoError, "cannot open model file " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  require(in.good() && std::memcmp(magic, kMagic, sizeof(kMagic)) == 0,
          ErrorCode::ParseError, path.string() + ": not a model file");
  std::uint32_t version = 0, header_len = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  in.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
  require(in.good(), ErrorCode::ParseError, path.string() + ": truncated header");
  require(version == kModelVersion, ErrorCode::ParseError,
          path.string() + ": unsupported model version " + std::to_string(version));
  std::string header_str(header_len, '\0');
  in.read(header_str.data(), header_len);
  require(in.good(), ErrorCode::ParseError, path.string() + ": truncated header");
  const auto header = nlohmann::json::parse(header_str, nullptr, false);
  require(!header.is_discarded(), ErrorCode::ParseError,
          path.string() + ": invalid model header");

  LstmModel m;
  m.mode = header.at("mode").get<std::string>() == "scalar" ? OutputMode::Scalar
                                                            : OutputMode::Sequence;
  m.input_dim = header.at("input_dim").get<int>();
  m.hidden = header.at("hidden").get<int>();
  m.target_name = header.at("target_name").get<std::string>();
  const auto& h = header.at("hyper");
  m.hyper.hidden_units = h.at("hidden_units").get<int>();
  m.hyper.learning_rate = h.at("learning_rate").get<double>();
  m.hyper.epochs = h.at("epochs").get<int>();
  m.hyper.dropout_rate = h.at("dropout_rate").get<double>();
  m.hyper.l2_kernel = h.at("l2_kernel").get<double>();
  m.hyper.batch_size = h.at("batch_size").get<int>();
  m.hyper.seed = h.at("seed").get<std::uint64_t>();
  const auto fmean = header.at("feature_mean").get<std::vector<double>>();
  const auto fstd = header.at("feature_std").get<std::vector<double>>();
  require(static_cast<int>(fmean.size()) == m.input_dim &&
              static_cast<int>(fstd.size()) == m.input_dim,
          ErrorCode::ParseError, path.string() + ": stats length mismatch");
  m.feature_stats.mean = Eigen::Map<const VectorXd>(fmean.data(), fmean.size());
  m.feature_stats.std = Eigen::Map<const VectorXd>(fstd.data(), fstd.size());
  m.target_stats.mean = header.at("target_mean").get<double>();
  m.target_stats.std = header.at("target_std").get<double>();

  const int d = m.hidden;
  m.l1.wx = read_matrix_row_major(in, 4 * d, m.input_dim, path.string());
  m.l1.wh = read_matrix_row_major(in, 4 * d, d, path.string());
  m.l1.b = read_matrix_row_major(in, 4 * d, 1, path.string());
  m.l2.wx = read_matrix_row_major(in, 4 * d, d, path.string());
  m.l2.wh = read_matrix_row_major(in, 4 * d, d, path.string());
  m.l2.b = read_matrix_row_major(in, 4 * d, 1, path.string());
  m.dense_w = read_matrix_row_major(in, d, 1, path.string());
  m.dense_b = read_matrix_row_major(in, 1, 1, path.string())(0, 0);
  return m;
}

}  // namespace impact
