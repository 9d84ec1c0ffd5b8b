#pragma once

// LSTM cell, stacked (bi)directional recurrent model with a linear head, and
// exact backpropagation through time. Batches are column-major: every
// activation matrix is (units x batch).

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "hmg/grid_model.hpp"

namespace hmg::forecast {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

struct LstmCellParams {
  Mat W_ix, W_ih;
  Vec b_i;
  Mat W_fx, W_fh;
  Vec b_f;
  Mat W_cx, W_ch;
  Vec b_c;
  Mat W_ox, W_oh;
  Vec b_o;

  static LstmCellParams zeros(Eigen::Index input, Eigen::Index hidden) {
    LstmCellParams p;
    p.visit([&](const std::string& name, auto& t) {
      using T = std::decay_t<decltype(t)>;
      if constexpr (std::is_same_v<T, Vec>)
        t = Vec::Zero(hidden);
      else
        t = Mat::Zero(hidden, name.back() == 'x' ? input : hidden);
    });
    return p;
  }

  Eigen::Index input_size() const { return W_ix.cols(); }
  Eigen::Index hidden_size() const { return W_ix.rows(); }
  bool empty() const { return W_ix.size() == 0; }

  void check() const {
    const auto h = hidden_size(), n = input_size();
    visit([&](const std::string& name, const auto& t) {
      using T = std::decay_t<decltype(t)>;
      bool ok;
      if constexpr (std::is_same_v<T, Vec>)
        ok = t.size() == h;
      else
        ok = t.rows() == h && t.cols() == (name.back() == 'x' ? n : h);
      if (!ok) throw ContractViolation("lstm cell: " + name + " has inconsistent dimensions");
    });
  }

  template <class F>
  void visit(F&& f) {
    visit_impl(*this, f);
  }
  template <class F>
  void visit(F&& f) const {
    visit_impl(*this, f);
  }

 private:
  template <class Self, class F>
  static void visit_impl(Self& s, F& f) {
    f("W_ix", s.W_ix), f("W_ih", s.W_ih), f("b_i", s.b_i);
    f("W_fx", s.W_fx), f("W_fh", s.W_fh), f("b_f", s.b_f);
    f("W_cx", s.W_cx), f("W_ch", s.W_ch), f("b_c", s.b_c);
    f("W_ox", s.W_ox), f("W_oh", s.W_oh), f("b_o", s.b_o);
  }
};

/// Activations of one cell step for a batch.
struct CellStep {
  Mat i, f, g, o;  // gates and candidate
  Mat c, tanh_c, h;
};

inline CellStep lstm_cell_step(const Mat& x, const Mat& h_prev, const Mat& c_prev, const LstmCellParams& p) {
  if (x.rows() != p.input_size() || h_prev.rows() != p.hidden_size() || c_prev.rows() != p.hidden_size() ||
      h_prev.cols() != x.cols() || c_prev.cols() != x.cols())
    throw ContractViolation("lstm_cell_forward: dimension mismatch");
  auto gate = [&](const Mat& wx, const Mat& wh, const Vec& b) -> Mat {
    Mat z = wx * x;
    z.noalias() += wh * h_prev;
    z.colwise() += b;
    return z;
  };
  CellStep s;
  s.i = gate(p.W_ix, p.W_ih, p.b_i).unaryExpr(&sigmoid);
  s.f = gate(p.W_fx, p.W_fh, p.b_f).unaryExpr(&sigmoid);
  s.g = gate(p.W_cx, p.W_ch, p.b_c).array().tanh().matrix();
  s.o = gate(p.W_ox, p.W_oh, p.b_o).unaryExpr(&sigmoid);
  s.c = (s.f.array() * c_prev.array() + s.i.array() * s.g.array()).matrix();
  s.tanh_c = s.c.array().tanh().matrix();
  s.h = (s.o.array() * s.tanh_c.array()).matrix();
  return s;
}

struct CellState {
  Vec h, c;
};

inline CellState lstm_cell_forward(const Vec& x, const Vec& h_prev, const Vec& c_prev, const LstmCellParams& p) {
  const auto s = lstm_cell_step(x, h_prev, c_prev, p);
  return {s.h.col(0), s.c.col(0)};
}

struct RecurrentLayer {
  LstmCellParams forward_cell;
  LstmCellParams backward_cell;  // empty for a unidirectional layer
};

/// Min-max scaling of load values, fitted on the training split.
struct Scaler {
  double min = 0.0;
  double max = 1.0;

  double apply(double kw) const { return (kw - min) / (max - min); }
  double invert(double y) const { return min + y * (max - min); }
};

/// Which backward-direction state feeds the head: the one at the final step
/// (y_T of the per-step output equation) or the one after the backward pass
/// has read the whole window (t = 1).
enum class Readout { kFinalStep, kWindowEnds };

struct BlstmModel {
  std::vector<RecurrentLayer> layers;
  bool bidirectional = true;
  Readout readout = Readout::kFinalStep;
  Mat W_fy;  // 1 x hidden
  Mat W_by;  // 1 x hidden, empty when unidirectional
  Vec b_y;   // 1
  int input_window = 14;
  bool day_of_week = true;
  Scaler scaler;

  Eigen::Index hidden_size() const { return layers.empty() ? 0 : layers[0].forward_cell.hidden_size(); }
  Eigen::Index input_size() const { return layers.empty() ? 0 : layers[0].forward_cell.input_size(); }
  int directions() const { return bidirectional ? 2 : 1; }

  template <class F>
  void visit(F&& f) {
    visit_impl(*this, f);
  }
  template <class F>
  void visit(F&& f) const {
    visit_impl(*this, f);
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    visit([&](const std::string&, const auto& t) { n += static_cast<std::size_t>(t.size()); });
    return n;
  }

  /// Same architecture with every parameter zero (gradient accumulator).
  BlstmModel zeros_like() const {
    BlstmModel z = *this;
    z.visit([](const std::string&, auto& t) { t.setZero(); });
    return z;
  }

  void check() const {
    if (layers.empty()) throw ContractViolation("model: no recurrent layers");
    const auto h = hidden_size();
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const auto& L = layers[l];
      L.forward_cell.check();
      if (L.forward_cell.hidden_size() != h) throw ContractViolation("model: hidden size differs between layers");
      if (bidirectional != !L.backward_cell.empty()) throw ContractViolation("model: direction mismatch");
      if (bidirectional) {
        L.backward_cell.check();
        if (L.backward_cell.input_size() != L.forward_cell.input_size() || L.backward_cell.hidden_size() != h)
          throw ContractViolation("model: backward cell shape differs from forward cell");
      }
      if (l > 0 && L.forward_cell.input_size() != h * directions())
        throw ContractViolation("model: layer input does not match previous layer output");
    }
    if (W_fy.rows() != 1 || W_fy.cols() != h || b_y.size() != 1) throw ContractViolation("model: bad output head");
    if (bidirectional && (W_by.rows() != 1 || W_by.cols() != h)) throw ContractViolation("model: bad backward head");
  }

 private:
  template <class Self, class F>
  static void visit_impl(Self& m, F& f) {
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
      const std::string p = "layer" + std::to_string(l) + ".";
      m.layers[l].forward_cell.visit([&](const std::string& n, auto& t) { f(p + "forward." + n, t); });
      if (m.bidirectional)
        m.layers[l].backward_cell.visit([&](const std::string& n, auto& t) { f(p + "backward." + n, t); });
    }
    f("W_fy", m.W_fy);
    if (m.bidirectional) f("W_by", m.W_by);
    f("b_y", m.b_y);
  }
};

struct ModelShape {
  int input_size = 8;
  int hidden = 32;
  int depth = 2;
  bool bidirectional = true;
  int window = 14;
  Readout readout = Readout::kFinalStep;
};

/// Uniform initialization in +-1/sqrt(fan-in).
template <class Rng>
BlstmModel make_model(const ModelShape& s, Rng& rng) {
  if (s.input_size < 1 || s.hidden < 1 || s.depth < 1 || s.window < 1)
    throw ContractViolation("make_model: sizes must be positive");
  BlstmModel m;
  m.bidirectional = s.bidirectional;
  m.readout = s.readout;
  m.input_window = s.window;
  const int dirs = s.bidirectional ? 2 : 1;
  auto fill = [&](auto& t, double fan_in) {
    std::uniform_real_distribution<double> u(-1.0 / std::sqrt(fan_in), 1.0 / std::sqrt(fan_in));
    for (Eigen::Index k = 0; k < t.size(); ++k) t.data()[k] = u(rng);
  };
  for (int l = 0; l < s.depth; ++l) {
    const int in = l == 0 ? s.input_size : s.hidden * dirs;
    RecurrentLayer L;
    L.forward_cell = LstmCellParams::zeros(in, s.hidden);
    L.forward_cell.visit([&](const std::string&, auto& t) { fill(t, in + s.hidden); });
    if (s.bidirectional) {
      L.backward_cell = LstmCellParams::zeros(in, s.hidden);
      L.backward_cell.visit([&](const std::string&, auto& t) { fill(t, in + s.hidden); });
    }
    m.layers.push_back(std::move(L));
  }
  m.W_fy = Mat::Zero(1, s.hidden);
  fill(m.W_fy, s.hidden * dirs);
  if (s.bidirectional) {
    m.W_by = Mat::Zero(1, s.hidden);
    fill(m.W_by, s.hidden * dirs);
  }
  m.b_y = Vec::Zero(1);
  fill(m.b_y, s.hidden * dirs);
  return m;
}

/// A batch of windows: inputs[t] is (features x batch), targets (batch).
struct Batch {
  std::vector<Mat> inputs;
  Vec targets;

  Eigen::Index size() const { return targets.size(); }
};

namespace detail {

struct DirectionTrace {
  std::vector<CellStep> steps;  // indexed by time, whatever the processing order
};

struct LayerTrace {
  std::vector<Mat> input;  // after dropout
  std::vector<Mat> mask;   // dropout scale per step (empty when no dropout)
  DirectionTrace fwd, bwd;
};

struct Trace {
  std::vector<LayerTrace> layers;
  Mat head_fwd, head_bwd;            // final-step hidden states fed to the head (after dropout)
  Mat head_mask_fwd, head_mask_bwd;  // dropout scale of the head input
  Vec y;                             // predictions (batch)
};

inline DirectionTrace run_direction(const LstmCellParams& p, const std::vector<Mat>& xs, bool reverse) {
  const auto T = xs.size();
  const auto B = xs.empty() ? 0 : xs[0].cols();
  DirectionTrace tr;
  tr.steps.resize(T);
  Mat h = Mat::Zero(p.hidden_size(), B), c = Mat::Zero(p.hidden_size(), B);
  for (std::size_t k = 0; k < T; ++k) {
    const auto t = reverse ? T - 1 - k : k;
    tr.steps[t] = lstm_cell_step(xs[t], h, c, p);
    h = tr.steps[t].h;
    c = tr.steps[t].c;
  }
  return tr;
}

/// Backpropagation through one direction. dh[t] is the loss gradient w.r.t.
/// h_t coming from above; dx[t] receives the gradient w.r.t. the inputs.
inline void backprop_direction(const LstmCellParams& p, const std::vector<Mat>& xs, const DirectionTrace& tr,
                               bool reverse, const std::vector<Mat>& dh, LstmCellParams& g, std::vector<Mat>& dx) {
  const auto T = xs.size();
  const auto H = p.hidden_size();
  const auto B = xs[0].cols();
  Mat dh_next = Mat::Zero(H, B), dc_next = Mat::Zero(H, B);
  const Mat zero = Mat::Zero(H, B);
  for (std::size_t k = T; k-- > 0;) {
    const auto t = reverse ? T - 1 - k : k;
    const bool first = k == 0;
    const auto prev = reverse ? t + 1 : t - 1;
    const Mat& h_prev = first ? zero : tr.steps[prev].h;
    const Mat& c_prev = first ? zero : tr.steps[prev].c;
    const auto& s = tr.steps[t];
    const Eigen::ArrayXXd dht = (dh[t] + dh_next).array();
    const Eigen::ArrayXXd dc =
        dht * s.o.array() * (1.0 - s.tanh_c.array().square()) + dc_next.array();
    const Mat dzi = (dc * s.g.array() * s.i.array() * (1.0 - s.i.array())).matrix();
    const Mat dzf = (dc * c_prev.array() * s.f.array() * (1.0 - s.f.array())).matrix();
    const Mat dzg = (dc * s.i.array() * (1.0 - s.g.array().square())).matrix();
    const Mat dzo = (dht * s.tanh_c.array() * s.o.array() * (1.0 - s.o.array())).matrix();
    dc_next = (dc * s.f.array()).matrix();

    g.W_ix.noalias() += dzi * xs[t].transpose();
    g.W_fx.noalias() += dzf * xs[t].transpose();
    g.W_cx.noalias() += dzg * xs[t].transpose();
    g.W_ox.noalias() += dzo * xs[t].transpose();
    if (!first) {
      g.W_ih.noalias() += dzi * h_prev.transpose();
      g.W_fh.noalias() += dzf * h_prev.transpose();
      g.W_ch.noalias() += dzg * h_prev.transpose();
      g.W_oh.noalias() += dzo * h_prev.transpose();
    }
    g.b_i += dzi.rowwise().sum();
    g.b_f += dzf.rowwise().sum();
    g.b_c += dzg.rowwise().sum();
    g.b_o += dzo.rowwise().sum();

    dx[t].noalias() += p.W_ix.transpose() * dzi;
    dx[t].noalias() += p.W_fx.transpose() * dzf;
    dx[t].noalias() += p.W_cx.transpose() * dzg;
    dx[t].noalias() += p.W_ox.transpose() * dzo;
    dh_next.noalias() = p.W_ih.transpose() * dzi;
    dh_next.noalias() += p.W_fh.transpose() * dzf;
    dh_next.noalias() += p.W_ch.transpose() * dzg;
    dh_next.noalias() += p.W_oh.transpose() * dzo;
  }
}

template <class Rng>
Mat dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Mat m(rows, cols);
  const double keep = 1.0 / (1.0 - rate);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = u(rng) < rate ? 0.0 : keep;
  return m;
}

template <class Rng>
Trace forward(const BlstmModel& m, const std::vector<Mat>& inputs, double dropout, Rng* rng) {
  if (static_cast<int>(inputs.size()) != m.input_window)
    throw ContractViolation("blstm_forward: sequence length " + std::to_string(inputs.size()) +
                            " differs from the input window " + std::to_string(m.input_window));
  for (const auto& x : inputs)
    if (x.rows() != m.input_size() || x.cols() != inputs[0].cols())
      throw ContractViolation("blstm_forward: feature dimension mismatch");
  const bool drop = dropout > 0.0 && rng;
  const auto H = m.hidden_size();
  const auto B = inputs[0].cols();
  Trace tr;
  std::vector<Mat> xs = inputs;
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    LayerTrace lt;
    if (l > 0 && drop) {
      for (auto& x : xs) {
        lt.mask.push_back(dropout_mask(x.rows(), B, dropout, *rng));
        x = (x.array() * lt.mask.back().array()).matrix();
      }
    }
    lt.fwd = run_direction(m.layers[l].forward_cell, xs, false);
    if (m.bidirectional) lt.bwd = run_direction(m.layers[l].backward_cell, xs, true);
    lt.input = std::move(xs);
    xs.assign(lt.input.size(), Mat());
    for (std::size_t t = 0; t < xs.size(); ++t) {
      if (m.bidirectional) {
        xs[t].resize(2 * H, B);
        xs[t].topRows(H) = lt.fwd.steps[t].h;
        xs[t].bottomRows(H) = lt.bwd.steps[t].h;
      } else {
        xs[t] = lt.fwd.steps[t].h;
      }
    }
    tr.layers.push_back(std::move(lt));
  }
  const auto& top = tr.layers.back();
  const auto T = inputs.size();
  tr.head_fwd = top.fwd.steps[T - 1].h;
  const std::size_t bwd_step = m.readout == Readout::kFinalStep ? T - 1 : 0;
  if (m.bidirectional) tr.head_bwd = top.bwd.steps[bwd_step].h;
  if (drop) {
    tr.head_mask_fwd = dropout_mask(H, B, dropout, *rng);
    tr.head_fwd = (tr.head_fwd.array() * tr.head_mask_fwd.array()).matrix();
    if (m.bidirectional) {
      tr.head_mask_bwd = dropout_mask(H, B, dropout, *rng);
      tr.head_bwd = (tr.head_bwd.array() * tr.head_mask_bwd.array()).matrix();
    }
  }
  Mat y = m.W_fy * tr.head_fwd;
  if (m.bidirectional) y.noalias() += m.W_by * tr.head_bwd;
  y.array() += m.b_y(0);
  tr.y = y.row(0).transpose();
  return tr;
}

}  // namespace detail

/// Dropout-free predictions (scaled units) of the final step for a batch.
inline Vec predict_batch(const BlstmModel& m, const std::vector<Mat>& inputs) {
  return detail::forward<std::mt19937_64>(m, inputs, 0.0, nullptr).y;
}

/// Prediction for one window, each step a feature vector.
inline double blstm_forward(const std::vector<Vec>& sequence, const BlstmModel& m) {
  std::vector<Mat> xs;
  for (const auto& v : sequence) xs.emplace_back(v);
  return predict_batch(m, xs)(0);
}

/// Per-step outputs y_t = W_fy h_fwd,t + W_by h_bwd,t + b_y of the top layer
/// for a single sequence.
inline std::vector<double> sequence_outputs(const std::vector<Vec>& sequence, const BlstmModel& m) {
  std::vector<Mat> xs;
  for (const auto& v : sequence) xs.emplace_back(v);
  const auto tr = detail::forward<std::mt19937_64>(m, xs, 0.0, nullptr);
  std::vector<double> out;
  const auto& top = tr.layers.back();
  for (std::size_t t = 0; t < xs.size(); ++t) {
    double y = (m.W_fy * top.fwd.steps[t].h)(0, 0) + m.b_y(0);
    if (m.bidirectional) y += (m.W_by * top.bwd.steps[t].h)(0, 0);
    out.push_back(y);
  }
  return out;
}

struct LossGradient {
  double loss = 0.0;
  Vec squared_errors;  // per batch column
  BlstmModel grad;
};

/// Mean squared error of the final-step prediction and its exact gradient.
/// With dropout > 0 and an rng, inverted dropout is applied between layers
/// and before the head.
template <class Rng>
LossGradient loss_and_gradient(const BlstmModel& m, const Batch& batch, double dropout = 0.0,
                               Rng* rng = static_cast<Rng*>(nullptr)) {
  if (batch.size() == 0) throw ContractViolation("gradients: empty batch");
  m.check();
  const auto tr = detail::forward(m, batch.inputs, dropout, rng);
  const auto B = batch.size();
  const auto H = m.hidden_size();
  const auto T = batch.inputs.size();
  LossGradient out;
  const Vec err = tr.y - batch.targets;
  out.squared_errors = err.array().square().matrix();
  out.loss = out.squared_errors.mean();
  out.grad = m.zeros_like();
  auto& g = out.grad;

  const Eigen::RowVectorXd dy = (2.0 / static_cast<double>(B)) * err.transpose();
  g.W_fy.noalias() += dy * tr.head_fwd.transpose();
  g.b_y(0) += dy.sum();
  std::vector<Mat> dh_f(T, Mat::Zero(H, B)), dh_b;
  dh_f[T - 1] = m.W_fy.transpose() * dy;
  if (tr.head_mask_fwd.size()) dh_f[T - 1] = (dh_f[T - 1].array() * tr.head_mask_fwd.array()).matrix();
  if (m.bidirectional) {
    g.W_by.noalias() += dy * tr.head_bwd.transpose();
    dh_b.assign(T, Mat::Zero(H, B));
    const std::size_t tb = m.readout == Readout::kFinalStep ? T - 1 : 0;
    dh_b[tb] = m.W_by.transpose() * dy;
    if (tr.head_mask_bwd.size()) dh_b[tb] = (dh_b[tb].array() * tr.head_mask_bwd.array()).matrix();
  }

  for (std::size_t l = m.layers.size(); l-- > 0;) {
    const auto& lt = tr.layers[l];
    const auto& L = m.layers[l];
    std::vector<Mat> dx(T, Mat::Zero(L.forward_cell.input_size(), B));
    detail::backprop_direction(L.forward_cell, lt.input, lt.fwd, false, dh_f, g.layers[l].forward_cell, dx);
    if (m.bidirectional)
      detail::backprop_direction(L.backward_cell, lt.input, lt.bwd, true, dh_b, g.layers[l].backward_cell, dx);
    if (l == 0) break;
    for (std::size_t t = 0; t < T; ++t) {
      if (!lt.mask.empty()) dx[t] = (dx[t].array() * lt.mask[t].array()).matrix();
      dh_f[t] = dx[t].topRows(H);
      if (m.bidirectional) dh_b[t] = dx[t].bottomRows(H);
    }
  }

  g.visit([](const std::string& name, const auto& t) {
    if (!t.allFinite()) throw NumericError("non-finite gradient in " + name);
  });
  return out;
}

inline BlstmModel gradients(const BlstmModel& m, const Batch& batch) {
  return loss_and_gradient<std::mt19937_64>(m, batch).grad;
}

inline double batch_loss(const BlstmModel& m, const Batch& batch) {
  const Vec y = predict_batch(m, batch.inputs);
  return (y - batch.targets).squaredNorm() / static_cast<double>(batch.size());
}

}  // namespace hmg::forecast
