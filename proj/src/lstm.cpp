#include "predfilter/lstm.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <string>

#include "predfilter/error.hpp"
#include "predfilter/rng.hpp"

namespace predfilter {

namespace {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstRowMap = Eigen::Map<const RowMat>;
using RowMap = Eigen::Map<RowMat>;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Activations of one unrolled step for a batch (columns = examples).
struct StepCache {
  Mat x;      // input x batch
  Mat h_prev; // hidden x batch
  Mat c_prev;
  Mat gates;  // 4 hidden x batch, post-activation, order i f g o
  Mat c;
  Mat tanh_c;
  Mat h;
};

void gate_step(const LstmParams& p, StepCache& s) {
  const auto H = static_cast<Eigen::Index>(p.hidden_size());
  const auto I = static_cast<Eigen::Index>(p.input_size());
  const ConstRowMap W(p.input_weights_all().data(), 4 * H, I);
  const ConstRowMap U(p.recurrent_weights_all().data(), 4 * H, H);
  const Eigen::Map<const Vec> b(p.bias_all().data(), 4 * H);

  s.gates.noalias() = W * s.x;
  s.gates.noalias() += U * s.h_prev;
  s.gates.colwise() += b;
  auto act = s.gates.array();
  act.topRows(2 * H) = act.topRows(2 * H).unaryExpr(&sigmoid);
  act.middleRows(2 * H, H) = act.middleRows(2 * H, H).tanh();
  act.bottomRows(H) = act.bottomRows(H).unaryExpr(&sigmoid);

  const auto i = s.gates.topRows(H).array();
  const auto f = s.gates.middleRows(H, H).array();
  const auto g = s.gates.middleRows(2 * H, H).array();
  const auto o = s.gates.bottomRows(H).array();
  s.c = (f * s.c_prev.array() + i * g).matrix();
  s.tanh_c = s.c.array().tanh().matrix();
  s.h = (o * s.tanh_c.array()).matrix();
}

void check_window_inputs(std::span<const double> inputs, const LstmParams& p,
                         std::size_t& batch) {
  const std::size_t per = p.window() * p.input_size();
  if (per == 0) throw InputError("model has zero window or input size");
  if (inputs.size() % per != 0 || inputs.empty()) {
    throw InputError("input length " + std::to_string(inputs.size()) +
                     " is not a multiple of window*input = " +
                     std::to_string(per));
  }
  batch = inputs.size() / per;
}

// Unrolls the layer over a batch from zero state. When `caches` is non-null
// it receives one entry per time step.
Mat unroll(std::span<const double> inputs, std::size_t batch,
           const LstmParams& p, std::vector<StepCache>* caches) {
  const auto H = static_cast<Eigen::Index>(p.hidden_size());
  const auto I = static_cast<Eigen::Index>(p.input_size());
  const auto B = static_cast<Eigen::Index>(batch);
  const std::size_t T = p.window();
  const std::size_t I_sz = p.input_size();

  StepCache s;
  s.h = Mat::Zero(H, B);
  s.c = Mat::Zero(H, B);
  if (caches) {
    caches->clear();
    caches->reserve(T);
  }
  for (std::size_t t = 0; t < T; ++t) {
    s.x.resize(I, B);
    for (Eigen::Index b = 0; b < B; ++b) {
      const std::size_t base = (static_cast<std::size_t>(b) * T + t) * I_sz;
      for (Eigen::Index j = 0; j < I; ++j) {
        s.x(j, b) = inputs[base + static_cast<std::size_t>(j)];
      }
    }
    s.h_prev = std::move(s.h);
    s.c_prev = std::move(s.c);
    gate_step(p, s);
    if (caches) caches->push_back(s);
  }
  return s.h;
}

}  // namespace

LstmParams::LstmParams(std::size_t input_size, std::size_t hidden_size,
                       std::size_t window)
    : input_(input_size),
      hidden_(hidden_size),
      window_(window),
      values_(count_for(input_size, hidden_size), 0.0) {}

std::size_t LstmParams::count_for(std::size_t input_size, std::size_t hidden_size) {
  return 4 * (hidden_size * (input_size + hidden_size) + hidden_size) +
         hidden_size + 1;
}

std::span<double> LstmParams::input_weights(Gate g) noexcept {
  const auto n = hidden_ * input_;
  return std::span<double>(values_).subspan(
      input_offset() + static_cast<std::size_t>(g) * n, n);
}
std::span<const double> LstmParams::input_weights(Gate g) const noexcept {
  const auto n = hidden_ * input_;
  return std::span<const double>(values_).subspan(
      input_offset() + static_cast<std::size_t>(g) * n, n);
}
std::span<const double> LstmParams::input_weights_all() const noexcept {
  return std::span<const double>(values_).subspan(input_offset(),
                                                  4 * hidden_ * input_);
}
std::span<double> LstmParams::recurrent_weights(Gate g) noexcept {
  const auto n = hidden_ * hidden_;
  return std::span<double>(values_).subspan(
      recurrent_offset() + static_cast<std::size_t>(g) * n, n);
}
std::span<const double> LstmParams::recurrent_weights(Gate g) const noexcept {
  const auto n = hidden_ * hidden_;
  return std::span<const double>(values_).subspan(
      recurrent_offset() + static_cast<std::size_t>(g) * n, n);
}
std::span<const double> LstmParams::recurrent_weights_all() const noexcept {
  return std::span<const double>(values_).subspan(recurrent_offset(),
                                                  4 * hidden_ * hidden_);
}
std::span<double> LstmParams::bias(Gate g) noexcept {
  return std::span<double>(values_).subspan(
      bias_offset() + static_cast<std::size_t>(g) * hidden_, hidden_);
}
std::span<const double> LstmParams::bias(Gate g) const noexcept {
  return std::span<const double>(values_).subspan(
      bias_offset() + static_cast<std::size_t>(g) * hidden_, hidden_);
}
std::span<const double> LstmParams::bias_all() const noexcept {
  return std::span<const double>(values_).subspan(bias_offset(), 4 * hidden_);
}
std::span<double> LstmParams::dense_weights() noexcept {
  return std::span<double>(values_).subspan(dense_offset(), hidden_);
}
std::span<const double> LstmParams::dense_weights() const noexcept {
  return std::span<const double>(values_).subspan(dense_offset(), hidden_);
}

bool LstmParams::all_finite() const noexcept {
  for (double v : values_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

CellState cell_step(std::span<const double> x, std::span<const double> h,
                    std::span<const double> c, const LstmParams& p) {
  if (x.size() != p.input_size() || h.size() != p.hidden_size() ||
      c.size() != p.hidden_size()) {
    throw InputError("cell_step dimension mismatch: x=" + std::to_string(x.size()) +
                     " h=" + std::to_string(h.size()) + " c=" +
                     std::to_string(c.size()) + " for input=" +
                     std::to_string(p.input_size()) + " hidden=" +
                     std::to_string(p.hidden_size()));
  }
  const auto H = static_cast<Eigen::Index>(p.hidden_size());
  StepCache s;
  s.x = Eigen::Map<const Vec>(x.data(), static_cast<Eigen::Index>(x.size()));
  s.h_prev = Eigen::Map<const Vec>(h.data(), H);
  s.c_prev = Eigen::Map<const Vec>(c.data(), H);
  gate_step(p, s);
  CellState out;
  out.h.assign(s.h.data(), s.h.data() + H);
  out.c.assign(s.c.data(), s.c.data() + H);
  return out;
}

LstmParams init_params(std::size_t hidden, std::size_t input, std::size_t window,
                       std::uint64_t seed) {
  if (hidden == 0 || input == 0 || window == 0) {
    throw InputError("LSTM dimensions must be positive");
  }
  LstmParams p(input, hidden, window);
  Rng rng(seed, Stream::init);
  const double a_in = std::sqrt(6.0 / static_cast<double>(input + hidden));
  const double a_rec = std::sqrt(6.0 / static_cast<double>(hidden + hidden));
  for (auto g : {Gate::input, Gate::forget, Gate::cell, Gate::output}) {
    for (double& w : p.input_weights(g)) w = rng.uniform(-a_in, a_in);
  }
  for (auto g : {Gate::input, Gate::forget, Gate::cell, Gate::output}) {
    for (double& w : p.recurrent_weights(g)) w = rng.uniform(-a_rec, a_rec);
  }
  for (double& b : p.bias(Gate::forget)) b = 1.0;
  const double a_dense = std::sqrt(6.0 / static_cast<double>(hidden + 1));
  for (double& w : p.dense_weights()) w = rng.uniform(-a_dense, a_dense);
  return p;
}

std::vector<double> forward_batch(std::span<const double> inputs,
                                  const LstmParams& params) {
  std::size_t batch = 0;
  check_window_inputs(inputs, params, batch);
  const Mat h = unroll(inputs, batch, params, nullptr);
  const auto dw = params.dense_weights();
  const Eigen::Map<const Vec> w(dw.data(), static_cast<Eigen::Index>(dw.size()));
  const Vec y = (h.transpose() * w).array() + params.dense_bias();
  return {y.data(), y.data() + y.size()};
}

double forward_normalized(std::span<const double> window, const LstmParams& p) {
  if (window.size() != p.window() * p.input_size()) {
    throw InputError("window length " + std::to_string(window.size()) +
                     " does not match model window " +
                     std::to_string(p.window() * p.input_size()));
  }
  const double y = forward_batch(window, p).front();
  if (!std::isfinite(y)) throw NumericalError("non-finite model output");
  return y;
}

double forward(std::span<const double> normalized_window, const ModelWeights& w) {
  return w.norm.denormalize(forward_normalized(normalized_window, w.params));
}

double predict_celsius(std::span<const double> celsius_window,
                       const ModelWeights& w) {
  std::vector<double> z(celsius_window.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (!std::isfinite(celsius_window[i])) {
      throw NumericalError("non-finite value in prediction window");
    }
    z[i] = w.norm.normalize(celsius_window[i]);
  }
  return forward(z, w);
}

double persistence_predict(std::span<const double> window) {
  if (window.empty()) throw InputError("persistence prediction needs a nonempty window");
  return window.back();
}

LossAndGrads loss_and_grads(std::span<const double> inputs,
                            std::span<const double> targets,
                            const LstmParams& params,
                            std::span<const double> dropout_mask) {
  std::size_t batch = 0;
  check_window_inputs(inputs, params, batch);
  if (targets.size() != batch) {
    throw InputError("batch has " + std::to_string(batch) + " windows but " +
                     std::to_string(targets.size()) + " targets");
  }
  const auto H = static_cast<Eigen::Index>(params.hidden_size());
  const auto B = static_cast<Eigen::Index>(batch);
  if (!dropout_mask.empty() &&
      dropout_mask.size() != batch * params.hidden_size()) {
    throw InputError("dropout mask size does not match batch * hidden");
  }

  std::vector<StepCache> caches;
  const Mat h_last = unroll(inputs, batch, params, &caches);
  const Mat h_out = dropout_mask.empty()
                        ? h_last
                        : Mat(h_last.array() *
                              Eigen::Map<const Mat>(dropout_mask.data(), H, B).array());

  const auto dw_span = params.dense_weights();
  const Eigen::Map<const Vec> dense_w(dw_span.data(), H);
  const Eigen::Map<const Vec> y_true(targets.data(), B);
  const Vec diff = (h_out.transpose() * dense_w).array() + params.dense_bias() -
                   y_true.array();
  const double mse = diff.squaredNorm() / static_cast<double>(B);
  if (!std::isfinite(mse)) throw NumericalError("non-finite training loss");

  LossAndGrads out{mse, LstmParams(params.input_size(), params.hidden_size(),
                                   params.window())};
  LstmParams& g = out.grads;
  const Vec dy = diff * (2.0 / static_cast<double>(B));

  const auto gdw = g.dense_weights();
  Eigen::Map<Vec>(gdw.data(), H).noalias() = h_out * dy;
  g.dense_bias() = dy.sum();

  Mat dh = dense_w * dy.transpose();  // H x B
  if (!dropout_mask.empty()) {
    dh.array() *= Eigen::Map<const Mat>(dropout_mask.data(), H, B).array();
  }
  Mat dc = Mat::Zero(H, B);

  const auto I = static_cast<Eigen::Index>(params.input_size());
  const auto values = g.values();
  RowMap dW(values.data(), 4 * H, I);
  RowMap dU(values.data() + 4 * H * I, 4 * H, H);
  Eigen::Map<Vec> db(values.data() + 4 * H * I + 4 * H * H, 4 * H);
  const ConstRowMap U(params.recurrent_weights_all().data(), 4 * H, H);

  Mat dz(4 * H, B);
  for (auto t = caches.size(); t-- > 0;) {
    const StepCache& s = caches[t];
    const auto i = s.gates.topRows(H).array();
    const auto f = s.gates.middleRows(H, H).array();
    const auto gg = s.gates.middleRows(2 * H, H).array();
    const auto o = s.gates.bottomRows(H).array();
    const auto tc = s.tanh_c.array();

    dc.array() += dh.array() * o * (1.0 - tc * tc);
    dz.topRows(H).array() = dc.array() * gg * i * (1.0 - i);
    dz.middleRows(H, H).array() = dc.array() * s.c_prev.array() * f * (1.0 - f);
    dz.middleRows(2 * H, H).array() = dc.array() * i * (1.0 - gg * gg);
    dz.bottomRows(H).array() = dh.array() * tc * o * (1.0 - o);

    dW.noalias() += dz * s.x.transpose();
    dU.noalias() += dz * s.h_prev.transpose();
    db += dz.rowwise().sum();

    dh.noalias() = U.transpose() * dz;
    dc.array() *= f;
  }
  return out;
}

void adam_step(std::span<double> params, std::span<const double> grads,
               AdamState& state, std::uint64_t t, double lr,
               const AdamConfig& cfg) {
  if (t == 0) throw InputError("Adam step index starts at 1");
  if (params.size() != grads.size() || state.m.size() != params.size() ||
      state.v.size() != params.size()) {
    throw InputError("Adam shape mismatch");
  }
  const double t_d = static_cast<double>(t);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t_d);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t_d);
  for (std::size_t j = 0; j < params.size(); ++j) {
    const double g = grads[j];
    state.m[j] = cfg.beta1 * state.m[j] + (1.0 - cfg.beta1) * g;
    state.v[j] = cfg.beta2 * state.v[j] + (1.0 - cfg.beta2) * g * g;
    const double m_hat = state.m[j] / bc1;
    const double v_hat = state.v[j] / bc2;
    params[j] -= lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
  }
}

}  // namespace predfilter
