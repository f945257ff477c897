#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "predfilter/ingest.hpp"

namespace predfilter {

/// Gate blocks in storage order.
enum class Gate : std::size_t { input = 0, forget = 1, cell = 2, output = 3 };

/// Parameters of a single LSTM layer followed by a linear dense head.
///
/// All values live in one contiguous buffer so optimizers and gradient
/// checks can treat the model as a flat vector. Layout:
///   input weights      [4][hidden][input]   (gate order i, f, g, o)
///   recurrent weights  [4][hidden][hidden]
///   biases             [4][hidden]
///   dense weights      [hidden]
///   dense bias         [1]
class LstmParams {
 public:
  LstmParams() = default;
  /// Zero-initialized parameters of the given shape.
  LstmParams(std::size_t input_size, std::size_t hidden_size, std::size_t window);

  static std::size_t count_for(std::size_t input_size, std::size_t hidden_size);

  std::size_t input_size() const noexcept { return input_; }
  std::size_t hidden_size() const noexcept { return hidden_; }
  std::size_t window() const noexcept { return window_; }
  std::size_t parameter_count() const noexcept { return values_.size(); }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }

  /// hidden x input, row-major.
  std::span<double> input_weights(Gate g) noexcept;
  std::span<const double> input_weights(Gate g) const noexcept;
  /// All four input blocks stacked: (4 hidden) x input, row-major.
  std::span<const double> input_weights_all() const noexcept;
  /// hidden x hidden, row-major.
  std::span<double> recurrent_weights(Gate g) noexcept;
  std::span<const double> recurrent_weights(Gate g) const noexcept;
  std::span<const double> recurrent_weights_all() const noexcept;
  std::span<double> bias(Gate g) noexcept;
  std::span<const double> bias(Gate g) const noexcept;
  std::span<const double> bias_all() const noexcept;
  std::span<double> dense_weights() noexcept;
  std::span<const double> dense_weights() const noexcept;
  double& dense_bias() noexcept { return values_.back(); }
  double dense_bias() const noexcept { return values_.back(); }

  bool same_shape(const LstmParams& other) const noexcept {
    return input_ == other.input_ && hidden_ == other.hidden_ &&
           window_ == other.window_;
  }
  bool all_finite() const noexcept;

  friend bool operator==(const LstmParams&, const LstmParams&) = default;

 private:
  std::size_t input_offset() const noexcept { return 0; }
  std::size_t recurrent_offset() const noexcept { return 4 * hidden_ * input_; }
  std::size_t bias_offset() const noexcept {
    return recurrent_offset() + 4 * hidden_ * hidden_;
  }
  std::size_t dense_offset() const noexcept { return bias_offset() + 4 * hidden_; }

  std::size_t input_ = 0;
  std::size_t hidden_ = 0;
  std::size_t window_ = 0;
  std::vector<double> values_;
};

struct CellState {
  std::vector<double> h;
  std::vector<double> c;
};

/// One LSTM step:
///   i = σ(W_i x + U_i h + b_i), f = σ(W_f x + U_f h + b_f),
///   g = tanh(W_g x + U_g h + b_g), o = σ(W_o x + U_o h + b_o),
///   c' = f ⊙ c + i ⊙ g, h' = o ⊙ tanh(c').
CellState cell_step(std::span<const double> x, std::span<const double> h,
                    std::span<const double> c, const LstmParams& p);

/// Glorot-uniform weights per gate block, zero biases except the forget
/// gate (1.0), Glorot-uniform dense weights, zero dense bias.
LstmParams init_params(std::size_t hidden, std::size_t input, std::size_t window,
                       std::uint64_t seed);

struct ModelMetadata {
  std::string source_id = "unknown";
  SourceKind kind = SourceKind::in_situ;
  std::uint64_t seed = 0;

  friend bool operator==(const ModelMetadata&, const ModelMetadata&) = default;
};

/// Self-contained deployable model: parameters plus the normalization they
/// were trained under.
struct ModelWeights {
  LstmParams params;
  NormStats norm;
  ModelMetadata metadata;

  friend bool operator==(const ModelWeights&, const ModelWeights&) = default;
};

/// Network output for a normalized window (window * input values), in
/// normalized units. Unrolls from zero state; no dropout.
double forward_normalized(std::span<const double> window, const LstmParams& p);

/// One-step-ahead forecast in °C from a normalized window.
double forward(std::span<const double> normalized_window, const ModelWeights& w);

/// One-step-ahead forecast in °C from a window of raw °C readings.
double predict_celsius(std::span<const double> celsius_window,
                       const ModelWeights& w);

/// Last element of the window.
double persistence_predict(std::span<const double> window);

struct LossAndGrads {
  double mse = 0.0;
  LstmParams grads;
};

/// Mean squared error over a batch and its gradient by full backpropagation
/// through time. `inputs` holds batch * window * input values, `targets`
/// one value per example. `dropout_mask` is either empty (no dropout) or
/// batch * hidden multipliers applied to the final hidden state.
LossAndGrads loss_and_grads(std::span<const double> inputs,
                            std::span<const double> targets,
                            const LstmParams& params,
                            std::span<const double> dropout_mask = {});

/// Batched network outputs (normalized units), no dropout.
std::vector<double> forward_batch(std::span<const double> inputs,
                                  const LstmParams& params);

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;

  explicit AdamState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam update for step t >= 1.
void adam_step(std::span<double> params, std::span<const double> grads,
               AdamState& state, std::uint64_t t, double lr,
               const AdamConfig& cfg = {});

}  // namespace predfilter
