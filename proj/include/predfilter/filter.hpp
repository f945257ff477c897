#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "predfilter/ingest.hpp"
#include "predfilter/lstm.hpp"

namespace predfilter {

/// What the edge does with its buffer after each decision.
enum class BufferPolicy {
  /// B <- [x] on transmit, append on suppress (the published algorithm).
  reset_on_transmit,
  /// Always append and keep the last k values.
  sliding,
};

/// What the edge appends on suppression.
enum class SyncMode {
  /// The edge's own prediction, which the cloud can reproduce exactly.
  synchronized,
  /// The actual reading, which the cloud never sees.
  paper_faithful,
};

enum class PadPolicy { replicate_oldest };

std::string_view to_string(BufferPolicy p);
std::string_view to_string(SyncMode m);
std::string_view to_string(PadPolicy p);
BufferPolicy parse_buffer_policy(std::string_view s);
SyncMode parse_sync_mode(std::string_view s);
PadPolicy parse_pad_policy(std::string_view s);

struct FilterConfig {
  double epsilon = 0.5;  // °C
  std::size_t k = 24;
  BufferPolicy buffer_policy = BufferPolicy::reset_on_transmit;
  SyncMode sync_mode = SyncMode::synchronized;
  PadPolicy pad_policy = PadPolicy::replicate_oldest;

  void validate() const;

  friend bool operator==(const FilterConfig&, const FilterConfig&) = default;
};

/// One-step-ahead forecaster over a window of °C values. Implementations
/// must be pure: equal windows give bit-identical outputs.
class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual std::size_t window() const = 0;
  virtual double predict(std::span<const double> window) const = 0;
};

class LstmPredictor final : public Predictor {
 public:
  explicit LstmPredictor(ModelWeights weights) : weights_(std::move(weights)) {}
  std::size_t window() const override { return weights_.params.window(); }
  double predict(std::span<const double> window) const override {
    return predict_celsius(window, weights_);
  }
  const ModelWeights& weights() const noexcept { return weights_; }

 private:
  ModelWeights weights_;
};

class PersistencePredictor final : public Predictor {
 public:
  explicit PersistencePredictor(std::size_t k) : k_(k) {}
  std::size_t window() const override { return k_; }
  double predict(std::span<const double> window) const override {
    return persistence_predict(window);
  }

 private:
  std::size_t k_;
};

struct FilterState {
  std::vector<double> buffer;
  bool transmit_flag = true;

  friend bool operator==(const FilterState&, const FilterState&) = default;
};

enum class Decision { transmit, suppress };
std::string_view to_string(Decision d);

struct StepOutcome {
  Timestamp timestamp = 0;
  Decision decision = Decision::transmit;
  double actual = 0.0;
  /// Absent on flag-forced transmissions.
  std::optional<double> predicted;
  std::optional<double> abs_error;

  friend bool operator==(const StepOutcome&, const StepOutcome&) = default;
};

struct TransmissionLog {
  std::vector<StepOutcome> steps;
  std::size_t transmitted = 0;
  std::size_t suppressed = 0;

  std::size_t total() const noexcept { return steps.size(); }
  void append(const StepOutcome& s);
};

struct ReconstructedPoint {
  Timestamp timestamp = 0;
  double value = 0.0;
  bool is_prediction = false;

  friend bool operator==(const ReconstructedPoint&, const ReconstructedPoint&) = default;
};

struct ReconstructedSeries {
  std::vector<ReconstructedPoint> points;
};

/// Length-k model input from a buffer: the last k values, left-padded by
/// repeating the oldest value when shorter.
std::vector<double> pad_buffer(std::span<const double> buffer, std::size_t k,
                               PadPolicy policy = PadPolicy::replicate_oldest);

/// Throws InputError when the predictor window differs from cfg.k.
void check_compatible(const Predictor& model, const FilterConfig& cfg);

/// Edge decision for one reading; updates `state` in place.
StepOutcome edge_step(FilterState& state, const Measurement& x,
                      const Predictor& model, const FilterConfig& cfg);

/// Cloud reconstruction for one step. `received` holds the transmitted value
/// when the edge sent one. The mirror is updated exactly as the edge updates
/// its buffer in synchronized mode.
ReconstructedPoint cloud_step(FilterState& mirror, Timestamp t,
                              std::optional<double> received,
                              const Predictor& model, const FilterConfig& cfg);

struct SessionResult {
  TransmissionLog log;
  ReconstructedSeries reconstruction;
};

/// Runs edge and cloud in lockstep over a series. A gap in the series
/// forces a transmission on resume. In synchronized mode the edge buffer
/// and cloud mirror are compared after every step; divergence raises
/// SyncError.
SessionResult run_session(const SeriesFrame& series, const Predictor& model,
                          const FilterConfig& cfg);

/// CSV columns: index,timestamp,actual,predicted,abs_error,decision.
std::string log_to_csv(const TransmissionLog& log);
/// CSV columns: timestamp,value,is_prediction.
std::string reconstruction_to_csv(const ReconstructedSeries& r);

}  // namespace predfilter
