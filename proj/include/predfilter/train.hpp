#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "predfilter/error.hpp"
#include "predfilter/ingest.hpp"
#include "predfilter/lstm.hpp"

namespace predfilter {

struct TrainConfig {
  std::size_t hidden = 64;
  double lr = 0.001;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 100;
  double dropout = 0.2;
  std::size_t patience_stop = 10;
  std::size_t patience_decay = 5;
  double decay_factor = 0.5;
  double min_lr = 1e-5;
  std::uint64_t seed = 0;
  /// Chronological tail of the training windows held out for validation.
  double val_frac = 0.1;

  /// Throws InputError naming the first violated constraint.
  void validate() const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_mse = 0.0;
  double val_mse = 0.0;
  double lr = 0.0;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainReport {
  double initial_val_mse = 0.0;
  std::vector<EpochRecord> epochs;
  std::size_t stopped_epoch = 0;
  std::size_t best_epoch = 0;
  double best_val_mse = 0.0;
  double final_lr = 0.0;
  bool early_stopped = false;

  friend bool operator==(const TrainReport&, const TrainReport&) = default;
};

/// Early stopping and learning-rate decay driven by validation loss.
/// Improvement means strictly lower than the best loss seen so far.
class PlateauSchedule {
 public:
  struct Decision {
    bool improved = false;
    bool decayed = false;
    bool stop = false;
  };

  PlateauSchedule(double lr, std::size_t patience_stop, std::size_t patience_decay,
                  double decay_factor, double min_lr);

  Decision observe(double val_loss);

  double lr() const noexcept { return lr_; }
  double best() const noexcept { return best_; }
  std::size_t best_epoch() const noexcept { return best_epoch_; }

 private:
  double lr_;
  std::size_t patience_stop_;
  std::size_t patience_decay_;
  double decay_factor_;
  double min_lr_;
  double best_;
  std::size_t best_epoch_ = 0;
  std::size_t epoch_ = 0;
  std::size_t since_best_ = 0;
  std::size_t since_decay_ = 0;
};

/// Thrown when the loss becomes non-finite; carries the epochs completed.
class DivergenceError : public NumericalError {
 public:
  DivergenceError(const std::string& what, TrainReport report)
      : NumericalError(what), report_(std::move(report)) {}
  const TrainReport& report() const noexcept { return report_; }

 private:
  TrainReport report_;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Mean squared error of the network on a window set, no dropout.
double evaluate_mse(const WindowSet& set, const LstmParams& params);

/// Mini-batch Adam training with per-epoch shuffling, inverted dropout on
/// the final hidden state, learning-rate decay and early stopping. Returns
/// the weights of the best validation epoch. Deterministic in cfg.seed.
std::pair<ModelWeights, TrainReport> train(const WindowSet& train_set,
                                           const WindowSet& val_set,
                                           const TrainConfig& cfg,
                                           const ModelMetadata& metadata = {},
                                           const EpochCallback& on_epoch = {});

}  // namespace predfilter
