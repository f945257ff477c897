#include "predfilter/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "predfilter/rng.hpp"
#include "predfilter/text.hpp"

namespace predfilter {

void TrainConfig::validate() const {
  const auto fail = [](const std::string& what) {
    throw InputError("invalid training config: " + what);
  };
  if (hidden == 0) fail("hidden must be positive");
  if (!(lr > 0.0) || !std::isfinite(lr)) fail("lr must be positive");
  if (batch_size == 0) fail("batch_size must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) {
    fail("dropout must satisfy 0 <= dropout < 1, got " + text::format_double(dropout));
  }
  if (!(decay_factor > 0.0 && decay_factor < 1.0)) {
    fail("decay_factor must lie in (0, 1)");
  }
  if (!(min_lr > 0.0)) fail("min_lr must be positive");
  if (patience_stop == 0) fail("patience_stop must be positive");
  if (patience_decay == 0) fail("patience_decay must be positive");
  if (!(val_frac > 0.0 && val_frac < 1.0)) fail("val_frac must lie in (0, 1)");
}

PlateauSchedule::PlateauSchedule(double lr, std::size_t patience_stop,
                                 std::size_t patience_decay, double decay_factor,
                                 double min_lr)
    : lr_(lr),
      patience_stop_(patience_stop),
      patience_decay_(patience_decay),
      decay_factor_(decay_factor),
      min_lr_(min_lr),
      best_(std::numeric_limits<double>::infinity()) {}

PlateauSchedule::Decision PlateauSchedule::observe(double val_loss) {
  Decision d;
  ++epoch_;
  if (val_loss < best_) {
    best_ = val_loss;
    best_epoch_ = epoch_;
    since_best_ = 0;
    since_decay_ = 0;
    d.improved = true;
    return d;
  }
  ++since_best_;
  ++since_decay_;
  if (since_decay_ >= patience_decay_) {
    const double next = std::max(lr_ * decay_factor_, min_lr_);
    d.decayed = next < lr_;
    lr_ = next;
    since_decay_ = 0;
  }
  d.stop = since_best_ >= patience_stop_;
  return d;
}

double evaluate_mse(const WindowSet& set, const LstmParams& params) {
  if (set.empty()) throw InputError("cannot evaluate on an empty window set");
  constexpr std::size_t kChunk = 512;
  double sum = 0.0;
  for (std::size_t first = 0; first < set.size(); first += kChunk) {
    const std::size_t n = std::min(kChunk, set.size() - first);
    const std::span<const double> in(set.inputs.data() + first * set.k, n * set.k);
    const auto y = forward_batch(in, params);
    for (std::size_t j = 0; j < n; ++j) {
      const double d = y[j] - set.targets[first + j];
      sum += d * d;
    }
  }
  return sum / static_cast<double>(set.size());
}

std::pair<ModelWeights, TrainReport> train(const WindowSet& train_set,
                                           const WindowSet& val_set,
                                           const TrainConfig& cfg,
                                           const ModelMetadata& metadata,
                                           const EpochCallback& on_epoch) {
  cfg.validate();
  if (cfg.max_epochs == 0) throw InputError("empty training: max_epochs is 0");
  if (train_set.empty() || val_set.empty()) {
    throw InputError("training and validation sets must be nonempty");
  }
  if (train_set.k != val_set.k) {
    throw InputError("training and validation window lengths differ");
  }
  const std::size_t k = train_set.k;
  const std::size_t H = cfg.hidden;

  LstmParams params = init_params(H, 1, k, cfg.seed);
  LstmParams best_params = params;
  AdamState adam(params.parameter_count());
  PlateauSchedule schedule(cfg.lr, cfg.patience_stop, cfg.patience_decay,
                           cfg.decay_factor, cfg.min_lr);

  TrainReport report;
  report.initial_val_mse = evaluate_mse(val_set, params);
  report.best_val_mse = report.initial_val_mse;

  const std::size_t n = train_set.size();
  std::vector<std::size_t> order(n);
  std::vector<double> batch_in;
  std::vector<double> batch_y;
  std::vector<double> mask;
  const double keep = 1.0 - cfg.dropout;
  std::uint64_t step = 0;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const double lr = schedule.lr();
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(cfg.seed, Stream::shuffle, epoch);
    for (std::size_t i = n; i > 1; --i) {
      std::swap(order[i - 1], order[shuffle_rng.below(i)]);
    }
    Rng dropout_rng(cfg.seed, Stream::dropout, epoch);

    double loss_sum = 0.0;
    for (std::size_t first = 0; first < n; first += cfg.batch_size) {
      const std::size_t b = std::min(cfg.batch_size, n - first);
      batch_in.resize(b * k);
      batch_y.resize(b);
      for (std::size_t j = 0; j < b; ++j) {
        const std::size_t idx = order[first + j];
        const auto w = train_set.input(idx);
        std::copy(w.begin(), w.end(), batch_in.begin() + static_cast<std::ptrdiff_t>(j * k));
        batch_y[j] = train_set.targets[idx];
      }
      mask.clear();
      if (cfg.dropout > 0.0) {
        mask.resize(b * H);
        for (double& m : mask) m = dropout_rng.uniform() < keep ? 1.0 / keep : 0.0;
      }
      LossAndGrads lg;
      try {
        lg = loss_and_grads(batch_in, batch_y, params, mask);
      } catch (const NumericalError&) {
        report.stopped_epoch = epoch;
        report.final_lr = lr;
        throw DivergenceError("training diverged in epoch " + std::to_string(epoch),
                              report);
      }
      loss_sum += lg.mse * static_cast<double>(b);
      adam_step(params.values(), lg.grads.values(), adam, ++step, lr);
    }

    EpochRecord rec{epoch, loss_sum / static_cast<double>(n),
                    evaluate_mse(val_set, params), lr};
    if (!std::isfinite(rec.val_mse) || !params.all_finite()) {
      report.stopped_epoch = epoch;
      report.final_lr = lr;
      throw DivergenceError("validation loss diverged in epoch " + std::to_string(epoch),
                            report);
    }
    report.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);

    const auto decision = schedule.observe(rec.val_mse);
    if (decision.improved) best_params = params;
    report.stopped_epoch = epoch;
    if (decision.stop) {
      report.early_stopped = true;
      break;
    }
  }
  report.best_epoch = schedule.best_epoch();
  report.best_val_mse = schedule.best();
  report.final_lr = schedule.lr();

  ModelWeights weights{std::move(best_params), train_set.norm, metadata};
  weights.metadata.seed = cfg.seed;
  return {std::move(weights), std::move(report)};
}

}  // namespace predfilter
