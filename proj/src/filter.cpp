#include "predfilter/filter.hpp"

#include <cmath>

#include "predfilter/error.hpp"
#include "predfilter/text.hpp"

namespace predfilter {

std::string_view to_string(BufferPolicy p) {
  return p == BufferPolicy::sliding ? "sliding" : "reset_on_transmit";
}
std::string_view to_string(SyncMode m) {
  return m == SyncMode::paper_faithful ? "paper_faithful" : "synchronized";
}
std::string_view to_string(PadPolicy) { return "replicate_oldest"; }
std::string_view to_string(Decision d) {
  return d == Decision::transmit ? "transmit" : "suppress";
}

BufferPolicy parse_buffer_policy(std::string_view s) {
  if (s == "reset_on_transmit") return BufferPolicy::reset_on_transmit;
  if (s == "sliding") return BufferPolicy::sliding;
  throw InputError("unknown buffer policy '" + std::string(s) +
                   "' (expected reset_on_transmit or sliding)");
}

SyncMode parse_sync_mode(std::string_view s) {
  if (s == "synchronized") return SyncMode::synchronized;
  if (s == "paper_faithful") return SyncMode::paper_faithful;
  throw InputError("unknown sync mode '" + std::string(s) +
                   "' (expected synchronized or paper_faithful)");
}

PadPolicy parse_pad_policy(std::string_view s) {
  if (s == "replicate_oldest") return PadPolicy::replicate_oldest;
  throw InputError("unknown pad policy '" + std::string(s) + "'");
}

void FilterConfig::validate() const {
  if (!(epsilon > 0.0) || std::isnan(epsilon)) {
    throw InputError("epsilon must be > 0, got " + text::format_double(epsilon));
  }
  if (k == 0) throw InputError("buffer size k must be at least 1");
}

void TransmissionLog::append(const StepOutcome& s) {
  steps.push_back(s);
  if (s.decision == Decision::transmit) {
    ++transmitted;
  } else {
    ++suppressed;
  }
}

std::vector<double> pad_buffer(std::span<const double> buffer, std::size_t k,
                               PadPolicy) {
  if (buffer.empty()) throw InputError("cannot pad an empty buffer");
  if (buffer.size() >= k) {
    return {buffer.end() - static_cast<std::ptrdiff_t>(k), buffer.end()};
  }
  std::vector<double> out(k - buffer.size(), buffer.front());
  out.insert(out.end(), buffer.begin(), buffer.end());
  return out;
}

void check_compatible(const Predictor& model, const FilterConfig& cfg) {
  cfg.validate();
  if (model.window() != cfg.k) {
    throw InputError("model window " + std::to_string(model.window()) +
                     " does not match buffer size k=" + std::to_string(cfg.k));
  }
}

namespace {

void push_trimmed(std::vector<double>& buffer, double v, std::size_t k) {
  buffer.push_back(v);
  if (buffer.size() > k) {
    buffer.erase(buffer.begin(),
                 buffer.begin() + static_cast<std::ptrdiff_t>(buffer.size() - k));
  }
}

void on_transmit(FilterState& s, double v, const FilterConfig& cfg) {
  if (cfg.buffer_policy == BufferPolicy::reset_on_transmit) {
    s.buffer.assign(1, v);
  } else {
    push_trimmed(s.buffer, v, cfg.k);
  }
}

// Session start and resume after a gap: the buffer restarts from the
// transmitted value under every policy.
void on_forced_transmit(FilterState& s, double v) {
  s.buffer.assign(1, v);
  s.transmit_flag = false;
}

}  // namespace

StepOutcome edge_step(FilterState& state, const Measurement& x,
                      const Predictor& model, const FilterConfig& cfg) {
  if (!std::isfinite(x.value)) {
    throw InputError("non-finite measurement at " + text::format_iso8601(x.timestamp));
  }
  StepOutcome out;
  out.timestamp = x.timestamp;
  out.actual = x.value;
  if (state.transmit_flag) {
    out.decision = Decision::transmit;
    on_forced_transmit(state, x.value);
    return out;
  }
  const double predicted = model.predict(pad_buffer(state.buffer, cfg.k, cfg.pad_policy));
  const double err = std::fabs(x.value - predicted);
  out.predicted = predicted;
  out.abs_error = err;
  if (err > cfg.epsilon) {
    out.decision = Decision::transmit;
    on_transmit(state, x.value, cfg);
  } else {
    out.decision = Decision::suppress;
    push_trimmed(state.buffer,
                 cfg.sync_mode == SyncMode::synchronized ? predicted : x.value, cfg.k);
  }
  return out;
}

ReconstructedPoint cloud_step(FilterState& mirror, Timestamp t,
                              std::optional<double> received,
                              const Predictor& model, const FilterConfig& cfg) {
  if (mirror.transmit_flag) {
    if (!received) {
      throw SyncError("cloud expected a forced transmission at " +
                      text::format_iso8601(t) + " but received nothing");
    }
    on_forced_transmit(mirror, *received);
    return {t, *received, false};
  }
  if (received) {
    on_transmit(mirror, *received, cfg);
    return {t, *received, false};
  }
  const double predicted = model.predict(pad_buffer(mirror.buffer, cfg.k, cfg.pad_policy));
  push_trimmed(mirror.buffer, predicted, cfg.k);
  return {t, predicted, true};
}

SessionResult run_session(const SeriesFrame& series, const Predictor& model,
                          const FilterConfig& cfg) {
  if (series.empty()) throw InputError("cannot run a session on an empty series");
  check_compatible(model, cfg);
  SessionResult result;
  result.log.steps.reserve(series.size());
  result.reconstruction.points.reserve(series.size());

  FilterState edge;
  FilterState mirror;
  const auto& m = series.measurements;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (i > 0 && m[i].timestamp - m[i - 1].timestamp != series.resolution) {
      edge.transmit_flag = true;
      mirror.transmit_flag = true;
    }
    const StepOutcome out = edge_step(edge, m[i], model, cfg);
    result.log.append(out);
    const std::optional<double> sent =
        out.decision == Decision::transmit ? std::optional<double>(out.actual) : std::nullopt;
    result.reconstruction.points.push_back(cloud_step(mirror, m[i].timestamp, sent, model, cfg));
    if (cfg.sync_mode == SyncMode::synchronized && edge != mirror) {
      throw SyncError("edge buffer and cloud mirror diverged at " +
                      text::format_iso8601(m[i].timestamp));
    }
  }
  return result;
}

std::string log_to_csv(const TransmissionLog& log) {
  std::string out = "index,timestamp,actual,predicted,abs_error,decision\n";
  for (std::size_t i = 0; i < log.steps.size(); ++i) {
    const auto& s = log.steps[i];
    out += std::to_string(i);
    out += ',';
    out += text::format_iso8601(s.timestamp);
    out += ',';
    out += text::format_double(s.actual);
    out += ',';
    if (s.predicted) out += text::format_double(*s.predicted);
    out += ',';
    if (s.abs_error) out += text::format_double(*s.abs_error);
    out += ',';
    out += to_string(s.decision);
    out += '\n';
  }
  return out;
}

std::string reconstruction_to_csv(const ReconstructedSeries& r) {
  std::string out = "timestamp,value,is_prediction\n";
  for (const auto& p : r.points) {
    out += text::format_iso8601(p.timestamp);
    out += ',';
    out += text::format_double(p.value);
    out += p.is_prediction ? ",1\n" : ",0\n";
  }
  return out;
}

}  // namespace predfilter
