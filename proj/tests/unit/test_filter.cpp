#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "../support/oracles.hpp"
#include "predfilter/error.hpp"
#include "predfilter/filter.hpp"

using namespace predfilter;

namespace {

SeriesFrame hourly(const std::vector<double>& values, Timestamp t0 = 1700000000 - 1700000000 % 3600) {
  std::vector<Measurement> ms;
  for (std::size_t i = 0; i < values.size(); ++i) {
    ms.push_back({t0 + static_cast<Timestamp>(i) * 3600, values[i]});
  }
  return make_frame("test", SourceKind::in_situ, 3600, std::move(ms));
}

FilterConfig config(double eps, std::size_t k, BufferPolicy p, SyncMode s) {
  FilterConfig c;
  c.epsilon = eps;
  c.k = k;
  c.buffer_policy = p;
  c.sync_mode = s;
  return c;
}

}  // namespace

TEST_CASE("pad_buffer") {
  CHECK(pad_buffer(std::vector<double>{5}, 3) == std::vector<double>{5, 5, 5});
  CHECK(pad_buffer(std::vector<double>{1, 2, 3, 4}, 3) == std::vector<double>{2, 3, 4});
  CHECK(pad_buffer(std::vector<double>{7, 9}, 4) == std::vector<double>{7, 7, 7, 9});
  CHECK(pad_buffer(std::vector<double>{1, 2, 3}, 3) == std::vector<double>{1, 2, 3});
  CHECK_THROWS_AS(pad_buffer(std::vector<double>{}, 3), InputError);
}

TEST_CASE("config parsing and validation") {
  CHECK(parse_buffer_policy("sliding") == BufferPolicy::sliding);
  CHECK(parse_sync_mode("paper_faithful") == SyncMode::paper_faithful);
  CHECK_THROWS_AS(parse_buffer_policy("ring"), InputError);
  FilterConfig c;
  c.epsilon = 0.0;
  CHECK_THROWS_AS(c.validate(), InputError);
  c.epsilon = std::numeric_limits<double>::infinity();
  CHECK_NOTHROW(c.validate());
  c.k = 0;
  CHECK_THROWS_AS(c.validate(), InputError);
}

TEST_CASE("edge_step: first sample is transmitted without a prediction") {
  FilterState s;
  const PersistencePredictor m(3);
  const auto out = edge_step(s, {0, 10.0}, m, FilterConfig{});
  CHECK(out.decision == Decision::transmit);
  CHECK_FALSE(out.predicted.has_value());
  CHECK(s.buffer == std::vector<double>{10.0});
  CHECK_FALSE(s.transmit_flag);
}

TEST_CASE("edge_step: hand trace [10.0, 10.2, 11.5]") {
  const PersistencePredictor m(2);
  const auto cfg = config(0.5, 2, BufferPolicy::reset_on_transmit, SyncMode::paper_faithful);
  FilterState s;
  const auto a = edge_step(s, {0, 10.0}, m, cfg);
  const auto b = edge_step(s, {3600, 10.2}, m, cfg);
  const auto c = edge_step(s, {7200, 11.5}, m, cfg);
  CHECK(a.decision == Decision::transmit);
  CHECK(b.decision == Decision::suppress);
  CHECK(c.decision == Decision::transmit);
  CHECK(*b.predicted == 10.0);
  CHECK(*b.abs_error == doctest::Approx(0.2));
  CHECK(*c.predicted == 10.2);
  CHECK(*c.abs_error == doctest::Approx(1.3));
  CHECK(s.buffer == std::vector<double>{11.5});
}

TEST_CASE("edge_step: ties are suppressed") {
  const PersistencePredictor m(1);
  FilterState s;
  const auto cfg = config(0.5, 1, BufferPolicy::reset_on_transmit, SyncMode::synchronized);
  edge_step(s, {0, 1.0}, m, cfg);
  CHECK(edge_step(s, {1, 1.5}, m, cfg).decision == Decision::suppress);
  CHECK(edge_step(s, {2, 1.5}, m, cfg).decision == Decision::suppress);  // buffer still holds 1.0
  CHECK(edge_step(s, {3, 1.6}, m, cfg).decision == Decision::transmit);
}

TEST_CASE("edge_step: synchronized mode stores the prediction") {
  const PersistencePredictor m(3);
  FilterState s;
  const auto cfg = config(0.5, 3, BufferPolicy::reset_on_transmit, SyncMode::synchronized);
  edge_step(s, {0, 10.0}, m, cfg);
  edge_step(s, {1, 10.3}, m, cfg);
  CHECK(s.buffer == std::vector<double>{10.0, 10.0});
}

TEST_CASE("edge_step: non-finite reading") {
  FilterState s;
  const PersistencePredictor m(3);
  CHECK_THROWS_AS(edge_step(s, {0, std::nan("")}, m, FilterConfig{}), InputError);
}

TEST_CASE("cloud_step") {
  const PersistencePredictor m(2);
  SUBCASE("received values pass through exactly") {
    FilterState mirror;
    const auto cfg = config(0.5, 2, BufferPolicy::reset_on_transmit, SyncMode::synchronized);
    const auto p = cloud_step(mirror, 0, 12.345678901234567, m, cfg);
    CHECK(p.value == 12.345678901234567);
    CHECK_FALSE(p.is_prediction);
  }
  SUBCASE("paper_faithful: [10.0, 10.2] reconstructs as [10.0, 10.0]") {
    const auto cfg = config(0.5, 2, BufferPolicy::reset_on_transmit, SyncMode::paper_faithful);
    const auto r = run_session(hourly({10.0, 10.2}), m, cfg);
    REQUIRE(r.reconstruction.points.size() == 2);
    CHECK(r.reconstruction.points[0].value == 10.0);
    CHECK(r.reconstruction.points[1].value == 10.0);
    CHECK(r.reconstruction.points[1].is_prediction);
    CHECK(std::fabs(r.reconstruction.points[1].value - 10.2) == doctest::Approx(0.2));
  }
  SUBCASE("a fresh mirror must receive a value") {
    FilterState mirror;
    CHECK_THROWS_AS(cloud_step(mirror, 0, std::nullopt, m, FilterConfig{}), SyncError);
  }
}

TEST_CASE("run_session: constant series transmits once") {
  const PersistencePredictor m(24);
  const auto r = run_session(hourly(std::vector<double>(100, 17.25)), m, FilterConfig{});
  CHECK(r.log.total() == 100);
  CHECK(r.log.transmitted == 1);
  CHECK(r.log.suppressed == 99);
}

TEST_CASE("run_session: infinite threshold transmits once") {
  Rng rng(8, Stream::test);
  const auto series = oracle::random_series(rng, 300, 0.0, 2.0);
  auto cfg = FilterConfig{};
  cfg.k = 6;
  cfg.epsilon = std::numeric_limits<double>::infinity();
  const auto model = oracle::random_model(4, 6, 2);
  CHECK(run_session(series, LstmPredictor(model), cfg).log.transmitted == 1);
}

TEST_CASE("run_session: a gap forces a transmission on resume") {
  std::vector<Measurement> ms{{0, 5.0}, {3600, 5.0}, {4 * 3600, 5.0}, {5 * 3600, 5.0}};
  const auto f = make_frame("g", SourceKind::in_situ, 3600, ms);
  const auto r = run_session(f, PersistencePredictor(2), config(0.5, 2, BufferPolicy::sliding,
                                                               SyncMode::synchronized));
  CHECK(r.log.transmitted == 2);
  CHECK(r.log.steps[2].decision == Decision::transmit);
  CHECK_FALSE(r.log.steps[2].predicted.has_value());
}

TEST_CASE("run_session: errors") {
  CHECK_THROWS_AS(run_session(SeriesFrame{}, PersistencePredictor(24), FilterConfig{}),
                  InputError);
  const auto model = oracle::random_model(4, 6, 2);
  try {
    run_session(hourly({1, 2, 3}), LstmPredictor(model), FilterConfig{});
    FAIL("expected a window mismatch");
  } catch (const InputError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("6") != std::string::npos);
    CHECK(msg.find("24") != std::string::npos);
  }
}

TEST_CASE("run_session matches the direct transcription of the algorithm") {
  Rng rng(2024, Stream::test);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t k = 1 + rng.below(8);
    const auto series = oracle::random_series(rng, 1 + rng.below(200), 0.03, 0.8);
    const auto cfg = config(rng.uniform(0.05, 2.0), k,
                            trial % 2 ? BufferPolicy::sliding : BufferPolicy::reset_on_transmit,
                            trial % 3 ? SyncMode::synchronized : SyncMode::paper_faithful);
    const bool use_lstm = trial % 4 < 2;
    const auto weights = oracle::random_model(3, k, static_cast<std::uint64_t>(trial),
                                              series.measurements[0].value, 3.0);
    const LstmPredictor lstm(weights);
    const PersistencePredictor persistence(k);
    const Predictor& model = use_lstm ? static_cast<const Predictor&>(lstm) : persistence;

    const auto r = run_session(series, model, cfg);
    const auto expected = oracle::algorithm1(
        series.values(), oracle::gap_flags(series),
        [&](const std::vector<double>& w) { return model.predict(w); }, cfg.epsilon, k,
        cfg.buffer_policy == BufferPolicy::sliding, cfg.sync_mode == SyncMode::synchronized);
    for (std::size_t i = 0; i < series.size(); ++i) {
      CHECK((r.log.steps[i].decision == Decision::transmit) == expected.transmitted[i]);
      CHECK(r.log.steps[i].predicted == expected.predicted[i]);
      CHECK(r.reconstruction.points[i].value == expected.reconstructed[i]);
    }
  }
}

TEST_CASE("synchronized sessions keep the reconstruction within epsilon") {
  Rng rng(7, Stream::test);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t k = 1 + rng.below(8);
    const auto series = oracle::random_series(rng, 50 + rng.below(200), 0.02, 1.0);
    const auto cfg = config(rng.uniform(0.01, 5.0), k,
                            trial % 2 ? BufferPolicy::sliding : BufferPolicy::reset_on_transmit,
                            SyncMode::synchronized);
    const LstmPredictor model(oracle::random_model(4, k, 100 + static_cast<std::uint64_t>(trial),
                                                   series.measurements[0].value, 4.0));
    const auto r = run_session(series, model, cfg);
    for (std::size_t i = 0; i < series.size(); ++i) {
      const auto& step = r.log.steps[i];
      CHECK(std::fabs(r.reconstruction.points[i].value - step.actual) <= cfg.epsilon);
      if (step.decision == Decision::transmit) {
        CHECK(r.reconstruction.points[i].value == step.actual);
      } else {
        CHECK(*step.abs_error <= cfg.epsilon);
      }
    }
    CHECK(r.log.steps[0].decision == Decision::transmit);
  }
}

TEST_CASE("sliding, paper-faithful: transmissions shrink as epsilon grows") {
  Rng rng(31, Stream::test);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t k = 1 + rng.below(8);
    const auto series = oracle::random_series(rng, 200, 0.02, 0.7);
    const PersistencePredictor model(k);
    auto lo = config(0.5, k, BufferPolicy::sliding, SyncMode::paper_faithful);
    auto hi = lo;
    hi.epsilon = 1.0;
    const auto a = run_session(series, model, lo);
    const auto b = run_session(series, model, hi);
    for (std::size_t i = 0; i < series.size(); ++i) {
      if (b.log.steps[i].decision == Decision::transmit) {
        CHECK(a.log.steps[i].decision == Decision::transmit);
      }
    }
  }
}

TEST_CASE("CSV exports") {
  const PersistencePredictor m(2);
  const auto cfg = config(0.5, 2, BufferPolicy::reset_on_transmit, SyncMode::paper_faithful);
  const auto r = run_session(hourly({10.0, 10.2, 11.5}, 0), m, cfg);
  CHECK(log_to_csv(r.log) ==
        "index,timestamp,actual,predicted,abs_error,decision\n"
        "0,1970-01-01T00:00:00Z,10,,,transmit\n"
        "1,1970-01-01T01:00:00Z,10.2,10,0.1999999999999993,suppress\n"
        "2,1970-01-01T02:00:00Z,11.5,10.2,1.3000000000000007,transmit\n");
  CHECK(reconstruction_to_csv(r.reconstruction) ==
        "timestamp,value,is_prediction\n"
        "1970-01-01T00:00:00Z,10,0\n"
        "1970-01-01T01:00:00Z,10,1\n"
        "1970-01-01T02:00:00Z,11.5,0\n");
}
