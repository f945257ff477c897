#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

#include "../support/oracles.hpp"
#include "../support/published_tables.hpp"
#include "predfilter/error.hpp"
#include "predfilter/eval.hpp"
#include "predfilter/text.hpp"

using namespace predfilter;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("predfilter_eval_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

SeriesFrame sine_frame(std::size_t hours, double amplitude) {
  std::vector<Measurement> ms;
  const Timestamp t0 = 1577836800;
  for (std::size_t h = 0; h < hours; ++h) {
    ms.push_back({t0 + static_cast<Timestamp>(h) * 3600,
                  15.0 + amplitude * std::sin(2.0 * std::numbers::pi * static_cast<double>(h) / 24.0)});
  }
  return make_frame("sine", SourceKind::in_situ, 3600, std::move(ms));
}

ScenarioSpec small_spec(const std::string& file) {
  ScenarioSpec s;
  s.label = "sine";
  s.kind = ScenarioKind::same_site;
  s.train = {"S", SourceKind::in_situ, file, std::nullopt, text::parse_iso8601("2020-03-01T00:00:00Z")};
  s.test = {"S", SourceKind::in_situ, file, text::parse_iso8601("2020-03-01T00:00:00Z"), std::nullopt};
  s.filter.k = 12;
  s.train_cfg.hidden = 12;
  s.train_cfg.max_epochs = 8;
  s.train_cfg.lr = 0.01;
  s.train_cfg.seed = 3;
  return s;
}

ScenarioReport fake_report(const std::string& source, const std::string& target,
                           std::size_t total, std::size_t tx05, std::size_t tx10, double mae) {
  ScenarioReport r;
  r.spec.train.source_id = source;
  r.spec.test.source_id = target;
  r.mae = mae;
  for (auto [t, tx] : {std::pair{0.5, tx05}, std::pair{1.0, tx10}}) {
    Metrics m{total, tx, total - tx, data_reduction(total, tx), std::nullopt};
    r.rows.push_back({t, m});
  }
  return r;
}

}  // namespace

TEST_CASE("data_reduction") {
  CHECK(text::format_fixed(data_reduction(52535, 6810), 2) == "87.04");
  CHECK(text::format_fixed(data_reduction(8735, 676), 2) == "92.26");
  CHECK(data_reduction(100, 0) == 100.0);
  CHECK(data_reduction(100, 100) == 0.0);
  CHECK(data_reduction(100, 1) == 99.0);
  CHECK_THROWS_AS(data_reduction(0, 0), InputError);
  CHECK_THROWS_AS(data_reduction(5, 6), InputError);
}

TEST_CASE("data_reduction agrees with the correct-count share") {
  for (const auto& row : published::kRows) {
    CHECK(row.correct + row.transmitted == row.total);
    const double share = 100.0 * static_cast<double>(row.correct) / static_cast<double>(row.total);
    CHECK(std::fabs(data_reduction(row.total, row.transmitted) - share) <= 0.005);
  }
}

TEST_CASE("mae") {
  const std::vector<double> a{1, 2, 3};
  CHECK(mae(a, a) == 0.0);
  CHECK(mae(a, std::vector<double>{1, 1, 4}) == doctest::Approx(2.0 / 3.0));
  CHECK(mae(std::vector<double>{1, 1, 4}, a) == mae(a, std::vector<double>{1, 1, 4}));
  CHECK_THROWS_AS(mae(std::vector<double>{}, std::vector<double>{}), InputError);
  CHECK_THROWS_AS(mae(a, std::vector<double>{1, 2}), InputError);
}

TEST_CASE("mae obeys the triangle inequality") {
  Rng rng(12, Stream::test);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(50);
    std::vector<double> a(n), b(n), c(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = rng.uniform(-10, 10);
      b[i] = rng.uniform(-10, 10);
      c[i] = rng.uniform(-10, 10);
    }
    CHECK(mae(a, c) >= 0.0);
    CHECK(mae(a, c) <= mae(a, b) + mae(b, c) + 1e-12);
  }
}

TEST_CASE("metrics_from_log skips forced transmissions") {
  TransmissionLog log;
  log.append({0, Decision::transmit, 10.0, std::nullopt, std::nullopt});
  log.append({1, Decision::suppress, 10.2, 10.0, 0.2});
  log.append({2, Decision::transmit, 11.5, 10.2, 1.3});
  const auto m = metrics_from_log(log);
  CHECK(m.total == 3);
  CHECK(m.transmitted == 2);
  CHECK(m.correct == 1);
  CHECK(m.reduction_pct == doctest::Approx(100.0 / 3.0));
  CHECK(*m.mae == doctest::Approx(0.75));
}

TEST_CASE("open_loop_mae uses actual readings only") {
  const auto f = make_frame("x", SourceKind::in_situ, 3600,
                            {{0, 1.0}, {3600, 2.0}, {7200, 4.0}, {5 * 3600, 9.0}, {6 * 3600, 9.5}});
  // Persistence errors: 1, 2, (gap resets), 0.5.
  CHECK(*open_loop_mae(f, PersistencePredictor(3)) == doctest::Approx(3.5 / 3.0));
  const auto single = make_frame("x", SourceKind::in_situ, 3600, {{0, 1.0}});
  CHECK_FALSE(open_loop_mae(single, PersistencePredictor(3)).has_value());
}

TEST_CASE("render_table") {
  const std::vector<ScenarioReport> same{fake_report("A", "A", 52535, 6810, 1275, 0.264)};
  const auto md = render_table(same, TableFormat::markdown);
  CHECK(md.find("| Location | MAE |") == 0);
  CHECK(md.find("| A | 0.264 | 52535 | 45725 | 6810 | 87.04 | 52535 | 51260 | 1275 | 97.57 |") !=
        std::string::npos);

  const std::vector<ScenarioReport> cross{fake_report("A", "B", 52535, 6881, 1305, 0.291),
                                          fake_report("A", "C", 52535, 8602, 1948, 0.2915)};
  const auto csv = render_table(cross, TableFormat::csv);
  CHECK(csv.find("source,target,mae,") == 0);
  CHECK(csv.find("A,B,0.291,52535,45654,6881,86.90,52535,51230,1305,97.52\n") != std::string::npos);
  CHECK(csv.find("A,C,0.292,") != std::string::npos);  // half rounds up

  auto mismatched = cross;
  mismatched[1].spec.thresholds = {0.5};
  mismatched[1].rows.pop_back();
  CHECK_THROWS_AS(render_table(mismatched, TableFormat::csv), InputError);
  CHECK_THROWS_AS(render_table(std::vector<ScenarioReport>{}, TableFormat::csv), InputError);
}

TEST_CASE("scenario spec validation and JSON") {
  auto s = small_spec("s.csv");
  CHECK(scenario_from_json(scenario_to_json(s)).label == s.label);
  CHECK(scenario_to_json(scenario_from_json(scenario_to_json(s))) == scenario_to_json(s));

  auto bad = s;
  bad.thresholds = {};
  CHECK_THROWS_AS(bad.validate(), InputError);
  bad.thresholds = {0.5, -1.0};
  CHECK_THROWS_AS(bad.validate(), InputError);

  bad = s;
  bad.test.start = text::parse_iso8601("2020-02-01T00:00:00Z");  // overlaps the training range
  CHECK_THROWS_AS(bad.validate(), InputError);

  auto j = scenario_to_json(s);
  j["treshold"] = 1;
  CHECK_THROWS_AS(scenario_from_json(j), InputError);
  CHECK_THROWS_AS(load_scenarios("{\"scenarios\": 3}"), InputError);
}

TEST_CASE("run_scenario: deterministic, one row per threshold, provenance") {
  const auto dir = temp_dir("scenario");
  const auto frame = oracle::synthetic_temperature(24 * 75, 5, 8.0, 10.0, 0.3, "S");
  text::write_file_atomic((dir / "s.csv").string(), to_csv(frame));

  RunOptions opts;
  opts.data_root = dir.string();
  const auto spec = small_spec("s.csv");
  const auto a = run_scenario(spec, opts);
  const auto b = run_scenario(spec, opts);
  CHECK(report_to_json(a) == report_to_json(b));
  CHECK(a.rows.size() == 2);
  CHECK(a.rows[0].metrics.total == 24 * 15);
  CHECK(a.mae.has_value());
  CHECK(a.provenance.weights_sha256.size() == 64);
  CHECK(report_to_json(report_from_json(report_to_json(a))) == report_to_json(a));

  auto other = spec;
  other.train_cfg.seed = 4;
  const auto c = run_scenario(other, opts);
  CHECK(c.provenance.spec_sha256 != a.provenance.spec_sha256);
  CHECK(c.provenance.weights_sha256 != a.provenance.weights_sha256);
  CHECK(c.provenance.train_data_sha256 == a.provenance.train_data_sha256);

  auto baseline = spec;
  baseline.model = ModelKind::persistence;
  const auto p = run_scenario(baseline, opts);
  CHECK(p.provenance.weights_sha256 == "none");
  CHECK_FALSE(p.train_report.has_value());

  // Cached weights reproduce the same report; a tampered cache is refused.
  opts.cache_dir = (dir / "cache").string();
  const auto cold = run_scenario(spec, opts);
  const auto warm = run_scenario(spec, opts);
  CHECK(report_to_json(cold) == report_to_json(a));
  CHECK(report_to_json(warm) == report_to_json(a));
  for (const auto& entry : fs::directory_iterator(dir / "cache")) {
    if (entry.path().string().ends_with(".weights.json")) {
      auto bytes = text::read_file(entry.path().string());
      bytes[bytes.size() / 2] = bytes[bytes.size() / 2] == '1' ? '2' : '1';
      text::write_file_atomic(entry.path().string(), bytes);
    }
  }
  CHECK_THROWS_AS(run_scenario(spec, opts), InputError);

  // Editing the data changes its hash.
  auto edited = frame;
  edited.measurements.back().value += 0.1;
  text::write_file_atomic((dir / "s.csv").string(), to_csv(edited));
  opts.cache_dir.clear();
  CHECK(run_scenario(spec, opts).provenance.test_data_sha256 != a.provenance.test_data_sha256);
}

TEST_CASE("run_scenario: LSTM reduces at least as much as persistence on a sine") {
  const auto dir = temp_dir("sine");
  text::write_file_atomic((dir / "s.csv").string(), to_csv(sine_frame(24 * 75, 8.0)));
  RunOptions opts;
  opts.data_root = dir.string();
  auto spec = small_spec("s.csv");
  // With reset_on_transmit every transmission leaves a single value that is
  // padded into a constant window, an input the network never saw during
  // training. The sliding buffer keeps real history in the window.
  spec.filter.buffer_policy = BufferPolicy::sliding;
  const auto lstm = run_scenario(spec, opts);
  spec.model = ModelKind::persistence;
  const auto base = run_scenario(spec, opts);
  MESSAGE("lstm " << lstm.rows[0].metrics.reduction_pct << "% vs persistence "
                  << base.rows[0].metrics.reduction_pct << "%");
  CHECK(lstm.rows[0].metrics.reduction_pct >= base.rows[0].metrics.reduction_pct);
}

TEST_CASE("run_scenarios keeps order and isolates failures") {
  const auto dir = temp_dir("many");
  text::write_file_atomic((dir / "s.csv").string(),
                          to_csv(oracle::synthetic_temperature(24 * 70, 9, 8.0, 10.0, 0.3, "S")));
  RunOptions opts;
  opts.data_root = dir.string();
  auto ok = small_spec("s.csv");
  ok.model = ModelKind::persistence;
  auto missing = ok;
  missing.label = "missing";
  missing.test.file = "absent.csv";
  const auto out = run_scenarios({ok, missing, ok}, opts, 2);
  REQUIRE(out.size() == 3);
  CHECK(out[0].report.has_value());
  CHECK_FALSE(out[1].report.has_value());
  CHECK(out[1].exit_code == 2);
  CHECK(out[1].error.find("absent.csv") != std::string::npos);
  CHECK(report_to_json(*out[2].report) == report_to_json(*out[0].report));
}
