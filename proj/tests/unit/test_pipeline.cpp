#include <doctest.h>

#include <filesystem>

#include <json.hpp>

#include "csv.hpp"
#include "error.hpp"
#include "fixtures.hpp"
#include "pipeline.hpp"
#include "report.hpp"
#include "synth.hpp"

using namespace dynrec;
namespace fs = std::filesystem;

namespace {

// Small world: two sectors, enough quarters for a handful of rebalance events.
fs::path small_world() {
  static const fs::path dir = [] {
    SynthConfig c;
    c.sectors = 2;
    c.stocks_per_sector = 10;
    c.quarters = 26;
    c.seed = 31;
    auto d = fx::scratch_dir("pipeline_world");
    write_synthetic(generate_synthetic(c), d);
    return d;
  }();
  return dir;
}

RunConfig small_config() {
  const auto d = small_world();
  RunConfig c;
  c.fundamentals = d / "fundamentals.csv";
  c.prices = d / "prices.csv";
  c.universe = d / "universe.csv";
  c.trading_days = d / "trading_days.csv";
  c.families = {ModelFamily::kOls, ModelFamily::kRidge};
  c.parallel = false;
  c.seed = 5;
  return c;
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(csv::read_text(p)); }

}  // namespace

TEST_CASE("cmd_run writes every output and passes its own checks") {
  const auto out = fx::scratch_dir("pipeline_run");
  auto res = cmd_run(small_config(), out);
  for (std::size_t i = 0; i < kRunFilesCount; ++i) {
    CAPTURE(kRunFiles[i]);
    CHECK(fs::exists(out / kRunFiles[i]));
  }
  CHECK_FALSE(fs::exists(out / "INCOMPLETE"));
  REQUIRE(!res.calendar.events.empty());
  CHECK(res.backtests.size() == 3);
  auto rep = read_json(out / "report.json");
  CHECK(rep["checks"]["all_passed"] == true);
  CHECK(rep["checks"]["leakage_violations"] == 0);
  CHECK(rep["methods"].contains("mean_var"));
  CHECK(rep["methods"].contains("equal"));
  CHECK(rep["methods"].contains("min_var"));

  for (const auto& a : res.audit) {
    CHECK(a.release_date <= a.trade_date);
    if (a.role != "predict") {
      REQUIRE(a.realization_date);
      CHECK(*a.realization_date <= a.trade_date);
    }
  }
  for (const auto& w : res.weights) {
    double sum = 0;
    for (double v : w.weights) {
      CHECK(v >= -1e-12);
      sum += v;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  }

  SUBCASE("a rerun is byte-identical") {
    const auto again = fx::scratch_dir("pipeline_rerun");
    cmd_run(small_config(), again);
    for (std::size_t i = 0; i < kRunFilesCount; ++i) {
      CAPTURE(kRunFiles[i]);
      CHECK(csv::read_text(out / kRunFiles[i]) == csv::read_text(again / kRunFiles[i]));
    }
  }

  SUBCASE("report summarizes the run") {
    auto r = cmd_report(out);
    REQUIRE(r.columns.size() == 3);
    CHECK(r.columns[0].label == "Mean-Var");
    CHECK(r.columns[1].label == "Equally");
    CHECK(r.columns[2].label == "Min-Var");
    CHECK(r.table.find("Sharpe") != std::string::npos);
    auto pnl = csv::read_file(out / "pnl.csv");
    REQUIRE(!pnl.rows.empty());
    CHECK(pnl.rows.front().cells.back() == "0");
    auto dd = csv::read_file(out / "drawdown.csv");
    for (const auto& row : dd.rows) CHECK(*csv::parse_number(row.cells.back()) <= 0.0);

    // A benchmark over the same dates adds a fourth column.
    const auto& curve = res.backtests.front().curve;
    std::string bench = "date,value\n";
    for (std::size_t i = 0; i < curve.size(); ++i)
      bench += format_date(curve[i].date) + "," + csv::format_number(100.0 + double(i)) + "\n";
    const auto bench_path = out / "bench.csv";
    csv::write_file(bench_path, bench);
    auto rb = cmd_report(out, bench_path);
    REQUIRE(rb.columns.size() == 4);
    CHECK(rb.columns[3].label == "Benchmark");
    CHECK(rb.columns[3].report.max_drawdown == 0.0);
  }
}

TEST_CASE("a failing run leaves an INCOMPLETE marker") {
  auto cfg = small_config();
  cfg.prices = small_world() / "no_such_prices.csv";
  const auto out = fx::scratch_dir("pipeline_fail");
  try {
    cmd_run(cfg, out);
    FAIL("expected failure");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kIo);
  }
  REQUIRE(fs::exists(out / "INCOMPLETE"));
  CHECK(csv::read_text(out / "INCOMPLETE").find("ingest") != std::string::npos);
  CHECK_FALSE(fs::exists(out / "report.json"));
}

TEST_CASE("report rejects a directory without a run") {
  const auto empty = fx::scratch_dir("pipeline_empty");
  CHECK_THROWS_AS(cmd_report(empty), Error);
}

TEST_CASE("benchmark alignment carries values forward for at most a week") {
  EquityCurve curve;
  for (int d : {4, 5, 6, 7, 8, 11}) curve.push_back({make_date(2010, 1, unsigned(d)), 1.0, 0.0});
  BenchmarkSeries b;
  b.points = {{make_date(2010, 1, 1), 10.0}, {make_date(2010, 1, 6), 11.0}, {make_date(2010, 1, 11), 12.0}};
  CHECK(align_benchmark(b, curve) == std::vector<double>{10, 10, 11, 11, 11, 12});
  b.points = {{make_date(2010, 1, 5), 10.0}};
  CHECK(align_benchmark(b, curve).empty());  // starts after the curve
  b.points = {{make_date(2009, 12, 1), 10.0}, {make_date(2010, 1, 6), 11.0}};
  CHECK(align_benchmark(b, curve).empty());  // stale at the first date
  b.points = {{make_date(2010, 1, 4), 10.0}};
  CHECK(align_benchmark(b, curve).size() == curve.size());
  b.points = {{make_date(2010, 1, 1), 10.0}};
  curve.push_back({make_date(2010, 1, 20), 1.0, 0.0});
  CHECK(align_benchmark(b, curve).empty());  // ends more than a week early
}
