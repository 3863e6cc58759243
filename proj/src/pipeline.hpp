#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "backtest.hpp"
#include "config.hpp"
#include "recommender.hpp"
#include "scheduler.hpp"

namespace dynrec {

/// One training, test or prediction row as it entered a model, for the leakage audit.
struct AuditRow {
  int event_index = 0;
  Date trade_date{};
  int sector = 0;
  std::string ticker;
  Date quarter_end{};
  std::string role;  // train, test, predict
  Date release_date{};
  std::optional<Date> realization_date;
};

std::string serialize_audit(const std::vector<AuditRow>& rows);

struct BenchmarkSeries {
  std::vector<std::pair<Date, double>> points;
};
/// `date,value` with positive values.
BenchmarkSeries load_benchmark(const std::filesystem::path& path);

/// Benchmark values on the curve's dates (last value on or before each date, at most
/// kMaxBenchmarkGap old); empty when the series does not cover the whole curve.
extern const std::chrono::days kMaxBenchmarkGap;
std::vector<double> align_benchmark(const BenchmarkSeries& bench, const EquityCurve& curve);

struct RunResult {
  TradeCalendar calendar;
  std::vector<SelectionRecord> selections;
  std::vector<Recommendation> recommendations;
  std::vector<PortfolioWeights> weights;
  std::vector<BacktestResult> backtests;
  std::vector<AuditRow> audit;
  nlohmann::ordered_json report;
};

/// ingest → factors → scheduler → recommender → allocation → backtest, writing every output file
/// to `out_dir`. A failure writes INCOMPLETE naming the stage and rethrows.
RunResult cmd_run(const RunConfig& config, const std::filesystem::path& out_dir);

nlohmann::ordered_json report_to_json(const PerformanceReport& r);

extern const char* const kRunFiles[];
extern const std::size_t kRunFilesCount;

}  // namespace dynrec
