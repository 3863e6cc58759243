#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "backtest.hpp"

namespace dynrec {

struct SummaryColumn {
  std::string label;
  PerformanceReport report;
};

struct ReportOutput {
  std::vector<SummaryColumn> columns;  // methods in run order, then the benchmark when given
  std::string table;                   // printable summary
};

/// Reads equity_curve.csv (and report.json for the risk-free rate) from a run directory, writes
/// pnl.csv and drawdown.csv beside them and returns the summary.
ReportOutput cmd_report(const std::filesystem::path& run_dir,
                        const std::optional<std::filesystem::path>& benchmark = std::nullopt);

/// Fixed-width table with one column per entry.
std::string format_summary(const std::vector<SummaryColumn>& columns);

}  // namespace dynrec
