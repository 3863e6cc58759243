#include "report.hpp"

#include <cstdio>
#include <fstream>
#include <map>

#include <json.hpp>

#include "csv.hpp"
#include "error.hpp"
#include "pipeline.hpp"

namespace dynrec {

namespace {

std::string cell(double v, bool percent) {
  char buf[64];
  if (percent) std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * v);
  else std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

std::string format_summary(const std::vector<SummaryColumn>& cols) {
  const int w0 = 20, w = 16;
  std::string out;
  char buf[128];
  std::snprintf(buf, sizeof buf, "%-*s", w0, "");
  out += buf;
  for (const auto& c : cols) {
    std::snprintf(buf, sizeof buf, "%*s", w, c.label.c_str());
    out += buf;
  }
  out += "\n";
  auto row = [&](const char* name, auto value) {
    std::snprintf(buf, sizeof buf, "%-*s", w0, name);
    out += buf;
    for (const auto& c : cols) {
      std::snprintf(buf, sizeof buf, "%*s", w, value(c.report).c_str());
      out += buf;
    }
    out += "\n";
  };
  row("Start Value", [](const PerformanceReport& r) { return cell(r.start_value, false); });
  row("End Value", [](const PerformanceReport& r) { return cell(r.end_value, false); });
  row("Total Return", [](const PerformanceReport& r) { return cell(r.total_return, true); });
  row("Max Drawdown", [](const PerformanceReport& r) { return cell(r.max_drawdown, true); });
  row("Annualized Return", [](const PerformanceReport& r) { return cell(r.annualized_return, true); });
  row("Annualized Std", [](const PerformanceReport& r) { return cell(r.annualized_std, true); });
  row("Sharpe Ratio", [](const PerformanceReport& r) {
    if (!r.sharpe) return std::string("undefined");
    char b[32];
    std::snprintf(b, sizeof b, "%.3f", *r.sharpe);
    return std::string(b);
  });
  return out;
}

ReportOutput cmd_report(const std::filesystem::path& dir, const std::optional<std::filesystem::path>& benchmark) {
  std::vector<std::string> missing;
  for (const char* f : {"equity_curve.csv", "report.json"})
    if (!std::filesystem::is_regular_file(dir / f)) missing.push_back((dir / f).string());
  if (benchmark && !std::filesystem::is_regular_file(*benchmark)) missing.push_back(benchmark->string());
  if (!missing.empty()) {
    std::string msg = "missing run files:";
    for (const auto& m : missing) msg += " " + m;
    fail(ErrorKind::kInvalidArgument, msg);
  }

  double rf = 0.015;
  try {
    auto j = nlohmann::json::parse(csv::read_text(dir / "report.json"));
    if (j.contains("config") && j["config"].contains("risk_free")) rf = j["config"]["risk_free"].get<double>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kParse, (dir / "report.json").string() + ": " + e.what());
  }

  const auto table = csv::read_file(dir / "equity_curve.csv");
  const std::string src = (dir / "equity_curve.csv").string();
  const auto cd = table.column("date", src), cm = table.column("method", src), cv = table.column("value", src);
  std::vector<std::string> order;
  std::map<std::string, EquityCurve> curves;
  for (const auto& row : table.rows) {
    if (row.cells.size() != table.header.size())
      fail(ErrorKind::kParse, src + " line " + std::to_string(row.line) + ": wrong cell count");
    auto v = csv::parse_number(row.cells[cv]);
    if (!v) fail(ErrorKind::kParse, src + " line " + std::to_string(row.line) + ": bad value");
    const std::string& m = row.cells[cm];
    if (!curves.count(m)) order.push_back(m);
    curves[m].push_back({parse_date(row.cells[cd]), *v, 0.0});
  }
  if (order.empty()) fail(ErrorKind::kData, src + ": no curve rows");

  ReportOutput out;
  std::string pnl = "date,method,pnl\n", dd = "date,method,drawdown\n";
  auto emit = [&](const std::string& name, const std::vector<Date>& dates, const std::vector<double>& values) {
    double peak = values.front();
    for (std::size_t i = 0; i < values.size(); ++i) {
      peak = std::max(peak, values[i]);
      const std::string d = format_date(dates[i]);
      pnl += csv::join({d, name, csv::format_number(values[i] - values.front())}) + "\n";
      dd += csv::join({d, name, csv::format_number(values[i] / peak - 1.0)}) + "\n";
    }
  };
  for (const auto& m : order) {
    const auto& c = curves[m];
    std::vector<Date> dates;
    std::vector<double> values;
    for (const auto& p : c) {
      dates.push_back(p.date);
      values.push_back(p.value);
    }
    std::string label = m;
    try {
      label = std::string(method_label(method_from_name(m)));
    } catch (const Error&) {
    }
    out.columns.push_back({label, metrics(values, rf)});
    emit(m, dates, values);
  }
  if (benchmark) {
    const auto bench = load_benchmark(*benchmark);
    const auto& ref = curves[order.front()];
    auto aligned = align_benchmark(bench, ref);
    if (aligned.size() < 2) fail(ErrorKind::kData, benchmark->string() + ": does not cover the backtest period");
    std::vector<Date> dates;
    for (const auto& p : ref) dates.push_back(p.date);
    out.columns.push_back({"Benchmark", metrics(aligned, rf)});
    emit("benchmark", dates, aligned);
  }
  csv::write_file(dir / "pnl.csv", pnl);
  csv::write_file(dir / "drawdown.csv", dd);
  out.table = format_summary(out.columns);
  return out;
}

}  // namespace dynrec
