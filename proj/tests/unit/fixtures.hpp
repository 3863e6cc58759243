#pragma once

#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "date.hpp"
#include "factors.hpp"
#include "ingest.hpp"
#include "rng.hpp"

namespace fx {

using namespace dynrec;

/// Record with every raw field populated; `k` scales the accounting values.
inline FundamentalRecord full_record(const std::string& ticker, int sector, Date qend, Date release,
                                     double k = 1.0) {
  FundamentalRecord r;
  r.ticker = ticker;
  r.sector = sector;
  r.quarter_end = qend;
  r.release_date = release;
  r.fields[field::kRevenue] = 1000.0 * k;
  r.fields[field::kNetIncome] = 80.0 * k;
  r.fields[field::kTotalAssets] = 4000.0 * k;
  r.fields[field::kEquity] = 1500.0 * k;
  r.fields[field::kCurrentAssets] = 900.0 * k;
  r.fields[field::kCurrentLiabilities] = 600.0 * k;
  r.fields[field::kInventory] = 200.0 * k;
  r.fields[field::kCash] = 150.0 * k;
  r.fields[field::kLongTermDebt] = 700.0 * k;
  r.fields[field::kOperatingCashFlow] = 120.0 * k;
  r.fields[field::kSharesOutstanding] = 100.0;
  r.fields[field::kCogs] = 600.0 * k;
  r.fields[field::kAccountsPayable] = 180.0 * k;
  r.fields[field::kOperatingIncome] = 110.0 * k;
  r.fields[field::kEbitda] = 160.0 * k;
  r.fields[field::kTotalDebt] = 900.0 * k;
  r.fields[field::kDividends] = 10.0 * k;
  return r;
}

inline PriceSeries weekday_series(const std::string& ticker, Date from, Date to,
                                  const std::function<double(Date)>& price) {
  std::vector<std::pair<Date, double>> obs;
  for (Date d = from; d <= to; d += std::chrono::days{1})
    if (is_weekday(d)) obs.emplace_back(d, price(d));
  return PriceSeries(ticker, std::move(obs));
}

struct Regression {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  Eigen::VectorXd beta;
  double intercept = 0.0;
};

/// Gaussian design with y = b0 + Xβ + σε.
inline Regression random_regression(int n, int p, double sigma, std::uint64_t seed) {
  Rng rng(seed);
  Regression r;
  r.x.resize(n, p);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j) r.x(i, j) = rng.normal();
  r.beta.resize(p);
  for (int j = 0; j < p; ++j) r.beta(j) = rng.uniform() * 2.0 - 1.0;
  r.intercept = 0.3;
  r.y = (r.x * r.beta).array() + r.intercept;
  for (int i = 0; i < n; ++i) r.y(i) += sigma * rng.normal();
  return r;
}

inline std::vector<std::string> column_names(int p) {
  std::vector<std::string> names;
  for (int j = 0; j < p; ++j) names.push_back(j < int(kFactorCount) ? factor_names()[j] : "X" + std::to_string(j));
  return names;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("dynrec_unit_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace fx
