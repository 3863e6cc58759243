#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "allocation.hpp"
#include "date.hpp"
#include "ingest.hpp"
#include "models/models.hpp"
#include "scheduler.hpp"

namespace dynrec {

using models::ModelFamily;
using models::ModelSpec;

/// `key = value` lines, `#` comments, blank lines ignored. Duplicate keys are errors.
class KeyValueFile {
 public:
  static KeyValueFile parse(const std::string& text, const std::string& source = "config");
  static KeyValueFile load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  std::optional<std::string> get(const std::string& key) const;
  const std::map<std::string, std::string>& values() const { return values_; }
  const std::string& source() const { return source_; }
  int line_of(const std::string& key) const;

 private:
  std::string source_;
  std::map<std::string, std::string> values_;
  std::map<std::string, int> lines_;
};

struct RunConfig {
  std::filesystem::path fundamentals;
  std::filesystem::path prices;
  std::filesystem::path universe;
  std::optional<std::filesystem::path> trading_days;  // date column; default: weekdays minus holidays
  std::optional<std::filesystem::path> benchmark;     // date,value
  std::optional<Date> data_start;                      // default: first quarter in the fundamentals
  std::optional<Date> data_end;                        // default: last price date
  std::optional<Date> in_sample_end;
  WindowPolicy window;
  double pick_fraction = 0.2;
  double cost_rate = 0.001;
  double risk_free = 0.015;
  std::vector<AllocationMethod> methods{AllocationMethod::kMeanVariance, AllocationMethod::kEqual,
                                        AllocationMethod::kMinVariance};
  double ub_base = 0.05;
  int frontier_points = 100;
  double initial_value = 1'000'000.0;
  CleaningRules cleaning;
  CovarianceOptions covariance;
  std::vector<ModelFamily> families{models::kAllFamilies.begin(), models::kAllFamilies.end()};
  std::map<ModelFamily, std::map<std::string, double>> model_overrides;
  std::vector<Date> holidays;
  bool parallel = true;
  std::uint64_t seed = 42;

  /// Range and consistency checks; Error(kInvalidArgument) on violation.
  void validate() const;
  std::vector<ModelSpec> model_specs() const;
};

/// Unknown keys are rejected. Relative paths resolve against the config file's directory.
RunConfig parse_run_config(const KeyValueFile& kv, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

/// Default planted coefficients, in factor order. The signal sits on margins and balance-sheet
/// ratios; price-based multiples and revenue growth carry none.
std::vector<double> default_synth_beta();

struct SynthConfig {
  int sectors = 3;              // first n GICS codes
  int stocks_per_sector = 20;
  int quarters = 32;            // fiscal quarters of fundamentals
  Date start = make_date(2000, 1, 1);  // first quarter start
  double noise_sigma = 0.01;    // ε standard deviation (quarterly log return)
  double price_vol = 0.25;      // annualized idiosyncratic daily volatility of the bridges
  double market_vol = 0.15;     // annualized common component
  double intercept = -0.13;     // offsets the mean of beta·x to roughly 2% a quarter
  std::vector<double> beta = default_synth_beta();  // 20 entries
  std::map<int, std::vector<double>> sector_beta;  // per-sector override
  double missing_rate = 0.005;  // fraction of raw cells blanked
  double late_rate = 0.01;      // fraction of records released after the trade date
  std::vector<Date> holidays;
  std::uint64_t seed = 7;

  void validate() const;
  const std::vector<double>& beta_for(int sector) const;
};

SynthConfig parse_synth_config(const KeyValueFile& kv);
SynthConfig load_synth_config(const std::filesystem::path& path);

}  // namespace dynrec
