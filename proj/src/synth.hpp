#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "config.hpp"
#include "date.hpp"
#include "factors.hpp"
#include "ingest.hpp"

namespace dynrec {


struct TruthSet {
  int sector = 0;
  Quarter quarter{};
  Date trade_date{};
  std::vector<std::string> tickers;  // top quintile by noise-free expected return
};

struct SynthTruth {
  std::uint64_t seed = 0;
  double intercept = 0.0;
  double noise_sigma = 0.0;
  std::map<int, std::vector<double>> beta;
  std::vector<TruthSet> top;
};

struct SynthData {
  std::vector<FundamentalRecord> fundamentals;
  PricePanel prices;
  UniverseCalendar universe;
  TradingDays trading_days;
  SynthTruth truth;
  /// Planted quarterly log return per (ticker, quarter ordinal).
  std::map<std::pair<std::string, int>, double> returns;
};

/// Stocks are generated one after another from per-stock seeded streams: latent margin and
/// balance-sheet drivers follow AR(1) paths, factors come from compute_factors at the trade-date
/// price, r = intercept + βᵀX + σε, and the next trade-date price is S·exp(r). Daily prices are
/// log-Brownian bridges between trade dates with a shared market shock.
SynthData generate_synthetic(const SynthConfig& config);

std::string serialize_universe(const UniverseCalendar& universe);
std::string truth_to_json(const SynthTruth& truth);
SynthTruth parse_truth(const std::string& json_text);

/// Writes fundamentals.csv, prices.csv, universe.csv, trading_days.csv and truth.json.
void write_synthetic(const SynthData& data, const std::filesystem::path& out_dir);

}  // namespace dynrec
