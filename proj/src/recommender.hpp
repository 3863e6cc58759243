#pragma once

#include <array>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "date.hpp"
#include "factors.hpp"
#include "models/models.hpp"
#include "scheduler.hpp"

namespace dynrec {

using models::FittedModel;
using models::ModelFamily;
using models::ModelSpec;

struct ModelScore {
  ModelFamily family = ModelFamily::kOls;
  double mse = 0.0;  // +inf marks a family whose fit failed
};

struct SelectionRecord {
  Date trade_date{};
  int sector = 0;
  std::vector<ModelScore> scores;  // priority order
  ModelFamily chosen = ModelFamily::kOls;      // argmin of scores
  ModelFamily model_used = ModelFamily::kOls;  // differs from chosen after a sanity fallback
  bool fallback_used = false;
  std::string fallback_reason;

  /// 1 for the argmin family, 0 otherwise, aligned with `scores`.
  std::vector<int> indicator() const;
};

struct Pick {
  std::string ticker;
  double predicted_return = 0.0;
};

struct Recommendation {
  Date trade_date{};
  int sector = 0;
  std::vector<Pick> picks;  // descending by prediction
  ModelFamily model_used = ModelFamily::kOls;
};

struct Design {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
};
Design to_design(const FactorPanel& panel);

/// Fits each spec on `train` and scores it on `test`. With `tolerate_failures`, a failing fit
/// scores +inf (logged); otherwise its error propagates with the family name. `fitted`, when
/// given, receives the models (unset for failures).
std::vector<ModelScore> score_models(const FactorPanel& train, const FactorPanel& test,
                                     const std::vector<ModelSpec>& specs,
                                     std::vector<std::optional<FittedModel>>* fitted = nullptr,
                                     bool tolerate_failures = false);

/// Argmin with ties broken by family priority (ols, ridge, stepwise, forest, gbm).
/// Throws on NaN or when every score is infinite.
ModelFamily select_model(std::span<const ModelScore> scores);
/// Families ordered by (mse, priority); infinite scores excluded.
std::vector<ModelFamily> rank_models(std::span<const ModelScore> scores);

/// Top max(1, round-half-up(fraction * n)) by prediction, ties by ticker.
std::vector<Pick> pick_top(std::vector<Pick> predictions, double fraction = 0.2);

struct SanityResult {
  bool ok = true;
  std::string reason;
};
/// Abnormal when all coefficients/importances are zero, any is non-finite, or predictions are
/// constant across a non-constant `test_x`.
SanityResult sanity_check(const FittedModel& model, const Eigen::MatrixXd* test_x = nullptr);

struct SectorData {
  int sector = 0;
  FactorPanel train;
  FactorPanel test;
  FactorPanel predict;  // rows to rank; fwd_return unused
};

struct RecommenderOptions {
  std::vector<ModelSpec> specs;  // one per family in priority order
  double pick_fraction = 0.2;
  bool parallel = true;
};

RecommenderOptions default_recommender_options(std::uint64_t seed);

struct SectorOutcome {
  Recommendation recommendation;
  SelectionRecord selection;
  std::optional<FittedModel> model;
};

/// Steps 1-4 for every nonempty sector, merged in sector-code order.
std::vector<SectorOutcome> recommend(const RebalanceEvent& event, const std::vector<SectorData>& sectors,
                                     const RecommenderOptions& options);

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b);

}  // namespace dynrec
