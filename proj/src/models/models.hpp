#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "models/tree.hpp"

namespace dynrec::models {

/// The five estimator families in tie-break priority order.
enum class ModelFamily { kOls, kRidge, kStepwiseAic, kRandomForest, kGbm };
inline constexpr std::array<ModelFamily, 5> kAllFamilies = {
    ModelFamily::kOls, ModelFamily::kRidge, ModelFamily::kStepwiseAic, ModelFamily::kRandomForest,
    ModelFamily::kGbm};

std::string_view family_name(ModelFamily f);
std::optional<ModelFamily> family_from_name(std::string_view name);
bool is_linear(ModelFamily f);

/// Hyperparameters by family (defaults in parentheses):
///  ridge          lambda (-1 = choose by CV), cv_folds (5), grid_min (1e-4), grid_max (1e2), grid_points (25)
///  random_forest  trees (500), mtry (0 = floor(p/3)), min_leaf (5), bootstrap (1), max_depth (0)
///  gbm            stages (1000), shrinkage (0.1), depth (3), bag_fraction (0.5), min_leaf (10), cv_folds (5)
struct ModelSpec {
  ModelFamily family = ModelFamily::kOls;
  std::map<std::string, double> hyperparameters;
  std::uint64_t seed = 0;

  static ModelSpec defaults(ModelFamily family, std::uint64_t seed = 0);
  double get(const std::string& key) const;
  ModelSpec with(const std::string& key, double value) const;
  /// Throws Error(kInvalidArgument) for unknown keys or out-of-range values.
  void validate() const;
};

struct LinearParams {
  double intercept = 0.0;
  std::vector<std::string> terms;              // retained factors
  std::vector<double> coefficients;            // original scale, aligned with terms
  std::vector<double> standardized;            // ridge: coefficients on unit-variance columns
  double lambda = 0.0;                         // ridge penalty actually used
  std::vector<std::pair<double, double>> cv_curve;  // ridge: (lambda, cv mse)
  std::vector<double> aic_path;                // stepwise: AIC of start model then each accepted step
  std::vector<std::string> step_log;           // stepwise: "-NAME" / "+NAME" per accepted step
};

struct EnsembleParams {
  double base = 0.0;     // initial prediction (gbm: mean of y)
  double scale = 1.0;    // per-tree multiplier (gbm: shrinkage)
  bool average = false;  // forest: prediction is the mean of the trees
  std::vector<RegressionTree> trees;
  std::vector<double> cv_curve;  // gbm: mean CV error after each stage
};

struct FittedModel {
  ModelSpec spec;
  std::vector<std::string> factor_names;  // training column order
  std::variant<LinearParams, EnsembleParams> params;
  /// Aligned with factor_names: coefficient (0 if dropped) or normalized importance.
  std::vector<double> importances;
  std::size_t n_rows = 0;
  double residual_variance = 0.0;

  const LinearParams* linear() const { return std::get_if<LinearParams>(&params); }
  const EnsembleParams* ensemble() const { return std::get_if<EnsembleParams>(&params); }
};

/// Deterministic in (spec, x, y). Throws Error(kInvalidArgument / kNumerical).
FittedModel fit(const ModelSpec& spec, const std::vector<std::string>& factor_names,
                const Eigen::MatrixXd& x, const Eigen::VectorXd& y);

/// Columns of `x` must carry exactly the training factor names in training order.
Eigen::VectorXd predict(const FittedModel& model, const std::vector<std::string>& factor_names,
                        const Eigen::MatrixXd& x);

double mse(std::span<const double> predicted, std::span<const double> realized);
double mse(const Eigen::VectorXd& predicted, const Eigen::VectorXd& realized);

struct InspectEntry {
  std::string name;  // factor or "(Intercept)"
  double value = 0.0;
};
/// Coefficients (with intercept) for linear families, normalized importances summing to 100
/// for tree families; sorted by value descending.
std::vector<InspectEntry> inspect(const FittedModel& model);

nlohmann::json dump_model(const FittedModel& model);

// Family-level entry points, exposed for the oracle tests.
LinearParams fit_ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                     const std::vector<std::string>& names);
LinearParams fit_ridge(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                       const std::vector<std::string>& names, double lambda);
LinearParams fit_ridge_cv(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                          const std::vector<std::string>& names, const ModelSpec& spec);
LinearParams fit_stepwise_aic(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                              const std::vector<std::string>& names);
/// n ln(RSS/n) + 2k with k counting the intercept.
double aic(double rss, std::size_t n, std::size_t k);
/// `columns` index x; RSS of the intercept-plus-columns least-squares fit, nullopt if rank deficient.
std::optional<double> subset_rss(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                 const std::vector<std::size_t>& columns);

}  // namespace dynrec::models
