#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "models/models.hpp"

namespace dynrec::models {

struct ForestOptions {
  std::size_t trees = 500;
  std::size_t mtry = 0;  // 0 = max(1, floor(p/3))
  double min_leaf = 5.0;
  bool bootstrap = true;
  int max_depth = 0;
};

struct GbmOptions {
  std::size_t stages = 1000;
  double shrinkage = 0.1;
  int depth = 3;
  double bag_fraction = 0.5;
  double min_leaf = 10.0;
  std::size_t cv_folds = 5;  // < 2 disables stage selection
};

/// Bagged CART trees with per-tree seeds derived from `seed`; importance is the mean total
/// squared-error reduction per factor (unnormalized).
EnsembleParams fit_random_forest(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                 const ForestOptions& opt, std::uint64_t seed,
                                 std::vector<double>& importance);

/// Squared-error gradient boosting from the mean; with cv_folds >= 2 the stage count is the
/// argmin of the k-fold staged validation error.
EnsembleParams fit_gbm(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const GbmOptions& opt,
                       std::uint64_t seed, std::vector<double>& importance);

double predict_ensemble(const EnsembleParams& ep, const Eigen::MatrixXd& x, Eigen::Index row);

}  // namespace dynrec::models
