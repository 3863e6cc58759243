#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "date.hpp"
#include "ingest.hpp"

namespace dynrec {

enum class AllocationMethod { kMeanVariance, kEqual, kMinVariance };

inline constexpr AllocationMethod kAllMethods[] = {AllocationMethod::kMeanVariance, AllocationMethod::kEqual,
                                                   AllocationMethod::kMinVariance};

/// "mean_var", "equal", "min_var".
std::string_view method_name(AllocationMethod m);
/// Column heads used in summaries: "Mean-Var", "Equally", "Min-Var".
std::string_view method_label(AllocationMethod m);
AllocationMethod method_from_name(std::string_view name);

struct CovarianceOptions {
  int lookback = 252;     // returns in the trailing window
  int min_returns = 60;   // below this a ticker keeps only its own variance
};

struct CovarianceEstimate {
  std::vector<std::string> tickers;
  Eigen::MatrixXd sigma;       // daily simple returns
  std::vector<int> returns;    // usable returns per ticker
  bool projected = false;      // pairwise estimate was clipped to PSD
};

/// Trailing-window covariance of daily simple returns on the `axis` calendar up to `as_of`.
CovarianceEstimate estimate_covariance(const PricePanel& prices, const std::vector<std::string>& tickers, Date as_of,
                                       const TradingDays& axis, const CovarianceOptions& options = {});

/// Nearest PSD matrix in Frobenius norm (negative eigenvalues clipped).
Eigen::MatrixXd project_psd(const Eigen::MatrixXd& m);

/// max(ub_base, 1/n).
double weight_cap(std::size_t n, double ub_base = 0.05);

struct AllocationResult {
  Eigen::VectorXd weights;
  double kkt_residual = 0.0;
  int iterations = 0;
  bool fallback = false;
  std::string note;
};

struct FrontierPoint {
  double target = 0.0;
  double ret = 0.0;       // quarterly
  double stdev = 0.0;     // quarterly
  double sharpe = 0.0;
};

struct MaxSharpeOptions {
  int frontier_points = 100;
  double days_per_quarter = 63.0;
  bool refine = true;
  std::vector<FrontierPoint>* frontier = nullptr;  // optional sweep record
};

Eigen::VectorXd equal_weights(std::size_t n);

/// min wᵀΣw s.t. Σw = 1, 0 ≤ w ≤ ub.
AllocationResult min_variance(const Eigen::MatrixXd& sigma, double ub);

/// Quarterly risk-free rate from an annual one, (1 + rf)^(1/4) - 1.
double quarterly_rate(double rf_annual);

/// Frontier sweep maximizing (μᵀw - rf_q) / sqrt(wᵀ(63Σ)w); μ quarterly, Σ daily.
AllocationResult max_sharpe(const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma, double rf_annual, double ub,
                            const MaxSharpeOptions& options = {});

/// Sharpe of a weight vector in the units used by max_sharpe.
double portfolio_sharpe(const Eigen::VectorXd& w, const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma,
                        double rf_annual, double days_per_quarter = 63.0);

/// Throws unless every weight is in [0, ub] and the sum is 1 within 1e-6.
void check_weights(const Eigen::VectorXd& w, double ub);

struct PortfolioWeights {
  Date trade_date;
  AllocationMethod method = AllocationMethod::kEqual;
  std::vector<std::string> tickers;
  std::vector<double> weights;
  std::string note;
};

struct AllocationRequest {
  AllocationMethod method = AllocationMethod::kEqual;
  Date trade_date;
  std::vector<std::string> tickers;
  Eigen::VectorXd mu;
  double rf = 0.015;
  double ub_base = 0.05;
  int frontier_points = 100;
};

/// Dispatch by method; `cov` may be null for the equal-weight method.
PortfolioWeights allocate(const AllocationRequest& request, const CovarianceEstimate* cov);

/// trade_date,method,ticker,weight
std::string serialize_weights(const std::vector<PortfolioWeights>& weights);
std::vector<PortfolioWeights> parse_weights(const std::string& text);

}  // namespace dynrec
