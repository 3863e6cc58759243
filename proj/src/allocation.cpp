#include "allocation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "csv.hpp"
#include "error.hpp"
#include "log.hpp"
#include "qp.hpp"

namespace dynrec {

std::string_view method_name(AllocationMethod m) {
  switch (m) {
    case AllocationMethod::kMeanVariance: return "mean_var";
    case AllocationMethod::kEqual: return "equal";
    case AllocationMethod::kMinVariance: return "min_var";
  }
  return "?";
}

std::string_view method_label(AllocationMethod m) {
  switch (m) {
    case AllocationMethod::kMeanVariance: return "Mean-Var";
    case AllocationMethod::kEqual: return "Equally";
    case AllocationMethod::kMinVariance: return "Min-Var";
  }
  return "?";
}

AllocationMethod method_from_name(std::string_view name) {
  if (name == "mean_var" || name == "mean_variance" || name == "max_sharpe") return AllocationMethod::kMeanVariance;
  if (name == "equal" || name == "equally") return AllocationMethod::kEqual;
  if (name == "min_var" || name == "min_variance") return AllocationMethod::kMinVariance;
  fail(ErrorKind::kInvalidArgument, "unknown allocation method '" + std::string(name) +
                                        "' (expected mean_var, equal, min_var)");
}

// ---------------------------------------------------------------------------
// Covariance

Eigen::MatrixXd project_psd(const Eigen::MatrixXd& m) {
  Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
  Eigen::MatrixXd out = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
  return 0.5 * (out + out.transpose());
}

CovarianceEstimate estimate_covariance(const PricePanel& prices, const std::vector<std::string>& tickers, Date as_of,
                                       const TradingDays& axis, const CovarianceOptions& opt) {
  if (opt.lookback < 2 || opt.min_returns < 2)
    fail(ErrorKind::kInvalidArgument, "estimate_covariance: lookback and min_returns must be at least 2");
  const auto n = Eigen::Index(tickers.size());
  CovarianceEstimate out;
  out.tickers = tickers;
  out.sigma = Eigen::MatrixXd::Zero(n, n);
  out.returns.assign(tickers.size(), 0);
  if (n == 0) return out;

  const auto& days = axis.days();
  auto end = std::upper_bound(days.begin(), days.end(), as_of);
  const auto available = std::distance(days.begin(), end);
  const auto window = std::min<std::ptrdiff_t>(available, opt.lookback + 1);
  std::vector<Date> grid(end - window, end);
  const auto m = Eigen::Index(grid.empty() ? 0 : grid.size() - 1);

  // r(t, i) with NaN where either endpoint price is missing.
  const double nan = std::numeric_limits<double>::quiet_NaN();
  Eigen::MatrixXd r = Eigen::MatrixXd::Constant(m, n, nan);
  for (Eigen::Index i = 0; i < n; ++i) {
    auto it = prices.find(tickers[std::size_t(i)]);
    if (it == prices.end() || it->second.empty() || !it->second.on_or_before(as_of))
      fail(ErrorKind::kData, "estimate_covariance: no price history for " + tickers[std::size_t(i)] + " on or before " +
                                 format_date(as_of));
    const auto& s = it->second;
    std::optional<double> prev = m > 0 ? s.on(grid[0]) : std::nullopt;
    for (Eigen::Index t = 0; t < m; ++t) {
      auto cur = s.on(grid[std::size_t(t) + 1]);
      if (prev && cur) {
        r(t, i) = *cur / *prev - 1.0;
        ++out.returns[std::size_t(i)];
      }
      prev = cur;
    }
  }

  bool all_full = true;
  for (int c : out.returns) all_full = all_full && c == opt.lookback;

  if (all_full) {
    Eigen::MatrixXd centered = r.rowwise() - r.colwise().mean();
    out.sigma = centered.transpose() * centered / double(m - 1);
    return out;
  }

  // Pairwise-complete estimate over the tickers with enough history.
  std::vector<Eigen::Index> rich, poor;
  for (Eigen::Index i = 0; i < n; ++i) (out.returns[std::size_t(i)] >= opt.min_returns ? rich : poor).push_back(i);
  auto pair_cov = [&](Eigen::Index a, Eigen::Index b) -> std::optional<double> {
    double sa = 0, sb = 0;
    int k = 0;
    for (Eigen::Index t = 0; t < m; ++t)
      if (!std::isnan(r(t, a)) && !std::isnan(r(t, b))) {
        sa += r(t, a);
        sb += r(t, b);
        ++k;
      }
    if (k < 2) return std::nullopt;
    const double ma = sa / k, mb = sb / k;
    double acc = 0;
    for (Eigen::Index t = 0; t < m; ++t)
      if (!std::isnan(r(t, a)) && !std::isnan(r(t, b))) acc += (r(t, a) - ma) * (r(t, b) - mb);
    return acc / (k - 1);
  };
  for (std::size_t x = 0; x < rich.size(); ++x)
    for (std::size_t y = x; y < rich.size(); ++y) {
      const double v = pair_cov(rich[x], rich[y]).value_or(0.0);
      out.sigma(rich[x], rich[y]) = out.sigma(rich[y], rich[x]) = v;
    }
  if (!rich.empty()) {
    Eigen::MatrixXd sub(rich.size(), rich.size());
    for (std::size_t x = 0; x < rich.size(); ++x)
      for (std::size_t y = 0; y < rich.size(); ++y) sub(Eigen::Index(x), Eigen::Index(y)) = out.sigma(rich[x], rich[y]);
    sub = project_psd(sub);
    out.projected = true;
    for (std::size_t x = 0; x < rich.size(); ++x)
      for (std::size_t y = 0; y < rich.size(); ++y) out.sigma(rich[x], rich[y]) = sub(Eigen::Index(x), Eigen::Index(y));
  }

  std::vector<double> known;
  for (Eigen::Index i = 0; i < n; ++i)
    if (out.returns[std::size_t(i)] >= 2) {
      if (auto v = pair_cov(i, i)) {
        if (out.returns[std::size_t(i)] < opt.min_returns) out.sigma(i, i) = *v;
        known.push_back(out.sigma(i, i));
      }
    }
  for (Eigen::Index i : poor) {
    if (out.returns[std::size_t(i)] >= 2) continue;
    double fill = 0.0;
    if (!known.empty()) {
      std::vector<double> k = known;
      std::nth_element(k.begin(), k.begin() + std::ptrdiff_t(k.size() / 2), k.end());
      fill = k[k.size() / 2];
    }
    logger()->warn("covariance at {}: {} has {} returns in the window, using median variance {}", format_date(as_of),
                   tickers[std::size_t(i)], out.returns[std::size_t(i)], fill);
    out.sigma(i, i) = fill;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Weights

double weight_cap(std::size_t n, double ub_base) {
  if (n == 0) fail(ErrorKind::kInvalidArgument, "weight_cap: n must be positive");
  return std::max(ub_base, 1.0 / double(n));
}

Eigen::VectorXd equal_weights(std::size_t n) {
  if (n == 0) fail(ErrorKind::kInvalidArgument, "equal_weights: n must be at least 1");
  return Eigen::VectorXd::Constant(Eigen::Index(n), 1.0 / double(n));
}

void check_weights(const Eigen::VectorXd& w, double ub) {
  for (Eigen::Index i = 0; i < w.size(); ++i)
    if (!(w(i) >= 0.0 && w(i) <= ub))
      fail(ErrorKind::kNumerical, "weight " + std::to_string(i) + " = " + csv::format_number(w(i)) +
                                      " outside [0, " + csv::format_number(ub) + "]");
  if (std::abs(w.sum() - 1.0) > 1e-6)
    fail(ErrorKind::kNumerical, "weights sum to " + csv::format_number(w.sum()));
}

namespace {

void check_input(const Eigen::MatrixXd& sigma, double ub, const Eigen::VectorXd* mu) {
  const auto n = sigma.rows();
  if (n == 0 || sigma.cols() != n) fail(ErrorKind::kInvalidArgument, "covariance must be a nonempty square matrix");
  if (!sigma.allFinite()) fail(ErrorKind::kInvalidArgument, "covariance has non-finite entries");
  if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-8)
    fail(ErrorKind::kInvalidArgument, "covariance is not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (sigma + sigma.transpose()), Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -1e-8)
    fail(ErrorKind::kInvalidArgument, "covariance is not positive semidefinite (min eigenvalue " +
                                          csv::format_number(es.eigenvalues().minCoeff()) + ")");
  if (mu && (mu->size() != n || !mu->allFinite()))
    fail(ErrorKind::kInvalidArgument, "expected returns must be finite and match the covariance size");
  if (!(ub > 0.0 && ub <= 1.0) || double(n) * ub < 1.0 - 1e-12)
    fail(ErrorKind::kInvalidArgument, "weight cap " + csv::format_number(ub) + " is infeasible for " +
                                          std::to_string(n) + " assets");
}

QpProblem variance_problem(const Eigen::MatrixXd& sigma, double ub) {
  const auto n = sigma.rows();
  QpProblem p;
  const double scale = sigma.diagonal().mean();
  const double ridge = scale > 0.0 ? 1e-10 * scale : 1e-14;
  p.H = 2.0 * (0.5 * (sigma + sigma.transpose()) + ridge * Eigen::MatrixXd::Identity(n, n));
  p.c = Eigen::VectorXd::Zero(n);
  p.A = Eigen::MatrixXd::Ones(1, n);
  p.b = Eigen::VectorXd::Ones(1);
  p.lower = Eigen::VectorXd::Zero(n);
  p.upper = Eigen::VectorXd::Constant(n, ub);
  return p;
}

// Pull solver round-off back inside the box and onto the budget without leaving it.
Eigen::VectorXd tidy(Eigen::VectorXd w, double ub) {
  w = w.cwiseMax(0.0).cwiseMin(ub);
  for (int pass = 0; pass < 3; ++pass) {
    const double gap = 1.0 - w.sum();
    if (gap == 0.0) break;
    std::vector<Eigen::Index> room;
    for (Eigen::Index i = 0; i < w.size(); ++i)
      if (gap > 0 ? w(i) < ub : w(i) > 0) room.push_back(i);
    if (room.empty()) break;
    for (auto i : room) w(i) += gap / double(room.size());
    w = w.cwiseMax(0.0).cwiseMin(ub);
  }
  return w;
}

AllocationResult solve_variance(const Eigen::MatrixXd& sigma, double ub, const Eigen::VectorXd* mu, double target,
                                const Eigen::VectorXd& start) {
  QpProblem p = variance_problem(sigma, ub);
  if (mu) {
    p.A.conservativeResize(2, Eigen::NoChange);
    p.A.row(1) = mu->transpose();
    p.b.conservativeResize(2);
    p.b(1) = target;
  }
  QpResult qr = solve_qp(p, start);
  AllocationResult out;
  out.iterations = qr.iterations;
  out.kkt_residual = qr.kkt_residual;
  if (!qr.converged) fail(ErrorKind::kNumerical, "variance QP did not converge: " + qr.diagnostics);
  out.weights = tidy(qr.x, ub);
  return out;
}

double quarterly_variance(const Eigen::VectorXd& w, const Eigen::MatrixXd& sigma, double dpq) {
  return std::max(0.0, dpq * w.dot(sigma * w));
}

double sharpe_of(double ret, double var, double rf_q) {
  const double excess = ret - rf_q;
  if (var <= 0.0) return excess > 0 ? std::numeric_limits<double>::infinity()
                                    : (excess < 0 ? -std::numeric_limits<double>::infinity() : 0.0);
  return excess / std::sqrt(var);
}

// Highest attainable μᵀw under the box and budget: fill the best names to the cap.
Eigen::VectorXd max_return_portfolio(const Eigen::VectorXd& mu, double ub) {
  std::vector<Eigen::Index> order(std::size_t(mu.size()));
  std::iota(order.begin(), order.end(), Eigen::Index(0));
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return mu(a) > mu(b); });
  Eigen::VectorXd w = Eigen::VectorXd::Zero(mu.size());
  double left = 1.0;
  for (auto i : order) {
    const double take = std::min(ub, left);
    w(i) = take;
    left -= take;
    if (left <= 0.0) break;
  }
  return w;
}

}  // namespace

AllocationResult min_variance(const Eigen::MatrixXd& sigma, double ub) {
  check_input(sigma, ub, nullptr);
  const auto n = sigma.rows();
  if (n == 1) return {Eigen::VectorXd::Ones(1), 0.0, 0, false, ""};
  return solve_variance(sigma, ub, nullptr, 0.0, equal_weights(std::size_t(n)));
}

double quarterly_rate(double rf_annual) { return std::pow(1.0 + rf_annual, 0.25) - 1.0; }

double portfolio_sharpe(const Eigen::VectorXd& w, const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma,
                        double rf_annual, double dpq) {
  return sharpe_of(mu.dot(w), quarterly_variance(w, sigma, dpq), quarterly_rate(rf_annual));
}

AllocationResult max_sharpe(const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma, double rf_annual, double ub,
                            const MaxSharpeOptions& opt) {
  check_input(sigma, ub, &mu);
  if (opt.frontier_points < 2) fail(ErrorKind::kInvalidArgument, "frontier_points must be at least 2");
  const double rf_q = quarterly_rate(rf_annual);
  const double dpq = opt.days_per_quarter;

  AllocationResult mv = min_variance(sigma, ub);
  if (mu.maxCoeff() <= rf_q) {
    logger()->warn("max_sharpe: no expected return exceeds the quarterly risk-free rate; using min-variance");
    mv.fallback = true;
    mv.note = "no expected return above risk-free";
    return mv;
  }
  const Eigen::VectorXd w_top = max_return_portfolio(mu, ub);
  const double r_lo = mu.dot(mv.weights);
  const double r_hi = mu.dot(w_top);
  if (r_hi <= rf_q) {
    logger()->warn("max_sharpe: no feasible portfolio beats the risk-free rate; using min-variance");
    mv.fallback = true;
    mv.note = "no feasible return above risk-free";
    return mv;
  }
  if (!(r_hi - r_lo > 1e-12 * std::max(1.0, std::abs(r_hi)))) {
    mv.note = "degenerate frontier";
    return mv;
  }

  auto solve_at = [&](double target) -> std::optional<AllocationResult> {
    double t = std::clamp((target - r_lo) / (r_hi - r_lo), 0.0, 1.0);
    Eigen::VectorXd start = (1.0 - t) * mv.weights + t * w_top;
    const double exact = mu.dot(start);
    try {
      return solve_variance(sigma, ub, &mu, exact, start);
    } catch (const Error& e) {
      logger()->debug("max_sharpe: target {} failed: {}", target, e.what());
      return std::nullopt;
    }
  };
  auto score = [&](const AllocationResult& a) { return sharpe_of(mu.dot(a.weights), quarterly_variance(a.weights, sigma, dpq), rf_q); };

  const int k = opt.frontier_points;
  std::vector<double> targets(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) targets[std::size_t(i)] = r_lo + (r_hi - r_lo) * double(i) / double(k - 1);
  std::optional<AllocationResult> best;
  double best_s = -std::numeric_limits<double>::infinity();
  int best_i = -1;
  int max_iter = 0;
  double max_kkt = 0.0;
  for (int i = 0; i < k; ++i) {
    auto a = solve_at(targets[std::size_t(i)]);
    if (!a) continue;
    max_iter = std::max(max_iter, a->iterations);
    max_kkt = std::max(max_kkt, a->kkt_residual);
    const double s = score(*a);
    if (opt.frontier)
      opt.frontier->push_back({targets[std::size_t(i)], mu.dot(a->weights),
                               std::sqrt(quarterly_variance(a->weights, sigma, dpq)), s});
    if (s > best_s) {
      best_s = s;
      best = std::move(a);
      best_i = i;
    }
  }
  if (!best) {
    logger()->warn("max_sharpe: every frontier QP failed; using min-variance");
    mv.fallback = true;
    mv.note = "frontier sweep infeasible";
    return mv;
  }

  if (opt.refine && std::isfinite(best_s)) {
    double a = targets[std::size_t(std::max(0, best_i - 1))];
    double b = targets[std::size_t(std::min(k - 1, best_i + 1))];
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    auto eval = [&](double t) {
      auto r = solve_at(t);
      double s = r ? score(*r) : -std::numeric_limits<double>::infinity();
      if (r && s > best_s) {
        best_s = s;
        best = std::move(r);
      }
      return s;
    };
    double c = b - phi * (b - a), d = a + phi * (b - a);
    double fc = eval(c), fd = eval(d);
    for (int it = 0; it < 80 && (b - a) > 1e-13 * std::max(1.0, std::abs(b)); ++it) {
      if (fc >= fd) {
        b = d;
        d = c;
        fd = fc;
        c = b - phi * (b - a);
        fc = eval(c);
      } else {
        a = c;
        c = d;
        fc = fd;
        d = a + phi * (b - a);
        fd = eval(d);
      }
    }
  }
  best->iterations = max_iter;
  best->kkt_residual = std::max(max_kkt, best->kkt_residual);
  return *best;
}

// ---------------------------------------------------------------------------

PortfolioWeights allocate(const AllocationRequest& req, const CovarianceEstimate* cov) {
  const std::size_t n = req.tickers.size();
  if (n == 0) fail(ErrorKind::kData, "allocate: no tickers to allocate on " + format_date(req.trade_date));
  PortfolioWeights out;
  out.trade_date = req.trade_date;
  out.method = req.method;
  out.tickers = req.tickers;
  const double ub = weight_cap(n, req.ub_base);
  Eigen::VectorXd w;
  if (req.method == AllocationMethod::kEqual) {
    w = equal_weights(n);
  } else {
    if (!cov || cov->tickers != req.tickers)
      fail(ErrorKind::kInvalidArgument, "allocate: covariance does not match the requested tickers");
    AllocationResult r;
    if (req.method == AllocationMethod::kMinVariance) {
      r = min_variance(cov->sigma, ub);
    } else {
      MaxSharpeOptions o;
      o.frontier_points = req.frontier_points;
      r = max_sharpe(req.mu, cov->sigma, req.rf, ub, o);
    }
    if (r.kkt_residual > 1e-6)
      logger()->warn("{} {}: KKT residual {}", format_date(req.trade_date), method_name(req.method), r.kkt_residual);
    w = r.weights;
    out.note = r.note;
  }
  check_weights(w, ub);
  out.weights.assign(w.data(), w.data() + w.size());
  return out;
}

std::string serialize_weights(const std::vector<PortfolioWeights>& all) {
  std::string s = "trade_date,method,ticker,weight\n";
  for (const auto& pw : all)
    for (std::size_t i = 0; i < pw.tickers.size(); ++i)
      s += csv::join({format_date(pw.trade_date), std::string(method_name(pw.method)), pw.tickers[i],
                      csv::format_number(pw.weights[i])}) +
           "\n";
  return s;
}

std::vector<PortfolioWeights> parse_weights(const std::string& text) {
  const auto table = csv::parse(text);
  const auto cd = table.column("trade_date", "weights.csv"), cm = table.column("method", "weights.csv"),
             ct = table.column("ticker", "weights.csv"), cw = table.column("weight", "weights.csv");
  std::vector<PortfolioWeights> out;
  for (const auto& row : table.rows) {
    const Date d = parse_date(row.cells.at(cd));
    const auto m = method_from_name(row.cells.at(cm));
    if (out.empty() || out.back().trade_date != d || out.back().method != m) {
      out.emplace_back();
      out.back().trade_date = d;
      out.back().method = m;
    }
    auto w = csv::parse_number(row.cells.at(cw));
    if (!w) fail(ErrorKind::kParse, "weights.csv line " + std::to_string(row.line) + ": bad weight");
    out.back().tickers.push_back(row.cells.at(ct));
    out.back().weights.push_back(*w);
  }
  return out;
}

}  // namespace dynrec
