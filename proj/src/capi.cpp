#include "dynrec/dynrec.h"

#include <cmath>
#include <limits>
#include <string>

#include "allocation.hpp"
#include "backtest.hpp"
#include "config.hpp"
#include "csv.hpp"
#include "error.hpp"
#include "log.hpp"
#include "pipeline.hpp"
#include "recommender.hpp"
#include "report.hpp"
#include "synth.hpp"

struct dynrec_text {
  std::string value;
};

struct dynrec_model {
  dynrec::models::FittedModel model;
};

namespace {

thread_local std::string last_error;

dynrec_status to_status(dynrec::ErrorKind k) {
  switch (k) {
    case dynrec::ErrorKind::kInvalidArgument: return DYNREC_ERR_INVALID_ARGUMENT;
    case dynrec::ErrorKind::kParse: return DYNREC_ERR_PARSE;
    case dynrec::ErrorKind::kData: return DYNREC_ERR_DATA;
    case dynrec::ErrorKind::kNumerical: return DYNREC_ERR_NUMERICAL;
    case dynrec::ErrorKind::kIo: return DYNREC_ERR_IO;
  }
  return DYNREC_ERR_INTERNAL;
}

template <class F>
dynrec_status guard(F&& f) {
  last_error.clear();
  try {
    f();
    return DYNREC_OK;
  } catch (const dynrec::Error& e) {
    last_error = e.what();
    return to_status(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    last_error = e.what();
    return DYNREC_ERR_IO;
  } catch (const std::exception& e) {
    last_error = e.what();
    return DYNREC_ERR_INTERNAL;
  } catch (...) {
    last_error = "unknown exception";
    return DYNREC_ERR_INTERNAL;
  }
}

void require(bool ok, const char* what) {
  if (!ok) dynrec::fail(dynrec::ErrorKind::kInvalidArgument, what);
}

dynrec_text* make_text(std::string s) { return new dynrec_text{std::move(s)}; }

Eigen::MatrixXd row_major(const double* x, size_t n, size_t p) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < p; ++j) m(Eigen::Index(i), Eigen::Index(j)) = x[i * p + j];
  return m;
}

}  // namespace

extern "C" {

const char* dynrec_last_error(void) { return last_error.c_str(); }

const char* dynrec_status_name(dynrec_status s) {
  switch (s) {
    case DYNREC_OK: return "ok";
    case DYNREC_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case DYNREC_ERR_PARSE: return "parse_error";
    case DYNREC_ERR_DATA: return "data_error";
    case DYNREC_ERR_NUMERICAL: return "numerical_error";
    case DYNREC_ERR_IO: return "io_error";
    case DYNREC_ERR_INTERNAL: return "internal_error";
  }
  return "unknown";
}

int dynrec_exit_code(dynrec_status s) {
  if (s == DYNREC_OK) return 0;
  if (s == DYNREC_ERR_INVALID_ARGUMENT || s == DYNREC_ERR_PARSE) return 1;
  return 2;
}

const char* dynrec_version(void) { return "1.0.0"; }

dynrec_status dynrec_set_log_level(const char* level) {
  return guard([&] {
    require(level, "level is null");
    auto l = spdlog::level::from_str(level);
    if (l == spdlog::level::off && std::string(level) != "off")
      dynrec::fail(dynrec::ErrorKind::kInvalidArgument, std::string("unknown log level '") + level + "'");
    dynrec::set_console_level(l);
  });
}

const char* dynrec_text_data(const dynrec_text* t) { return t ? t->value.c_str() : ""; }
size_t dynrec_text_size(const dynrec_text* t) { return t ? t->value.size() : 0; }
void dynrec_text_free(dynrec_text* t) { delete t; }

dynrec_status dynrec_synth(const char* config_path, const char* out_dir, const uint64_t* seed) {
  return guard([&] {
    require(config_path && out_dir, "config path and output directory are required");
    auto cfg = dynrec::load_synth_config(config_path);
    if (seed) cfg.seed = *seed;
    dynrec::write_synthetic(dynrec::generate_synthetic(cfg), out_dir);
  });
}

dynrec_status dynrec_run(const char* config_path, const char* out_dir, const uint64_t* seed, const char* benchmark) {
  return guard([&] {
    require(config_path && out_dir, "config path and output directory are required");
    auto cfg = dynrec::load_run_config(config_path);
    if (seed) cfg.seed = *seed;
    if (benchmark) cfg.benchmark = std::filesystem::path(benchmark);
    dynrec::cmd_run(cfg, out_dir);
  });
}

dynrec_status dynrec_report(const char* run_dir, const char* benchmark, dynrec_text** summary) {
  return guard([&] {
    require(run_dir, "run directory is required");
    std::optional<std::filesystem::path> b;
    if (benchmark) b = std::filesystem::path(benchmark);
    auto out = dynrec::cmd_report(run_dir, b);
    if (summary) *summary = make_text(out.table);
  });
}

dynrec_status dynrec_model_fit(const char* family, const double* x, const double* y, size_t n, size_t p,
                               const char* const* names, uint64_t seed, const char* hyperparameters,
                               dynrec_model** out) {
  return guard([&] {
    require(family && out, "family and output handle are required");
    require(n > 0 && p > 0 && x && y, "x and y must be non-empty");
    *out = nullptr;
    auto fam = dynrec::models::family_from_name(family);
    if (!fam) dynrec::fail(dynrec::ErrorKind::kInvalidArgument, std::string("unknown model family '") + family + "'");
    auto spec = dynrec::models::ModelSpec::defaults(*fam, seed);
    if (hyperparameters) {
      for (const auto& item : dynrec::csv::split_line(hyperparameters, ';')) {
        if (item.empty()) continue;
        auto eq = item.find('=');
        require(eq != std::string::npos, "hyperparameters must be key=value pairs");
        auto key = dynrec::csv::split_line(item.substr(0, eq)).front();
        auto v = dynrec::csv::parse_number(dynrec::csv::split_line(item.substr(eq + 1)).front());
        if (!v) dynrec::fail(dynrec::ErrorKind::kInvalidArgument, "hyperparameter " + key + " is not a number");
        spec.hyperparameters[key] = *v;
      }
    }
    std::vector<std::string> cols;
    for (size_t j = 0; j < p; ++j) cols.push_back(names && names[j] ? names[j] : "x" + std::to_string(j + 1));
    Eigen::VectorXd yy = Eigen::Map<const Eigen::VectorXd>(y, Eigen::Index(n));
    auto m = dynrec::models::fit(spec, cols, row_major(x, n, p), yy);
    *out = new dynrec_model{std::move(m)};
  });
}

dynrec_status dynrec_model_predict(const dynrec_model* model, const double* x, size_t n, size_t p, double* out) {
  return guard([&] {
    require(model && out && (x || n == 0), "model, x and output are required");
    Eigen::VectorXd pr = dynrec::models::predict(model->model, model->model.factor_names, row_major(x, n, p));
    for (size_t i = 0; i < n; ++i) out[i] = pr(Eigen::Index(i));
  });
}

dynrec_status dynrec_model_inspect(const dynrec_model* model, dynrec_text** out) {
  return guard([&] {
    require(model && out, "model and output are required");
    std::string s;
    for (const auto& e : dynrec::models::inspect(model->model))
      s += e.name + "," + dynrec::csv::format_number(e.value) + "\n";
    *out = make_text(std::move(s));
  });
}

dynrec_status dynrec_model_dump(const dynrec_model* model, dynrec_text** out) {
  return guard([&] {
    require(model && out, "model and output are required");
    *out = make_text(dynrec::models::dump_model(model->model).dump(2));
  });
}

void dynrec_model_free(dynrec_model* model) { delete model; }

size_t dynrec_family_count(void) { return dynrec::models::kAllFamilies.size(); }

const char* dynrec_family_name(size_t index) {
  static const std::array<std::string, 5> names = [] {
    std::array<std::string, 5> a;
    for (size_t i = 0; i < 5; ++i) a[i] = std::string(dynrec::models::family_name(dynrec::models::kAllFamilies[i]));
    return a;
  }();
  return index < names.size() ? names[index].c_str() : nullptr;
}

dynrec_status dynrec_select_model(const double* mse, size_t count, size_t* chosen) {
  return guard([&] {
    require(mse && chosen, "scores and output are required");
    require(count == dynrec::models::kAllFamilies.size(), "expected one score per family");
    std::vector<dynrec::ModelScore> scores;
    for (size_t i = 0; i < count; ++i) scores.push_back({dynrec::models::kAllFamilies[i], mse[i]});
    auto f = dynrec::select_model(scores);
    for (size_t i = 0; i < count; ++i)
      if (dynrec::models::kAllFamilies[i] == f) *chosen = i;
  });
}

dynrec_status dynrec_pick_top(const char* const* tickers, const double* predicted, size_t n, double fraction,
                              size_t* out_indices, size_t* out_count) {
  return guard([&] {
    require(tickers && predicted && out_indices && out_count, "arguments must not be null");
    std::vector<dynrec::Pick> all;
    std::map<std::string, size_t> index;
    for (size_t i = 0; i < n; ++i) {
      require(tickers[i], "null ticker");
      if (!index.emplace(tickers[i], i).second)
        dynrec::fail(dynrec::ErrorKind::kInvalidArgument, std::string("duplicate ticker ") + tickers[i]);
      all.push_back({tickers[i], predicted[i]});
    }
    auto picks = dynrec::pick_top(std::move(all), fraction);
    *out_count = picks.size();
    for (size_t k = 0; k < picks.size(); ++k) out_indices[k] = index[picks[k].ticker];
  });
}

double dynrec_weight_cap(size_t n, double ub_base) { return n == 0 ? ub_base : dynrec::weight_cap(n, ub_base); }

dynrec_status dynrec_min_variance(const double* sigma, size_t n, double ub, double* weights) {
  return guard([&] {
    require(sigma && weights && n > 0, "sigma and weights are required");
    auto r = dynrec::min_variance(row_major(sigma, n, n), ub);
    dynrec::check_weights(r.weights, ub);
    for (size_t i = 0; i < n; ++i) weights[i] = r.weights(Eigen::Index(i));
  });
}

dynrec_status dynrec_max_sharpe(const double* mu, const double* sigma, size_t n, double rf, double ub,
                                int frontier_points, double* weights) {
  return guard([&] {
    require(mu && sigma && weights && n > 0, "mu, sigma and weights are required");
    dynrec::MaxSharpeOptions o;
    if (frontier_points > 0) o.frontier_points = frontier_points;
    Eigen::VectorXd m = Eigen::Map<const Eigen::VectorXd>(mu, Eigen::Index(n));
    auto r = dynrec::max_sharpe(m, row_major(sigma, n, n), rf, ub, o);
    dynrec::check_weights(r.weights, ub);
    for (size_t i = 0; i < n; ++i) weights[i] = r.weights(Eigen::Index(i));
  });
}

dynrec_status dynrec_metrics(const double* values, size_t n, double rf, dynrec_performance* out) {
  return guard([&] {
    require(values && out, "values and output are required");
    auto r = dynrec::metrics(std::vector<double>(values, values + n), rf);
    *out = {r.start_value,       r.end_value,      r.total_return,
            r.max_drawdown,      r.annualized_return, r.annualized_std,
            r.sharpe.value_or(std::numeric_limits<double>::quiet_NaN()), r.sharpe ? 1 : 0};
  });
}

dynrec_status dynrec_sharpe_ratio(double annualized_return, double annualized_std, double rf, double* out) {
  return guard([&] {
    require(out, "output is required");
    auto s = dynrec::sharpe_ratio(annualized_return, annualized_std, rf);
    if (!s) dynrec::fail(dynrec::ErrorKind::kData, "Sharpe ratio undefined for non-positive standard deviation");
    *out = *s;
  });
}

double dynrec_transaction_cost(double share_delta, double price, double rate) {
  return dynrec::transaction_cost(share_delta, price, rate);
}

}  // extern "C"
