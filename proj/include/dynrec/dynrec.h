/* dynrec: walk-forward stock recommendation and backtesting engine, C interface. */
#ifndef DYNREC_DYNREC_H
#define DYNREC_DYNREC_H

#include <stddef.h>
#include <stdint.h>

#if defined(DYNREC_BUILDING)
#define DYNREC_API __attribute__((visibility("default")))
#else
#define DYNREC_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum dynrec_status {
  DYNREC_OK = 0,
  DYNREC_ERR_INVALID_ARGUMENT = 1,
  DYNREC_ERR_PARSE = 2,
  DYNREC_ERR_DATA = 3,
  DYNREC_ERR_NUMERICAL = 4,
  DYNREC_ERR_IO = 5,
  DYNREC_ERR_INTERNAL = 6
} dynrec_status;

/* Message of the last failure on the calling thread ("" when none). */
DYNREC_API const char* dynrec_last_error(void);
DYNREC_API const char* dynrec_status_name(dynrec_status status);
/* Process exit code for a status: 0 success, 1 validation (argument, parse), 2 runtime. */
DYNREC_API int dynrec_exit_code(dynrec_status status);
DYNREC_API const char* dynrec_version(void);
/* "trace", "debug", "info", "warn", "error", "off". */
DYNREC_API dynrec_status dynrec_set_log_level(const char* level);

/* Owned string returned by several calls. */
typedef struct dynrec_text dynrec_text;
DYNREC_API const char* dynrec_text_data(const dynrec_text* text);
DYNREC_API size_t dynrec_text_size(const dynrec_text* text);
DYNREC_API void dynrec_text_free(dynrec_text* text);

/* ---- Commands. `seed` may be NULL to keep the config's seed. ---- */
DYNREC_API dynrec_status dynrec_synth(const char* config_path, const char* out_dir, const uint64_t* seed);
/* `benchmark` (date,value CSV) may be NULL; it overrides the config's benchmark. */
DYNREC_API dynrec_status dynrec_run(const char* config_path, const char* out_dir, const uint64_t* seed,
                                    const char* benchmark);
/* Writes pnl.csv and drawdown.csv into `run_dir`; `summary` (optional) receives the table. */
DYNREC_API dynrec_status dynrec_report(const char* run_dir, const char* benchmark, dynrec_text** summary);

/* ---- Models. Families: "ols", "ridge", "stepwise_aic", "random_forest", "gbm". ---- */
typedef struct dynrec_model dynrec_model;

/* `x` is row-major n×p. `names` may be NULL (columns become x1..xp). `hyperparameters` is
   NULL or "key=value;key=value". */
DYNREC_API dynrec_status dynrec_model_fit(const char* family, const double* x, const double* y, size_t n, size_t p,
                                          const char* const* names, uint64_t seed, const char* hyperparameters,
                                          dynrec_model** out);
DYNREC_API dynrec_status dynrec_model_predict(const dynrec_model* model, const double* x, size_t n, size_t p,
                                              double* out);
/* "name,value" lines: coefficients (linear) or importances summing to 100 (trees). */
DYNREC_API dynrec_status dynrec_model_inspect(const dynrec_model* model, dynrec_text** out);
DYNREC_API dynrec_status dynrec_model_dump(const dynrec_model* model, dynrec_text** json);
DYNREC_API void dynrec_model_free(dynrec_model* model);

DYNREC_API size_t dynrec_family_count(void);
/* Family name by priority index (0 = ols ... 4 = gbm); NULL when out of range. */
DYNREC_API const char* dynrec_family_name(size_t index);

/* ---- Recommender. ---- */
/* `mse` holds one score per family in priority order; +inf marks a failed fit, NaN is an error. */
DYNREC_API dynrec_status dynrec_select_model(const double* mse, size_t count, size_t* chosen);
/* `out_indices` (capacity n) receives the picks in descending prediction order. */
DYNREC_API dynrec_status dynrec_pick_top(const char* const* tickers, const double* predicted, size_t n,
                                         double fraction, size_t* out_indices, size_t* out_count);

/* ---- Allocation. `sigma` is row-major n×n of daily returns; `ub` is the weight cap. ---- */
DYNREC_API double dynrec_weight_cap(size_t n, double ub_base);
DYNREC_API dynrec_status dynrec_min_variance(const double* sigma, size_t n, double ub, double* weights);
/* `mu` quarterly expected returns, `rf` annual. */
DYNREC_API dynrec_status dynrec_max_sharpe(const double* mu, const double* sigma, size_t n, double rf, double ub,
                                           int frontier_points, double* weights);

/* ---- Backtest metrics. ---- */
typedef struct dynrec_performance {
  double start_value;
  double end_value;
  double total_return;
  double max_drawdown;
  double annualized_return;
  double annualized_std;
  double sharpe;
  int sharpe_defined; /* 0 when the std is zero */
} dynrec_performance;

DYNREC_API dynrec_status dynrec_metrics(const double* values, size_t n, double rf, dynrec_performance* out);
/* DYNREC_ERR_DATA when `annualized_std` is not positive. */
DYNREC_API dynrec_status dynrec_sharpe_ratio(double annualized_return, double annualized_std, double rf, double* out);
DYNREC_API double dynrec_transaction_cost(double share_delta, double price, double rate);

#ifdef __cplusplus
}
#endif

#endif
