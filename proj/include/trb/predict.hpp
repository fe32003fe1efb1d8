#pragma once

#include "trb/core/config.hpp"
#include "trb/core/date.hpp"
#include "trb/core/series.hpp"
#include "trb/curve.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

/// In-sample predictive regressions with HAC inference, out-of-sample
/// forecast evaluation, and the parametric yield-curve bootstrap used to
/// size-check them.
namespace trb::predict {

struct RegressionResult {
    Eigen::VectorXd coefficients;
    Eigen::MatrixXd x;         ///< design matrix (kept for HAC recomputation)
    Eigen::VectorXd residuals;
    double r2 = 0.0;
    double adj_r2 = 0.0;
    std::size_t nobs = 0;
    std::vector<std::string> names; ///< one per column

    // Filled by with_nw_inference:
    Eigen::MatrixXd nw_cov;
    Eigen::VectorXd t_stats;
    Eigen::VectorXd p_values; ///< two-sided, standard normal
};

/// Least squares via column-pivoted QR.  Rank deficiency is an error naming
/// the dependent columns.  R-squared is centered (about the mean of y).
[[nodiscard]] RegressionResult ols(const Eigen::VectorXd& y, const Eigen::MatrixXd& x,
                                   std::vector<std::string> names = {});

/// Bartlett-kernel HAC covariance, weights 1 - j/(L+1), no small-sample
/// degrees-of-freedom correction.  lags = 0 degenerates to the
/// heteroskedasticity-only sandwich.
[[nodiscard]] Eigen::MatrixXd newey_west_cov(const RegressionResult& result, int lags = 12);

/// Copy of `result` with nw_cov, t_stats and normal two-sided p_values set.
[[nodiscard]] RegressionResult with_nw_inference(RegressionResult result, int lags = 12);

/// Which predictor set enters the forecasting regression alongside the
/// target series.
enum class ModelKind { univ, pc3, pc5 };

/// A named target predictor (the tail-risk series in production) plus named
/// control series, all stamped at the predictor date t.
struct PredictorSet {
    std::string target_name = "tr";
    Series target;
    std::vector<std::pair<std::string, Series>> controls;
};

struct MaturityRegression {
    int maturity_months = 0;
    RegressionResult full;       ///< constant + target + controls
    RegressionResult restricted; ///< constant + controls
    double f_stat = 0.0;         ///< restriction dropping the target
    double f_p = 1.0;
    std::size_t nobs = 0;
};

/// Regress rx_{t+1} on a constant, the target at t and the controls at t,
/// per maturity; months where any predictor is missing are dropped listwise.
/// Also reports the F-test of dropping the target.
[[nodiscard]] std::vector<MaturityRegression> predictive_regression(
    const curve::ReturnPanel& returns, const PredictorSet& predictors, int nw_lags = 12);

/// Out-of-sample forecasts for one maturity.
struct OosResult {
    int maturity_months = 0;
    std::vector<Date> dates; ///< forecast-target stamps t+1
    Eigen::VectorXd model;
    Eigen::VectorXd benchmark;
    Eigen::VectorXd realized;
};

/// Recursive out-of-sample forecasts.  At each origin the coefficients use
/// only returns realized on or before it.  Forecasts start at the first
/// return stamped >= split.  The benchmark is the recursive mean (the
/// expectation-hypothesis forecast) when there are no controls, otherwise
/// the controls-only regression.  Under WindowPolicy::rolling the window
/// length is fixed at the initial training span.
[[nodiscard]] std::vector<OosResult> oos_forecast(const curve::ReturnPanel& returns,
                                                  const PredictorSet& predictors,
                                                  WindowPolicy window, const Date& split);

/// Pipeline variant for PC controls: principal components are re-estimated
/// from the yield panel inside every training window (no look-ahead).
/// kind univ uses no controls; pc3/pc5 use that many yield PCs.
[[nodiscard]] std::vector<OosResult> oos_forecast_pc(const curve::YieldPanel& yields,
                                                     const Series& target, ModelKind kind,
                                                     const std::vector<int>& maturities,
                                                     WindowPolicy window, const Date& split);

/// Out-of-sample R^2: 1 - SSE_model / SSE_benchmark.
[[nodiscard]] double r2_os(const Eigen::VectorXd& model, const Eigen::VectorXd& benchmark,
                           const Eigen::VectorXd& realized);

/// Per-period Clark-West adjusted loss differentials
///   cw_t = (r-b)^2 - [ (r-m)^2 - (b-m)^2 ].
[[nodiscard]] Eigen::VectorXd clark_west_terms(const Eigen::VectorXd& model,
                                               const Eigen::VectorXd& benchmark,
                                               const Eigen::VectorXd& realized);

struct CwTest {
    double stat = 0.0; ///< NW t-statistic of the mean CW term
    double p = 1.0;    ///< one-sided upper tail, standard normal
};

/// Clark-West MSPE-adjusted test via the t-statistic of regressing the CW
/// terms on a constant with Newey-West errors.  A zero-variance CW series
/// (model identical to benchmark) is an error.
[[nodiscard]] CwTest clark_west(const Eigen::VectorXd& model, const Eigen::VectorXd& benchmark,
                                const Eigen::VectorXd& realized, int nw_lags = 12);

/// Cumulative sum of (benchmark error^2 - model error^2).
[[nodiscard]] Eigen::VectorXd dcspe(const Eigen::VectorXd& model,
                                    const Eigen::VectorXd& benchmark,
                                    const Eigen::VectorXd& realized);

enum class BhStat { coef_t, cw, r2_os };

struct BhResult {
    std::vector<int> maturities;
    std::vector<double> observed; ///< the statistic on the real data
    std::vector<double> p_boot;   ///< add-one p-values (1 + #{>= obs}) / (B + 1)
    bool var_shrunk = false;      ///< VAR eigenvalues rescaled for stability
};

/// Parametric yield-curve bootstrap under the null that the target series
/// has no predictive power beyond the curve:
///   1. three PCs of the observed panel, VAR(1) on the scores,
///   2. an independent AR(1) for the target,
///   3. simulated samples rebuilt with iid row-resampled residuals, yields
///      from fixed loadings plus resampled measurement errors,
///   4. the statistic recomputed per sample; coef_t compares |stat|
///      two-sided, cw and r2_os compare one-sided upper.
/// An unstable fitted VAR is rescaled by 0.99/rho with a warning.
/// Deterministic given (B, seed) regardless of thread count.
[[nodiscard]] BhResult bh_bootstrap(const curve::YieldPanel& yields, const Series& target,
                                    ModelKind kind, const std::vector<int>& maturities,
                                    BhStat stat, WindowPolicy window, const Date& split, int B,
                                    std::uint64_t seed, int nw_lags = 12, int threads = 1,
                                    std::vector<std::string>* warnings = nullptr);

} // namespace trb::predict
