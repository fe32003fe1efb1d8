#pragma once

#include "trb/core/date.hpp"
#include "trb/core/series.hpp"
#include "trb/curve.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

/// Gaussian affine term-structure model estimated by three regression steps:
/// a VAR(1) for the pricing factors, per-maturity excess-return regressions
/// on the VAR innovations and lagged factors, and a cross-sectional
/// regression that maps the return coefficients into market prices of risk.
/// No-arbitrage recursions then turn the parameters into fitted,
/// risk-neutral and term-premium yield panels.
namespace trb::atsm {

/// Monthly panel of pricing factors: one row per date, one column per
/// factor.  `means`/`scales` record the affine standardization applied to
/// each column so downstream output can be mapped back to original units.
struct FactorPanel {
    std::vector<Date> dates;
    std::vector<std::string> names;
    Eigen::MatrixXd values; ///< dates.size() x K
    Eigen::VectorXd means;  ///< per-column centering constants
    Eigen::VectorXd scales; ///< per-column scale divisors
};

/// State vector [tail-risk factor, pc1..pc5 of the yield panel
/// orthogonalized to it], each column standardized to zero mean and unit
/// variance over the full sample.  Every panel month must carry a tail-risk
/// value; missing months are listed in the error.
[[nodiscard]] FactorPanel build_state(const Series& tail_risk, const curve::YieldPanel& yields);

/// First-step VAR(1) estimates.  Column t of `innovations` holds the fitted
/// residual for the transition into date t+1, so it lines up with the
/// excess-return row stamped t+1.
struct VarEstimate {
    Eigen::VectorXd mu;          ///< K, zero when fit with zero_mean
    Eigen::MatrixXd phi;         ///< K x K
    Eigen::MatrixXd sigma;       ///< innovation covariance, V V' / T
    Eigen::MatrixXd innovations; ///< K x (T-1)
};

/// Equation-by-equation OLS of X_{t+1} on X_t (plus a constant unless
/// zero_mean, which pins mu to zero for pre-standardized factors).  An
/// explosive estimate is reported through `warnings`, never an error:
/// the regression itself needs no stationarity.
[[nodiscard]] VarEstimate fit_var(const FactorPanel& x, bool zero_mean,
                                  std::vector<std::string>* warnings = nullptr);

/// Second-step coefficients of the per-maturity regressions of excess
/// returns on [1, innovations, lagged factors].
struct ReturnRegression {
    Eigen::VectorXd a;         ///< N intercepts
    Eigen::MatrixXd beta;      ///< K x N innovation loadings
    Eigen::MatrixXd c;         ///< N x K lagged-factor slopes
    double sigma2 = 0.0;       ///< tr(E E') / (N T)
    Eigen::MatrixXd residuals; ///< N x T
};

/// rx is N x T (one row per purchase maturity, one column per month),
/// vhat is K x T, x_lagged is K x T with column t holding the factor value
/// at the purchase date.  Requires T > 2K + 1 and full-rank regressors.
[[nodiscard]] ReturnRegression return_regression(const Eigen::MatrixXd& rx,
                                                 const Eigen::MatrixXd& vhat,
                                                 const Eigen::MatrixXd& x_lagged);

struct PriceOfRisk {
    Eigen::VectorXd lambda0; ///< K
    Eigen::MatrixXd lambda1; ///< K x K
};

/// Third-step cross-sectional regressions:
///   lambda0 solves beta' l = a + (conv + sigma2)/2 in least squares,
///   lambda1 solves beta' L = c, with conv_n = beta_n' Sigma beta_n.
/// Solved through a QR factorization of beta'; fewer independent maturities
/// than factors is an error.
[[nodiscard]] PriceOfRisk price_of_risk(const Eigen::VectorXd& a, const Eigen::MatrixXd& beta,
                                        const Eigen::MatrixXd& c, const Eigen::MatrixXd& sigma,
                                        double sigma2);

struct ShortRateFit {
    double delta0 = 0.0;
    Eigen::VectorXd delta1;
    double resid_variance = 0.0; ///< RSS / (T - K - 1)
};

/// OLS of the monthly short rate on a constant and the factors.  The input
/// series carries the annualized one-month yield; it is divided by 12
/// inside.  Every factor month must have a yield value.
[[nodiscard]] ShortRateFit short_rate_regression(const Series& y1m, const FactorPanel& x);

/// Full parameter set.  All recursion quantities are monthly: a[n-1] and
/// b.row(n-1) give the log-price coefficients of the n-month bond, and the
/// monthly yield is -(a_n + b_n' X)/n.  a_rn/b_rn repeat the recursion with
/// both prices of risk set to zero.
struct AtsmModel {
    int K = 0;
    Eigen::VectorXd mu;
    Eigen::MatrixXd phi;
    Eigen::MatrixXd sigma;
    Eigen::VectorXd lambda0;
    Eigen::MatrixXd lambda1;
    double sigma2 = 0.0; ///< pooled return pricing-error variance
    double delta0 = 0.0;
    Eigen::VectorXd delta1;
    Eigen::MatrixXd beta;                ///< K x N return loadings
    std::vector<int> return_maturities;  ///< purchase maturities behind beta
    Eigen::VectorXd a;                   ///< a_1..a_{n_max}
    Eigen::MatrixXd b;                   ///< n_max x K, row n-1 = b_n'
    Eigen::VectorXd a_rn;
    Eigen::MatrixXd b_rn;
};

struct RecursionCoefficients {
    Eigen::VectorXd a;
    Eigen::MatrixXd b;
    Eigen::VectorXd a_rn;
    Eigen::MatrixXd b_rn;
};

/// No-arbitrage recursions for n = 1..n_max:
///   a_1 = -delta0, b_1 = -delta1,
///   a_n = a_{n-1} + b_{n-1}'(mu - lambda0)
///         + (b_{n-1}' Sigma b_{n-1} + sigma2)/2 - delta0,
///   b_n' = b_{n-1}'(phi - lambda1) - delta1'.
/// The risk-neutral pair repeats this with lambda0 = 0, lambda1 = 0.
[[nodiscard]] RecursionCoefficients yield_recursions(const AtsmModel& model, int n_max);

/// Fitted model panels.  All yield panels are annualized (monthly yields
/// times 12) and term_premia is fitted_yields - rn_yields exactly.
struct AtsmFit {
    AtsmModel model;
    FactorPanel state;
    std::vector<Date> dates;
    std::vector<int> maturities;
    Eigen::MatrixXd fitted_yields; ///< dates x maturities
    Eigen::MatrixXd rn_yields;
    Eigen::MatrixXd term_premia;
    Eigen::MatrixXd yield_errors;  ///< observed - fitted
    Eigen::MatrixXd return_errors; ///< N x T step-two residuals (filled by estimate())
};

/// Evaluate the attached recursions at the observed panel's maturities:
/// fitted y = -12 (a_n + b_n' X_t)/n, u = observed - fitted.  The model's
/// recursions must extend to the longest observed maturity, and the factor
/// panel must share the observed dates.
[[nodiscard]] AtsmFit fit_yields(const AtsmModel& model, const FactorPanel& x,
                                 const curve::YieldPanel& observed);

struct WaldTest {
    double stat = 0.0;
    double p = 1.0;
};

/// Per-factor test that the return loadings on factor i are jointly zero
/// across the N maturities: W = sum_n beta(i,n)^2 / var(i,n), chi-square(N).
/// `var_beta` holds positive per-coefficient variances shaped like beta.
[[nodiscard]] std::vector<WaldTest> wald_spanning(const Eigen::MatrixXd& beta,
                                                  const Eigen::MatrixXd& var_beta);

/// Heteroskedasticity-robust (HC0) variances of the innovation loadings,
/// equation by equation, shaped like beta (K x N).
[[nodiscard]] Eigen::MatrixXd beta_variances(const ReturnRegression& fit,
                                             const Eigen::MatrixXd& vhat,
                                             const Eigen::MatrixXd& x_lagged);

struct PriceRiskWald {
    std::vector<WaldTest> joint;        ///< H0: row i of [lambda0 lambda1] = 0, chi-square(K+1)
    std::vector<WaldTest> time_varying; ///< H0: row i of lambda1 = 0, chi-square(K)
};

/// Row-by-row Wald tests on Lambda = [lambda0 lambda1] (K x (K+1)) with
/// per-entry variances var_lambda of the same shape.
[[nodiscard]] PriceRiskWald wald_prices(const Eigen::MatrixXd& lambda,
                                        const Eigen::MatrixXd& var_lambda);

/// Elementwise bootstrap variances for Lambda = [lambda0 lambda1]: the
/// second-step residuals are resampled in circular time blocks (all
/// maturities jointly, preserving the cross-section), returns are rebuilt
/// as fitted + resampled residuals, and steps two and three are re-run on
/// each of the B replications.  Replication r draws from stream 1 + r of
/// the seed, so results are identical for every thread count.
[[nodiscard]] Eigen::MatrixXd lambda_variances(const ReturnRegression& fit,
                                               const Eigen::MatrixXd& vhat,
                                               const Eigen::MatrixXd& x_lagged,
                                               const Eigen::MatrixXd& sigma, int block = 12,
                                               int reps = 999, std::uint64_t seed = 1,
                                               int threads = 1);

/// Per-maturity contribution of one factor to the fitted, risk-neutral and
/// term-premium panels: -12 b_n[i] X_t[i] / n (b_rn for the risk-neutral
/// analog, difference for the premium).  Summing the contributions of all
/// factors plus intercept_contribution reconstructs the panels exactly.
struct FactorContribution {
    Eigen::MatrixXd fitted;
    Eigen::MatrixXd rn;
    Eigen::MatrixXd term_premium;
};

[[nodiscard]] FactorContribution factor_contribution(const AtsmFit& fit, int factor);

/// The factor-free terms -12 a_n / n and the risk-neutral analog, constant
/// over dates.
[[nodiscard]] FactorContribution intercept_contribution(const AtsmFit& fit);

/// Descriptive row for a pricing-error column: mean, standard deviation,
/// skewness, kurtosis and autocorrelations at lags one and six.
struct ErrorStats {
    int maturity_months = 0;
    double mean = 0.0;
    double sd = 0.0;
    double skewness = 0.0;
    double kurtosis = 0.0;
    double rho1 = 0.0;
    double rho6 = 0.0;
};

[[nodiscard]] std::vector<ErrorStats> error_summary(const std::vector<int>& maturities,
                                                    const Eigen::MatrixXd& errors);

/// Exact simulator for tests and calibration studies: draws the factor VAR
/// (200 burn-in months from the origin), prices yields exactly through the
/// model's recursions, and builds one-month excess returns from those
/// yields plus, when sigma2 > 0, an independent pricing error of that
/// variance.  The true innovations are returned for oracle regressions.
struct SimulatedAtsm {
    FactorPanel state;
    curve::YieldPanel yields;
    curve::ReturnPanel returns;
    Eigen::MatrixXd innovations; ///< K x (T-1), true VAR shocks
};

[[nodiscard]] SimulatedAtsm simulate(const AtsmModel& model, int months,
                                     const std::vector<int>& yield_maturities,
                                     const std::vector<int>& return_maturities,
                                     std::uint64_t seed);

struct EstimateOptions {
    std::vector<int> return_maturities; ///< default 6, 12, ..., 120
    std::vector<int> pc_maturities;     ///< default 3, 6, ..., 120
    int n_max = 120;                    ///< recursion horizon, months
    int block_length = 12;              ///< bootstrap block for Lambda variances
    int bootstrap_reps = 999;
    std::uint64_t seed = 1;
    int threads = 1;
    /// false drops the tail-risk series and prices with the five plain
    /// yield PCs only (the benchmark specification); the series argument
    /// of estimate() is then ignored.
    bool include_tail = true;
};

/// Full pipeline output: the fit plus both Wald tables and the price-of-risk
/// matrix [lambda0 lambda1] with its bootstrap variances.
struct EstimateResult {
    AtsmFit fit;
    ReturnRegression step2;
    Eigen::MatrixXd lambda;     ///< K x (K+1)
    Eigen::MatrixXd lambda_var; ///< same shape, bootstrap variances
    std::vector<WaldTest> spanning;
    PriceRiskWald prices;
};

/// Build the state, run the three regression steps, attach the recursions
/// and fit the curve.  The panel must carry maturity 1 (monthly short
/// rate), every pc maturity, and n with n-1 for every return maturity.
[[nodiscard]] EstimateResult estimate(const Series& tail_risk, const curve::YieldPanel& yields,
                                      const EstimateOptions& options = {},
                                      std::vector<std::string>* warnings = nullptr);

} // namespace trb::atsm
