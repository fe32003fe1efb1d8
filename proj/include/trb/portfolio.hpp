#pragma once

#include "trb/core/date.hpp"
#include "trb/core/series.hpp"

#include <cstddef>
#include <span>
#include <string>
#include <vector>

/// Mean-variance bond allocation backtest and the economic-value metrics
/// (certainty-equivalent gain, portfolio management fee, cumulative realized
/// utility) used to compare forecast models.
namespace trb::portfolio {

/// Mean-variance weight clip(E/(gamma*Var), low, high).  Monthly decimal
/// inputs; a non-positive variance cannot price risk and is an error.
[[nodiscard]] double mv_weight(double expected_rx, double var_rx, double gamma,
                               double low = -1.0, double high = 5.0);

/// Trailing sample variance (n-1 divisor) of the most recent `window`
/// observations strictly before each date -- the forecast month itself is
/// excluded.  Output starts at the third input date (two priors needed).
/// When even the final value uses fewer than `window` observations a warning
/// notes that all available history was used.
[[nodiscard]] Series rolling_variance(const Series& returns, std::size_t window = 120,
                                      std::vector<std::string>* warnings = nullptr);

/// Realized monthly portfolio return y1m/12 + w * rx, with y1m the
/// annualized one-month yield at the decision date.
[[nodiscard]] double portfolio_return(double weight, double y1m_annual, double rx_monthly);

/// Certainty-equivalent return mu - (gamma/2) * sigma^2 on monthly decimals
/// (population variance), reported as an annualized percent (x1200).
[[nodiscard]] double cer(std::span<const double> returns, double gamma);

/// One strategy's backtest: weights, realized portfolio returns and its CER.
struct BacktestResult {
    Series weights;                  ///< stamped at the return month
    Series returns;                  ///< realized portfolio returns
    std::vector<Date> capped_dates;  ///< months where a weight bound binds
    double cer = 0.0;                ///< annualized percent
};

/// Annualized percent CER difference (model minus benchmark).
[[nodiscard]] double cer_gain(const BacktestResult& model, const BacktestResult& benchmark);

/// Annualized percent management-fee equivalent
///   (1/(1-gamma)) * [ ln mean ((1+r_m)/(1+rf))^{1-gamma}
///                   - ln mean ((1+r_b)/(1+rf))^{1-gamma} ] * 1200,
/// with rf the simple monthly equivalent e^{y1m/12} - 1 of the one-month
/// yield observed the month before each return.  gamma = 1 uses the
/// log-utility limit.  Any 1 + return <= 0 is an error.
[[nodiscard]] double mpp_theta(const Series& model_returns, const Series& bench_returns,
                               const Series& y1m, double gamma);

/// Cumulative difference in realized utilities u_t = r_t - (gamma/2)
/// (r_t - mean)^2, mean taken over the full evaluation sample per strategy.
[[nodiscard]] Series dcru(const Series& model_returns, const Series& bench_returns,
                          double gamma);

/// Run the mean-variance strategy for one maturity: at each forecast date,
/// weight = clip(forecast / (gamma * trailing variance)) where the variance
/// uses up to `var_window` realized returns strictly before that date, and
/// the realized portfolio return compounds the one-month yield plus the
/// weighted excess return.  `realized` must cover every forecast date and
/// the pre-forecast history used by the variance.
[[nodiscard]] BacktestResult backtest(const Series& forecasts, const Series& realized,
                                      const Series& y1m, double gamma, double low = -1.0,
                                      double high = 5.0, std::size_t var_window = 120,
                                      std::vector<std::string>* warnings = nullptr);

} // namespace trb::portfolio
