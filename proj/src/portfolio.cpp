#include "trb/portfolio.hpp"

#include "trb/core/errors.hpp"
#include "trb/core/stats.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

namespace trb::portfolio {

namespace {

/// Simple monthly equivalent of an annualized continuously-compounded yield.
[[nodiscard]] double monthly_simple(double y1m_annual) { return std::expm1(y1m_annual / 12.0); }

/// Power-utility certainty terms mean((1+r)/(1+rf))^(1-gamma) in log form,
/// with the gamma = 1 branch returning mean log growth directly.
[[nodiscard]] double log_growth_term(const Series& returns, const Series& y1m, double gamma) {
    double acc = 0.0;
    for (std::size_t i = 0; i < returns.size(); ++i) {
        const Date d = returns.dates()[i];
        const auto y = y1m.in_month(d.add_months(-1));
        if (!y)
            throw ValidationError("mpp_theta: one-month yield missing in the month before " +
                                  d.str());
        const double gross = 1.0 + returns.values()[i];
        if (gross <= 0.0)
            throw NumericError("mpp_theta: return of " + std::to_string(returns.values()[i]) +
                               " at " + d.str() + " leaves no wealth to value");
        const double ratio = gross / (1.0 + monthly_simple(*y));
        acc += gamma == 1.0 ? std::log(ratio) : std::pow(ratio, 1.0 - gamma);
    }
    const double n = static_cast<double>(returns.size());
    return gamma == 1.0 ? acc / n : std::log(acc / n);
}

} // namespace

double mv_weight(double expected_rx, double var_rx, double gamma, double low, double high) {
    if (gamma <= 0.0) throw ValidationError("mv_weight: risk aversion must be positive");
    if (low > high) throw ValidationError("mv_weight: weight bounds are inverted");
    if (!(var_rx > 0.0))
        throw NumericError("mv_weight: non-positive return variance cannot price risk");
    return std::clamp(expected_rx / (gamma * var_rx), low, high);
}

Series rolling_variance(const Series& returns, std::size_t window,
                        std::vector<std::string>* warnings) {
    if (window < 2) throw ValidationError("rolling_variance: window must cover two months");
    if (returns.size() < 2)
        throw ValidationError("rolling_variance: need at least two observations");
    Series out({}, {}, returns.name().empty() ? "variance" : returns.name() + "_variance");
    const auto& vals = returns.values();
    for (std::size_t i = 2; i < returns.size(); ++i) {
        const std::size_t lo = i >= window ? i - window : 0;
        out.push_back(returns.dates()[i],
                      stats::variance(std::span<const double>(vals).subspan(lo, i - lo)));
    }
    if (warnings && returns.size() >= 3 && returns.size() - 1 < window)
        warnings->push_back("rolling_variance: window of " + std::to_string(window) +
                            " months exceeds the " + std::to_string(returns.size() - 1) +
                            " months of history; using all history");
    return out;
}

double portfolio_return(double weight, double y1m_annual, double rx_monthly) {
    return y1m_annual / 12.0 + weight * rx_monthly;
}

double cer(std::span<const double> returns, double gamma) {
    if (returns.empty()) throw ValidationError("cer: no portfolio returns");
    const double mu = stats::mean(returns);
    const double var = stats::variance_pop(returns);
    return (mu - 0.5 * gamma * var) * 1200.0;
}

double cer_gain(const BacktestResult& model, const BacktestResult& benchmark) {
    return model.cer - benchmark.cer;
}

double mpp_theta(const Series& model_returns, const Series& bench_returns, const Series& y1m,
                 double gamma) {
    if (model_returns.dates() != bench_returns.dates())
        throw ValidationError("mpp_theta: model and benchmark returns are misaligned");
    if (model_returns.empty()) throw ValidationError("mpp_theta: no returns to compare");
    if (gamma <= 0.0) throw ValidationError("mpp_theta: risk aversion must be positive");
    const double m = log_growth_term(model_returns, y1m, gamma);
    const double b = log_growth_term(bench_returns, y1m, gamma);
    const double theta = gamma == 1.0 ? m - b : (m - b) / (1.0 - gamma);
    return theta * 1200.0;
}

Series dcru(const Series& model_returns, const Series& bench_returns, double gamma) {
    if (model_returns.dates() != bench_returns.dates())
        throw ValidationError("dcru: model and benchmark returns are misaligned");
    if (model_returns.empty()) throw ValidationError("dcru: no returns to compare");
    const double mu_m = stats::mean(model_returns.values());
    const double mu_b = stats::mean(bench_returns.values());
    Series out({}, {}, "dcru");
    double acc = 0.0;
    for (std::size_t i = 0; i < model_returns.size(); ++i) {
        const double rm = model_returns.values()[i];
        const double rb = bench_returns.values()[i];
        const double um = rm - 0.5 * gamma * (rm - mu_m) * (rm - mu_m);
        const double ub = rb - 0.5 * gamma * (rb - mu_b) * (rb - mu_b);
        acc += um - ub;
        out.push_back(model_returns.dates()[i], acc);
    }
    return out;
}

BacktestResult backtest(const Series& forecasts, const Series& realized, const Series& y1m,
                        double gamma, double low, double high, std::size_t var_window,
                        std::vector<std::string>* warnings) {
    if (forecasts.empty()) throw ValidationError("backtest: no forecasts");
    if (var_window < 2) throw ValidationError("backtest: variance window must cover two months");

    BacktestResult res;
    res.weights = Series({}, {}, "weight");
    res.returns = Series({}, {}, "portfolio_return");
    const auto& dates = realized.dates();
    const auto& vals = realized.values();
    bool warned_short = false;

    for (std::size_t i = 0; i < forecasts.size(); ++i) {
        const Date d = forecasts.dates()[i];
        const auto pos_it = std::lower_bound(dates.begin(), dates.end(), d);
        if (pos_it == dates.end() || !(*pos_it == d))
            throw ValidationError("backtest: no realized return at forecast date " + d.str());
        const auto pos = static_cast<std::size_t>(pos_it - dates.begin());
        if (pos < 2)
            throw ValidationError("backtest: fewer than two returns precede " + d.str() +
                                  "; variance unavailable");
        const std::size_t lo = pos >= var_window ? pos - var_window : 0;
        if (pos - lo < var_window && warnings && !warned_short) {
            warnings->push_back("backtest: variance at " + d.str() + " uses only " +
                                std::to_string(pos - lo) + " of " +
                                std::to_string(var_window) + " months of history");
            warned_short = true;
        }
        const double var =
            stats::variance(std::span<const double>(vals).subspan(lo, pos - lo));
        const double w = mv_weight(forecasts.values()[i], var, gamma, low, high);
        if (w == low || w == high) res.capped_dates.push_back(d);

        const auto y = y1m.in_month(d.add_months(-1));
        if (!y)
            throw ValidationError("backtest: one-month yield missing in the month before " +
                                  d.str());
        res.weights.push_back(d, w);
        res.returns.push_back(d, portfolio_return(w, *y, vals[pos]));
    }
    res.cer = cer(res.returns.values(), gamma);
    return res;
}

} // namespace trb::portfolio
