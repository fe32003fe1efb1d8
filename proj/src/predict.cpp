#include "trb/predict.hpp"

#include "trb/core/errors.hpp"
#include "trb/core/parallel.hpp"
#include "trb/core/rng.hpp"

#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/normal.hpp>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace trb::predict {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

[[nodiscard]] double normal_upper_p(double t) {
    static const boost::math::normal_distribution<double> norm;
    return boost::math::cdf(boost::math::complement(norm, t));
}

[[nodiscard]] int pcs_for(ModelKind kind) {
    switch (kind) {
    case ModelKind::univ: return 0;
    case ModelKind::pc3: return 3;
    case ModelKind::pc5: return 5;
    }
    throw ValidationError("unknown model kind");
}

/// Predictor values month-aligned to return stamps: row i holds the values
/// dated one month before returns.dates[i].  Rows with any missing value are
/// reported through `ok`; `require_all` turns them into errors instead.
struct AlignedPredictors {
    MatrixXd values;       ///< rows x (1 target + controls)
    std::vector<bool> ok;  ///< row has every predictor
    std::vector<std::string> names; ///< target name then control names
};

[[nodiscard]] AlignedPredictors align_predictors(const curve::ReturnPanel& returns,
                                                 const PredictorSet& predictors,
                                                 bool require_all) {
    const std::size_t t = returns.dates.size();
    const std::size_t p = 1 + predictors.controls.size();
    AlignedPredictors out;
    out.values.resize(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(p));
    out.ok.assign(t, true);
    out.names.push_back(predictors.target_name.empty() ? "tr" : predictors.target_name);
    for (const auto& [name, series] : predictors.controls) out.names.push_back(name);

    for (std::size_t i = 0; i < t; ++i) {
        const Date month = returns.dates[i].add_months(-1);
        const auto fill = [&](std::size_t col, const Series& s, const std::string& name) {
            const auto v = s.in_month(month);
            if (!v) {
                if (require_all)
                    throw ValidationError("predictor '" + name + "' missing in the month before " +
                                          returns.dates[i].str());
                out.ok[i] = false;
                return;
            }
            out.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(col)) = *v;
        };
        fill(0, predictors.target, out.names[0]);
        for (std::size_t c = 0; c < predictors.controls.size(); ++c)
            fill(1 + c, predictors.controls[c].second, out.names[1 + c]);
    }
    return out;
}

/// Fit y on a constant plus the selected predictor columns over rows
/// [lo, hi) and forecast at row `at`.  Columns that are constant over the
/// window carry no identifiable weight and are dropped, so a degenerate
/// model collapses to its own benchmark.
[[nodiscard]] double window_forecast(const MatrixXd& preds, const VectorXd& y,
                                     const std::vector<Eigen::Index>& cols, std::size_t lo,
                                     std::size_t hi, std::size_t at) {
    const auto n = static_cast<Eigen::Index>(hi - lo);
    std::vector<Eigen::Index> keep;
    for (const auto c : cols) {
        double mn = preds(static_cast<Eigen::Index>(lo), c);
        double mx = mn;
        for (std::size_t i = lo + 1; i < hi; ++i) {
            mn = std::min(mn, preds(static_cast<Eigen::Index>(i), c));
            mx = std::max(mx, preds(static_cast<Eigen::Index>(i), c));
        }
        if (mx > mn) keep.push_back(c);
    }
    MatrixXd x(n, 1 + static_cast<Eigen::Index>(keep.size()));
    VectorXd yw(n);
    for (std::size_t i = lo; i < hi; ++i) {
        const auto r = static_cast<Eigen::Index>(i - lo);
        x(r, 0) = 1.0;
        for (std::size_t j = 0; j < keep.size(); ++j)
            x(r, 1 + static_cast<Eigen::Index>(j)) = preds(static_cast<Eigen::Index>(i), keep[j]);
        yw(r) = y(static_cast<Eigen::Index>(i));
    }
    const auto fit = ols(yw, x);
    double forecast = fit.coefficients(0);
    for (std::size_t j = 0; j < keep.size(); ++j)
        forecast += fit.coefficients(1 + static_cast<Eigen::Index>(j)) *
                    preds(static_cast<Eigen::Index>(at), keep[j]);
    return forecast;
}

/// First forecast row: the earliest return stamped on or after the split.
[[nodiscard]] std::size_t first_forecast_row(const std::vector<Date>& stamps, const Date& split,
                                             std::size_t ncols_needed) {
    std::size_t i0 = 0;
    while (i0 < stamps.size() && stamps[i0] < split) ++i0;
    if (i0 == stamps.size())
        throw ValidationError("out-of-sample split " + split.str() + " lies after the last return");
    if (i0 == 0)
        throw ValidationError("out-of-sample split " + split.str() +
                              " leaves no training observations");
    if (i0 < ncols_needed + 2)
        throw ValidationError("initial training window has " + std::to_string(i0) +
                              " observations; need at least " + std::to_string(ncols_needed + 2));
    return i0;
}

[[nodiscard]] std::size_t draw_index(Rng& rng, std::size_t n) {
    const auto i = static_cast<std::size_t>(rng.uniform() * static_cast<double>(n));
    return i >= n ? n - 1 : i;
}

/// The scalar statistic the bootstrap resamples, one entry per maturity.
[[nodiscard]] std::vector<double> bh_statistic(const curve::YieldPanel& panel,
                                               const Series& target, ModelKind kind,
                                               const std::vector<int>& maturities, BhStat stat,
                                               WindowPolicy window, const Date& split,
                                               int nw_lags) {
    std::vector<double> out;
    out.reserve(maturities.size());
    if (stat == BhStat::coef_t) {
        const auto rx = curve::excess_returns(panel, maturities);
        PredictorSet ps;
        ps.target_name = target.name().empty() ? "tr" : target.name();
        ps.target = target;
        const int k = pcs_for(kind);
        if (k > 0) {
            const auto comp = curve::pca(panel, k);
            for (int j = 0; j < k; ++j) {
                std::vector<double> vals(panel.dates.size());
                for (std::size_t i = 0; i < vals.size(); ++i)
                    vals[i] = comp.scores(static_cast<Eigen::Index>(i), j);
                ps.controls.emplace_back("pc" + std::to_string(j + 1),
                                         Series(panel.dates, std::move(vals),
                                                "pc" + std::to_string(j + 1)));
            }
        }
        const auto regs = predictive_regression(rx, ps, nw_lags);
        for (const auto& reg : regs) out.push_back(reg.full.t_stats(1));
        return out;
    }
    const auto oos = oos_forecast_pc(panel, target, kind, maturities, window, split);
    for (const auto& o : oos) {
        if (stat == BhStat::cw)
            out.push_back(clark_west(o.model, o.benchmark, o.realized, nw_lags).stat);
        else
            out.push_back(r2_os(o.model, o.benchmark, o.realized));
    }
    return out;
}

} // namespace

RegressionResult ols(const VectorXd& y, const MatrixXd& x, std::vector<std::string> names) {
    const Eigen::Index n = x.rows();
    const Eigen::Index k = x.cols();
    if (y.size() != n) throw ValidationError("ols: response and design row counts differ");
    if (k == 0) throw ValidationError("ols: design matrix has no columns");
    if (n <= k)
        throw ValidationError("ols: need more observations than columns (have " +
                              std::to_string(n) + " rows, " + std::to_string(k) + " columns)");
    if (names.empty())
        for (Eigen::Index j = 0; j < k; ++j) names.push_back("b" + std::to_string(j));
    if (names.size() != static_cast<std::size_t>(k))
        throw ValidationError("ols: need one column name per design column");

    Eigen::ColPivHouseholderQR<MatrixXd> qr(x);
    if (qr.rank() < k) {
        const auto& perm = qr.colsPermutation().indices();
        std::string cols;
        for (Eigen::Index j = qr.rank(); j < k; ++j) {
            if (!cols.empty()) cols += ", ";
            cols += names[static_cast<std::size_t>(perm(j))];
        }
        throw ValidationError("ols: collinear columns: " + cols);
    }

    RegressionResult res;
    res.coefficients = qr.solve(y);
    res.x = x;
    res.residuals = y - x * res.coefficients;
    res.nobs = static_cast<std::size_t>(n);
    res.names = std::move(names);
    const double rss = res.residuals.squaredNorm();
    const double tss = (y.array() - y.mean()).matrix().squaredNorm();
    res.r2 = tss > 0.0 ? 1.0 - rss / tss : 1.0;
    res.adj_r2 = 1.0 - (1.0 - res.r2) * (static_cast<double>(n) - 1.0) /
                           (static_cast<double>(n) - static_cast<double>(k));
    return res;
}

MatrixXd newey_west_cov(const RegressionResult& result, int lags) {
    const Eigen::Index n = result.x.rows();
    const Eigen::Index k = result.x.cols();
    if (n == 0 || result.residuals.size() != n)
        throw ValidationError("newey_west_cov: result lacks its design and residuals");
    if (lags < 0) throw ValidationError("newey_west_cov: lag count must be nonnegative");
    if (lags >= n)
        throw ValidationError("newey_west_cov: " + std::to_string(lags) +
                              " lags with only " + std::to_string(n) + " observations");

    const MatrixXd& x = result.x;
    const VectorXd& e = result.residuals;
    MatrixXd meat = MatrixXd::Zero(k, k);
    for (Eigen::Index t = 0; t < n; ++t)
        meat.noalias() += e(t) * e(t) * x.row(t).transpose() * x.row(t);
    for (int j = 1; j <= lags; ++j) {
        const double w = 1.0 - static_cast<double>(j) / (static_cast<double>(lags) + 1.0);
        MatrixXd gamma = MatrixXd::Zero(k, k);
        for (Eigen::Index t = j; t < n; ++t)
            gamma.noalias() += e(t) * e(t - j) * x.row(t).transpose() * x.row(t - j);
        meat.noalias() += w * (gamma + gamma.transpose());
    }
    const MatrixXd bread = (x.transpose() * x).inverse();
    return bread * meat * bread;
}

RegressionResult with_nw_inference(RegressionResult result, int lags) {
    result.nw_cov = newey_west_cov(result, lags);
    const Eigen::Index k = result.coefficients.size();
    result.t_stats.resize(k);
    result.p_values.resize(k);
    for (Eigen::Index j = 0; j < k; ++j) {
        const double var = result.nw_cov(j, j);
        if (!(var > 0.0))
            throw NumericError("degenerate HAC variance for coefficient '" +
                               result.names[static_cast<std::size_t>(j)] + "'");
        result.t_stats(j) = result.coefficients(j) / std::sqrt(var);
        result.p_values(j) = 2.0 * normal_upper_p(std::abs(result.t_stats(j)));
    }
    return result;
}

std::vector<MaturityRegression> predictive_regression(const curve::ReturnPanel& returns,
                                                      const PredictorSet& predictors,
                                                      int nw_lags) {
    if (returns.dates.empty()) throw ValidationError("predictive_regression: empty return panel");
    const auto aligned = align_predictors(returns, predictors, /*require_all=*/false);
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < aligned.ok.size(); ++i)
        if (aligned.ok[i]) rows.push_back(i);

    const std::size_t p = aligned.names.size();
    const std::size_t k_full = 1 + p;
    if (rows.size() < k_full + 2)
        throw ValidationError("predictive_regression: only " + std::to_string(rows.size()) +
                              " aligned predictor/return observations; need at least " +
                              std::to_string(k_full + 2));

    const auto n = static_cast<Eigen::Index>(rows.size());
    MatrixXd x_full(n, static_cast<Eigen::Index>(k_full));
    MatrixXd x_restr(n, static_cast<Eigen::Index>(k_full - 1));
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto r = static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)]);
        x_full(i, 0) = 1.0;
        x_restr(i, 0) = 1.0;
        x_full(i, 1) = aligned.values(r, 0);
        for (std::size_t c = 1; c < p; ++c) {
            x_full(i, 1 + static_cast<Eigen::Index>(c)) =
                aligned.values(r, static_cast<Eigen::Index>(c));
            x_restr(i, static_cast<Eigen::Index>(c)) =
                aligned.values(r, static_cast<Eigen::Index>(c));
        }
    }
    std::vector<std::string> names_full{"const"};
    names_full.insert(names_full.end(), aligned.names.begin(), aligned.names.end());
    std::vector<std::string> names_restr{"const"};
    names_restr.insert(names_restr.end(), aligned.names.begin() + 1, aligned.names.end());

    std::vector<MaturityRegression> out;
    out.reserve(returns.maturities_months.size());
    for (std::size_t m = 0; m < returns.maturities_months.size(); ++m) {
        VectorXd y(n);
        for (Eigen::Index i = 0; i < n; ++i)
            y(i) = returns.returns(static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)]),
                                   static_cast<Eigen::Index>(m));
        MaturityRegression reg;
        reg.maturity_months = returns.maturities_months[m];
        reg.full = with_nw_inference(ols(y, x_full, names_full), nw_lags);
        reg.restricted = with_nw_inference(ols(y, x_restr, names_restr), nw_lags);
        reg.nobs = static_cast<std::size_t>(n);

        const double rss_full = reg.full.residuals.squaredNorm();
        const double rss_restr = reg.restricted.residuals.squaredNorm();
        const auto dof = static_cast<double>(n) - static_cast<double>(k_full);
        if (rss_full <= 0.0) {
            reg.f_stat = std::numeric_limits<double>::infinity();
            reg.f_p = 0.0;
        } else {
            reg.f_stat = std::max(0.0, (rss_restr - rss_full) / (rss_full / dof));
            const boost::math::fisher_f_distribution<double> dist(1.0, dof);
            reg.f_p = boost::math::cdf(boost::math::complement(dist, reg.f_stat));
        }
        out.push_back(std::move(reg));
    }
    return out;
}

std::vector<OosResult> oos_forecast(const curve::ReturnPanel& returns,
                                    const PredictorSet& predictors, WindowPolicy window,
                                    const Date& split) {
    if (returns.dates.empty()) throw ValidationError("oos_forecast: empty return panel");
    const auto aligned = align_predictors(returns, predictors, /*require_all=*/true);
    const std::size_t t = returns.dates.size();
    const std::size_t p = aligned.names.size();
    const std::size_t i0 = first_forecast_row(returns.dates, split, p);
    const std::size_t span = i0; // rolling windows keep the initial training length

    std::vector<Eigen::Index> model_cols;
    for (std::size_t c = 0; c < p; ++c) model_cols.push_back(static_cast<Eigen::Index>(c));
    const std::vector<Eigen::Index> bench_cols(model_cols.begin() + 1, model_cols.end());

    std::vector<OosResult> out;
    for (std::size_t m = 0; m < returns.maturities_months.size(); ++m) {
        VectorXd y(static_cast<Eigen::Index>(t));
        for (std::size_t i = 0; i < t; ++i)
            y(static_cast<Eigen::Index>(i)) =
                returns.returns(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(m));

        OosResult o;
        o.maturity_months = returns.maturities_months[m];
        const auto nf = static_cast<Eigen::Index>(t - i0);
        o.model.resize(nf);
        o.benchmark.resize(nf);
        o.realized.resize(nf);
        for (std::size_t j = i0; j < t; ++j) {
            const std::size_t lo = window == WindowPolicy::rolling ? j - span : 0;
            const auto idx = static_cast<Eigen::Index>(j - i0);
            o.dates.push_back(returns.dates[j]);
            o.model(idx) = window_forecast(aligned.values, y, model_cols, lo, j, j);
            // The expectation-hypothesis benchmark is the recursive
            // (expanding) mean; a controls-only benchmark shares the
            // model's window.
            o.benchmark(idx) = bench_cols.empty()
                                   ? window_forecast(aligned.values, y, bench_cols, 0, j, j)
                                   : window_forecast(aligned.values, y, bench_cols, lo, j, j);
            o.realized(idx) = y(static_cast<Eigen::Index>(j));
        }
        out.push_back(std::move(o));
    }
    return out;
}

std::vector<OosResult> oos_forecast_pc(const curve::YieldPanel& yields, const Series& target,
                                       ModelKind kind, const std::vector<int>& maturities,
                                       WindowPolicy window, const Date& split) {
    yields.validate();
    const int k = pcs_for(kind);
    const auto rx = curve::excess_returns(yields, maturities);
    const std::size_t t = rx.dates.size();

    // Predictor at return row j lives at panel date j (one month before the
    // return stamp).
    VectorXd tr(static_cast<Eigen::Index>(t));
    for (std::size_t j = 0; j < t; ++j) {
        const auto v = target.in_month(yields.dates[j]);
        if (!v)
            throw ValidationError("target series missing in month of " + yields.dates[j].str());
        tr(static_cast<Eigen::Index>(j)) = *v;
    }

    const std::size_t p = 1 + static_cast<std::size_t>(k);
    const std::size_t i0 = first_forecast_row(rx.dates, split, p);
    const std::size_t span = i0;

    std::vector<OosResult> out(maturities.size());
    for (std::size_t m = 0; m < maturities.size(); ++m) {
        out[m].maturity_months = maturities[m];
        const auto nf = static_cast<Eigen::Index>(t - i0);
        out[m].model.resize(nf);
        out[m].benchmark.resize(nf);
        out[m].realized.resize(nf);
    }

    std::vector<Eigen::Index> model_cols;
    for (std::size_t c = 0; c < p; ++c) model_cols.push_back(static_cast<Eigen::Index>(c));
    const std::vector<Eigen::Index> bench_cols(model_cols.begin() + 1, model_cols.end());

    for (std::size_t j = i0; j < t; ++j) {
        const std::size_t lo = window == WindowPolicy::rolling ? j - span : 0;
        const std::size_t rows = j - lo + 1; // predictor rows lo..j inclusive

        // Components re-estimated strictly inside the window: PCA uses yield
        // rows lo..j, the curve observed through the forecast origin.
        MatrixXd preds(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(p));
        for (std::size_t i = lo; i <= j; ++i)
            preds(static_cast<Eigen::Index>(i - lo), 0) = tr(static_cast<Eigen::Index>(i));
        if (k > 0) {
            curve::YieldPanel sub;
            sub.dates.assign(yields.dates.begin() + static_cast<std::ptrdiff_t>(lo),
                             yields.dates.begin() + static_cast<std::ptrdiff_t>(j + 1));
            sub.maturities_months = yields.maturities_months;
            sub.yields = yields.yields.middleRows(static_cast<Eigen::Index>(lo),
                                                  static_cast<Eigen::Index>(rows));
            const auto comp = curve::pca(sub, k);
            preds.rightCols(k) = comp.scores;
        }

        for (std::size_t m = 0; m < maturities.size(); ++m) {
            VectorXd y(static_cast<Eigen::Index>(rows) - 1);
            for (std::size_t i = lo; i < j; ++i)
                y(static_cast<Eigen::Index>(i - lo)) = rx.returns(
                    static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(m));
            const auto idx = static_cast<Eigen::Index>(j - i0);
            out[m].dates.push_back(rx.dates[j]);
            out[m].model(idx) =
                window_forecast(preds, y, model_cols, 0, rows - 1, rows - 1);
            if (bench_cols.empty()) {
                // Recursive mean over all realized returns, regardless of
                // the model's window policy.
                VectorXd yall(static_cast<Eigen::Index>(j));
                for (std::size_t i = 0; i < j; ++i)
                    yall(static_cast<Eigen::Index>(i)) = rx.returns(
                        static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(m));
                const MatrixXd none(static_cast<Eigen::Index>(j), 0);
                out[m].benchmark(idx) = window_forecast(none, yall, {}, 0, j, 0);
            } else {
                out[m].benchmark(idx) =
                    window_forecast(preds, y, bench_cols, 0, rows - 1, rows - 1);
            }
            out[m].realized(idx) =
                rx.returns(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(m));
        }
    }
    return out;
}

double r2_os(const VectorXd& model, const VectorXd& benchmark, const VectorXd& realized) {
    if (model.size() != realized.size() || benchmark.size() != realized.size() ||
        realized.size() == 0)
        throw ValidationError("r2_os: forecast and realized series must align and be nonempty");
    const double sse_m = (realized - model).squaredNorm();
    const double sse_b = (realized - benchmark).squaredNorm();
    if (sse_b <= 0.0)
        throw NumericError("r2_os: benchmark squared error is zero; ratio undefined");
    return 1.0 - sse_m / sse_b;
}

VectorXd clark_west_terms(const VectorXd& model, const VectorXd& benchmark,
                          const VectorXd& realized) {
    if (model.size() != realized.size() || benchmark.size() != realized.size())
        throw ValidationError("clark_west_terms: forecast and realized series must align");
    VectorXd terms(realized.size());
    for (Eigen::Index i = 0; i < realized.size(); ++i) {
        const double eb = realized(i) - benchmark(i);
        const double em = realized(i) - model(i);
        const double d = benchmark(i) - model(i);
        terms(i) = eb * eb - (em * em - d * d);
    }
    return terms;
}

CwTest clark_west(const VectorXd& model, const VectorXd& benchmark, const VectorXd& realized,
                  int nw_lags) {
    const VectorXd terms = clark_west_terms(model, benchmark, realized);
    const auto n = terms.size();
    if (n < static_cast<Eigen::Index>(nw_lags) + 2)
        throw ValidationError("clark_west: need at least nw_lags + 2 forecasts, have " +
                              std::to_string(n));
    const auto fit = ols(terms, MatrixXd::Ones(n, 1), {"const"});
    const double var = newey_west_cov(fit, nw_lags)(0, 0);
    if (!(var > 0.0))
        throw NumericError("clark_west: degenerate zero-variance loss differential");
    CwTest out;
    out.stat = fit.coefficients(0) / std::sqrt(var);
    out.p = normal_upper_p(out.stat);
    return out;
}

VectorXd dcspe(const VectorXd& model, const VectorXd& benchmark, const VectorXd& realized) {
    if (model.size() != realized.size() || benchmark.size() != realized.size())
        throw ValidationError("dcspe: forecast and realized series must align");
    VectorXd cum(realized.size());
    double acc = 0.0;
    for (Eigen::Index i = 0; i < realized.size(); ++i) {
        const double eb = realized(i) - benchmark(i);
        const double em = realized(i) - model(i);
        acc += eb * eb - em * em;
        cum(i) = acc;
    }
    return cum;
}

BhResult bh_bootstrap(const curve::YieldPanel& yields, const Series& target, ModelKind kind,
                      const std::vector<int>& maturities, BhStat stat, WindowPolicy window,
                      const Date& split, int B, std::uint64_t seed, int nw_lags, int threads,
                      std::vector<std::string>* warnings) {
    yields.validate();
    if (B < 100) throw ValidationError("bh_bootstrap: need at least 100 replications");
    if (maturities.empty()) throw ValidationError("bh_bootstrap: no maturities requested");
    const auto t = static_cast<Eigen::Index>(yields.dates.size());
    if (t < 12) throw ValidationError("bh_bootstrap: panel too short to fit the null model");

    // Target values at predictor months (every panel date but the last).
    VectorXd tr(t - 1);
    for (Eigen::Index j = 0; j + 1 < t; ++j) {
        const auto v = target.in_month(yields.dates[static_cast<std::size_t>(j)]);
        if (!v)
            throw ValidationError("target series missing in month of " +
                                  yields.dates[static_cast<std::size_t>(j)].str());
        tr(j) = *v;
    }

    // Null model: three yield components with VAR(1) scores, measurement
    // errors around the component fit, and an independent AR(1) target.
    const auto comp = curve::pca(yields, 3);
    const MatrixXd& scores = comp.scores;
    const MatrixXd meas = (yields.yields.rowwise() - comp.means.transpose()) -
                          scores * comp.loadings.transpose();

    MatrixXd x_var(t - 1, 4);
    x_var.col(0).setOnes();
    x_var.rightCols(3) = scores.topRows(t - 1);
    const MatrixXd y_var = scores.bottomRows(t - 1);
    const MatrixXd b_var = (x_var.transpose() * x_var).ldlt().solve(x_var.transpose() * y_var);
    const MatrixXd u = y_var - x_var * b_var; // VAR residual rows, resampled jointly
    const VectorXd c_var = b_var.row(0).transpose();
    MatrixXd a_var = b_var.bottomRows(3).transpose();

    bool shrunk = false;
    const double rho = Eigen::EigenSolver<MatrixXd>(a_var).eigenvalues().cwiseAbs().maxCoeff();
    if (rho >= 1.0) {
        a_var *= 0.99 / rho;
        shrunk = true;
        if (warnings)
            warnings->push_back("bh_bootstrap: fitted score VAR unstable (spectral radius " +
                                std::to_string(rho) + "); coefficients rescaled by 0.99/radius");
    }

    MatrixXd x_ar(tr.size() - 1, 2);
    x_ar.col(0).setOnes();
    x_ar.col(1) = tr.head(tr.size() - 1);
    const VectorXd y_ar = tr.tail(tr.size() - 1);
    const VectorXd b_ar = (x_ar.transpose() * x_ar).ldlt().solve(x_ar.transpose() * y_ar);
    const VectorXd v_ar = y_ar - x_ar * b_ar;
    double ar_slope = b_ar(1);
    if (std::abs(ar_slope) >= 1.0) {
        shrunk = true;
        if (warnings)
            warnings->push_back("bh_bootstrap: fitted target AR(1) unstable (slope " +
                                std::to_string(ar_slope) + "); rescaled by 0.99/|slope|");
        ar_slope *= 0.99 / std::abs(ar_slope);
    }

    const auto observed =
        bh_statistic(yields, target, kind, maturities, stat, window, split, nw_lags);

    const std::vector<Date> target_dates(yields.dates.begin(), yields.dates.end() - 1);
    const auto n_u = static_cast<std::size_t>(u.rows());
    const auto n_m = static_cast<std::size_t>(meas.rows());
    const auto n_v = static_cast<std::size_t>(v_ar.size());

    MatrixXd draws(B, static_cast<Eigen::Index>(maturities.size()));
    parallel_for(static_cast<std::size_t>(B), threads, [&](std::size_t rep) {
        Rng rng(seed, 1 + rep);

        MatrixXd sim_scores(t, 3);
        sim_scores.row(0) = scores.row(0);
        for (Eigen::Index i = 1; i < t; ++i) {
            const auto d = draw_index(rng, n_u);
            sim_scores.row(i) = (c_var + a_var * sim_scores.row(i - 1).transpose() +
                                 u.row(static_cast<Eigen::Index>(d)).transpose())
                                    .transpose();
        }

        curve::YieldPanel sim = yields;
        for (Eigen::Index i = 0; i < t; ++i) {
            const auto d = draw_index(rng, n_m);
            sim.yields.row(i) = comp.means.transpose() +
                                sim_scores.row(i) * comp.loadings.transpose() +
                                meas.row(static_cast<Eigen::Index>(d));
        }

        std::vector<double> sim_tr(static_cast<std::size_t>(t - 1));
        sim_tr[0] = tr(0);
        for (Eigen::Index i = 1; i + 1 < t; ++i) {
            const auto d = draw_index(rng, n_v);
            sim_tr[static_cast<std::size_t>(i)] =
                b_ar(0) + ar_slope * sim_tr[static_cast<std::size_t>(i - 1)] +
                v_ar(static_cast<Eigen::Index>(d));
        }
        const Series sim_target(target_dates, std::move(sim_tr),
                                target.name().empty() ? "tr" : target.name());

        const auto stats =
            bh_statistic(sim, sim_target, kind, maturities, stat, window, split, nw_lags);
        for (std::size_t m = 0; m < stats.size(); ++m)
            draws(static_cast<Eigen::Index>(rep), static_cast<Eigen::Index>(m)) = stats[m];
    });

    BhResult res;
    res.maturities = maturities;
    res.observed = observed;
    res.var_shrunk = shrunk;
    for (std::size_t m = 0; m < maturities.size(); ++m) {
        int count = 0;
        for (int r = 0; r < B; ++r) {
            const double d = draws(r, static_cast<Eigen::Index>(m));
            const bool exceeds = stat == BhStat::coef_t ? std::abs(d) >= std::abs(observed[m])
                                                        : d >= observed[m];
            if (exceeds) ++count;
        }
        res.p_boot.push_back((1.0 + count) / (static_cast<double>(B) + 1.0));
    }
    return res;
}

} // namespace trb::predict
