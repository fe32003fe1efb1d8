#include "trb/curve.hpp"

#include "trb/core/csv.hpp"
#include "trb/core/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <set>

namespace trb::curve {

namespace {

std::size_t find_maturity(const std::vector<int>& maturities, int m, const char* what) {
    const auto it = std::find(maturities.begin(), maturities.end(), m);
    if (it == maturities.end())
        throw ValidationError(std::string(what) + " is missing the " + std::to_string(m) +
                              "-month maturity");
    return static_cast<std::size_t>(it - maturities.begin());
}

void check_increasing(const std::vector<int>& maturities) {
    for (std::size_t i = 1; i < maturities.size(); ++i)
        if (maturities[i] <= maturities[i - 1])
            throw ValidationError("maturities must be strictly increasing");
    if (!maturities.empty() && maturities.front() <= 0)
        throw ValidationError("maturities must be positive");
}

/// g(x) = (1 - e^{-x}) / x, numerically stable near zero.
double nss_g(double x) { return -std::expm1(-x) / x; }

} // namespace

std::size_t YieldPanel::col_of(int maturity_months) const {
    return find_maturity(maturities_months, maturity_months, "yield panel");
}

void YieldPanel::validate() const {
    if (dates.empty() || maturities_months.empty())
        throw ValidationError("yield panel is empty");
    if (yields.rows() != static_cast<Eigen::Index>(dates.size()) ||
        yields.cols() != static_cast<Eigen::Index>(maturities_months.size()))
        throw ValidationError("yield panel dimensions do not match dates/maturities");
    for (std::size_t i = 1; i < dates.size(); ++i)
        if (!(dates[i - 1] < dates[i]))
            throw ValidationError("yield panel dates must be strictly increasing");
    check_increasing(maturities_months);
    if (!yields.allFinite()) throw ValidationError("yield panel has non-finite cells");
}

std::size_t ReturnPanel::col_of(int maturity_months) const {
    return find_maturity(maturities_months, maturity_months, "return panel");
}

double nss_yield(const NssParams& params, double n_years) {
    if (!(n_years > 0.0)) throw ValidationError("nss_yield: maturity must be > 0 years");
    if (!(params.tau1 > 0.0) || !(params.tau2 > 0.0))
        throw ValidationError("nss_yield: tau parameters must be > 0");
    const double x1 = n_years / params.tau1;
    const double x2 = n_years / params.tau2;
    const double g1 = nss_g(x1);
    const double g2 = nss_g(x2);
    return params.beta0 + params.beta1 * g1 + params.beta2 * (g1 - std::exp(-x1)) +
           params.beta3 * (g2 - std::exp(-x2));
}

namespace {

struct ProfileFit {
    Eigen::Vector4d beta = Eigen::Vector4d::Zero();
    double rss = std::numeric_limits<double>::infinity();
};

/// Linear least squares for beta at fixed (tau1, tau2).
ProfileFit profile_beta(const std::vector<std::pair<double, double>>& observed, double tau1,
                        double tau2) {
    const auto n = static_cast<Eigen::Index>(observed.size());
    Eigen::MatrixXd x(n, 4);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& [m, yield] = observed[static_cast<std::size_t>(i)];
        const double x1 = m / tau1, x2 = m / tau2;
        const double g1 = nss_g(x1), g2 = nss_g(x2);
        x(i, 0) = 1.0;
        x(i, 1) = g1;
        x(i, 2) = g1 - std::exp(-x1);
        x(i, 3) = g2 - std::exp(-x2);
        y(i) = yield;
    }
    ProfileFit fit;
    fit.beta = x.colPivHouseholderQr().solve(y);
    fit.rss = (y - x * fit.beta).squaredNorm();
    if (!std::isfinite(fit.rss)) fit.rss = std::numeric_limits<double>::infinity();
    return fit;
}

} // namespace

NssParams fit_nss(const std::vector<std::pair<double, double>>& observed) {
    std::set<double> distinct;
    for (const auto& [n, y] : observed) {
        if (!(n > 0.0)) throw ValidationError("fit_nss: maturities must be > 0 years");
        if (!std::isfinite(y)) throw ValidationError("fit_nss: non-finite yield");
        distinct.insert(n);
    }
    if (distinct.size() < 6)
        throw ValidationError("fit_nss: need at least 6 distinct maturities, have " +
                              std::to_string(distinct.size()));

    // Multi-start grid; ascending loops make the strict '<' keep the lowest
    // tau1 (then tau2) among ties.
    double best_t1 = 0.0, best_t2 = 0.0;
    double best_rss = std::numeric_limits<double>::infinity();
    for (const double t1 : {0.5, 1.0, 2.0, 5.0}) {
        for (const double t2 : {5.0, 10.0, 15.0}) {
            const double rss = profile_beta(observed, t1, t2).rss;
            if (rss < best_rss) {
                best_rss = rss;
                best_t1 = t1;
                best_t2 = t2;
            }
        }
    }
    if (!std::isfinite(best_rss))
        throw FitError("fit_nss: least squares failed on every grid start");

    // Damped Gauss-Newton (variable projection) over theta = (ln tau1, ln tau2).
    const auto rss_at = [&](double lt1, double lt2) {
        return profile_beta(observed, std::exp(lt1), std::exp(lt2)).rss;
    };
    double lt1 = std::log(best_t1), lt2 = std::log(best_t2);
    double rss = best_rss;
    double mu = 1e-3;
    const auto n = static_cast<Eigen::Index>(observed.size());
    for (int iter = 0; iter < 200 && rss > 0.0; ++iter) {
        // residuals and a numeric Jacobian of the profiled residual vector
        const auto residuals = [&](double a, double b) {
            const auto fit = profile_beta(observed, std::exp(a), std::exp(b));
            Eigen::VectorXd r(n);
            NssParams p{fit.beta(0), fit.beta(1), fit.beta(2), fit.beta(3), std::exp(a),
                        std::exp(b)};
            for (Eigen::Index i = 0; i < n; ++i) {
                const auto& [m, y] = observed[static_cast<std::size_t>(i)];
                r(i) = nss_yield(p, m) - y;
            }
            return r;
        };
        const Eigen::VectorXd r0 = residuals(lt1, lt2);
        const double h = 1e-6;
        Eigen::MatrixXd jac(n, 2);
        jac.col(0) = (residuals(lt1 + h, lt2) - residuals(lt1 - h, lt2)) / (2.0 * h);
        jac.col(1) = (residuals(lt1, lt2 + h) - residuals(lt1, lt2 - h)) / (2.0 * h);
        const Eigen::Matrix2d jtj = jac.transpose() * jac;
        const Eigen::Vector2d jtr = jac.transpose() * r0;

        bool stepped = false;
        for (int damp = 0; damp < 16; ++damp) {
            Eigen::Matrix2d lhs = jtj;
            lhs.diagonal() += mu * jtj.diagonal().cwiseMax(1e-12);
            const Eigen::Vector2d delta = lhs.ldlt().solve(-jtr);
            const double cand1 = lt1 + delta(0), cand2 = lt2 + delta(1);
            const double cand_rss = rss_at(cand1, cand2);
            if (std::isfinite(cand_rss) && cand_rss < rss) {
                lt1 = cand1;
                lt2 = cand2;
                const double gain = rss - cand_rss;
                rss = cand_rss;
                mu = std::max(mu / 3.0, 1e-12);
                stepped = true;
                if (gain < 1e-16 * (1.0 + rss)) iter = 200; // converged
                break;
            }
            mu *= 10.0;
            if (mu > 1e12) break;
        }
        if (!stepped) break; // stuck at the (still grid-dominating) optimum
    }

    const auto fit = profile_beta(observed, std::exp(lt1), std::exp(lt2));
    NssParams out;
    out.beta0 = fit.beta(0);
    out.beta1 = fit.beta(1);
    out.beta2 = fit.beta(2);
    out.beta3 = fit.beta(3);
    out.tau1 = std::exp(lt1);
    out.tau2 = std::exp(lt2);
    return out;
}

ReturnPanel excess_returns(const YieldPanel& panel, const std::vector<int>& ns) {
    panel.validate();
    if (ns.empty()) throw ValidationError("excess_returns: no maturities requested");
    for (std::size_t i = 0; i < panel.dates.size() - 1; ++i)
        if (panel.dates[i + 1].month_key() != panel.dates[i].month_key() + 1)
            throw ValidationError("excess_returns: panel dates must be consecutive months");
    if (panel.dates.size() < 2) throw ValidationError("excess_returns: need at least two months");

    const std::size_t c_short = panel.col_of(1);
    const auto t = static_cast<Eigen::Index>(panel.dates.size());

    ReturnPanel out;
    out.dates.assign(panel.dates.begin() + 1, panel.dates.end());
    out.maturities_months.assign(ns.begin(), ns.end());
    out.returns.resize(t - 1, static_cast<Eigen::Index>(ns.size()));
    for (std::size_t j = 0; j < ns.size(); ++j) {
        const int n = ns[j];
        if (n < 2) throw ValidationError("excess_returns: purchase maturity must be >= 2 months");
        const auto c_buy = static_cast<Eigen::Index>(panel.col_of(n));
        const auto c_sell = static_cast<Eigen::Index>(panel.col_of(n - 1));
        for (Eigen::Index i = 0; i + 1 < t; ++i) {
            out.returns(i, static_cast<Eigen::Index>(j)) =
                -((n - 1) / 12.0) * panel.yields(i + 1, c_sell) +
                (n / 12.0) * panel.yields(i, c_buy) -
                (1.0 / 12.0) * panel.yields(i, static_cast<Eigen::Index>(c_short));
        }
    }
    return out;
}

PcaResult pca(const YieldPanel& panel, int k) {
    panel.validate();
    const auto t = static_cast<Eigen::Index>(panel.dates.size());
    const auto m = static_cast<Eigen::Index>(panel.maturities_months.size());
    if (k < 1 || k > m)
        throw ValidationError("pca: component count must lie in [1, maturities]");
    if (t <= k) throw ValidationError("pca: sample length must exceed the component count");

    PcaResult res;
    res.means = panel.yields.colwise().mean();
    const Eigen::MatrixXd centered = panel.yields.rowwise() - res.means.transpose();
    const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(t - 1);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    if (es.info() != Eigen::Success) throw NumericError("pca: eigen decomposition failed");

    res.eigenvalues.resize(k);
    res.loadings.resize(m, k);
    const double scale = std::max(es.eigenvalues().maxCoeff(), 0.0);
    for (int c = 0; c < k; ++c) {
        const Eigen::Index src = m - 1 - c; // ascending -> descending
        const double lambda = es.eigenvalues()(src);
        if (!(lambda > scale * 1e-12))
            throw ValidationError("pca: covariance is rank deficient below component " +
                                  std::to_string(c + 1));
        res.eigenvalues(c) = lambda;
        Eigen::VectorXd v = es.eigenvectors().col(src);
        const double sum = v.sum();
        if (sum < 0.0 || (sum == 0.0 && v(0) < 0.0)) v = -v;
        res.loadings.col(c) = v;
    }
    res.scores = centered * res.loadings;
    return res;
}

YieldPanel orthogonalize(const YieldPanel& panel, const Series& factor) {
    panel.validate();
    const auto t = static_cast<Eigen::Index>(panel.dates.size());
    Eigen::VectorXd f(t);
    for (Eigen::Index i = 0; i < t; ++i) {
        const auto v = factor.at(panel.dates[static_cast<std::size_t>(i)]);
        if (!v)
            throw ValidationError("orthogonalize: factor has no value on " +
                                  panel.dates[static_cast<std::size_t>(i)].str());
        f(i) = *v;
    }
    const double f_mean = f.mean();
    const Eigen::VectorXd fd = f.array() - f_mean;
    const double f_ss = fd.squaredNorm();
    if (!(f_ss > 0.0)) throw ValidationError("orthogonalize: factor is constant");

    YieldPanel out = panel;
    for (Eigen::Index j = 0; j < panel.yields.cols(); ++j) {
        const Eigen::VectorXd y = panel.yields.col(j);
        const double slope = fd.dot(y) / f_ss;
        out.yields.col(j) = y - slope * f; // intercept + residual
    }
    return out;
}

Eigen::MatrixXd one_year_forwards(const YieldPanel& panel) {
    panel.validate();
    const auto t = static_cast<Eigen::Index>(panel.dates.size());
    Eigen::MatrixXd fwd(t, 5);
    fwd.col(0) = panel.yields.col(static_cast<Eigen::Index>(panel.col_of(12)));
    for (int n = 2; n <= 5; ++n) {
        const auto cur = static_cast<Eigen::Index>(panel.col_of(12 * n));
        const auto prev = static_cast<Eigen::Index>(panel.col_of(12 * (n - 1)));
        fwd.col(n - 1) = n * panel.yields.col(cur) - (n - 1) * panel.yields.col(prev);
    }
    return fwd;
}

CpResult cp_factor(const YieldPanel& panel, const ReturnPanel& returns) {
    panel.validate();
    const std::size_t t = panel.dates.size();
    if (returns.dates.size() != t - 1)
        throw ValidationError("cp_factor: return panel must have one row per month pair");
    for (std::size_t i = 0; i + 1 < t; ++i)
        if (returns.dates[i] != panel.dates[i + 1])
            throw ValidationError("cp_factor: return dates misaligned at " +
                                  returns.dates[i].str());
    const auto rows = static_cast<Eigen::Index>(t - 1);
    if (rows < 8) throw ValidationError("cp_factor: insufficient sample for six coefficients");

    const Eigen::MatrixXd fwd = one_year_forwards(panel);
    Eigen::MatrixXd x(rows, 6);
    x.col(0).setOnes();
    x.rightCols(5) = fwd.topRows(rows);
    const Eigen::VectorXd y = returns.returns.rowwise().mean();

    const Eigen::VectorXd beta = x.colPivHouseholderQr().solve(y);
    const Eigen::VectorXd fitted = x * beta;
    const double rss = (y - fitted).squaredNorm();
    const double tss = (y.array() - y.mean()).matrix().squaredNorm();
    if (!(tss > 0.0)) throw ValidationError("cp_factor: average returns are constant");

    CpResult res;
    res.coefficients = beta;
    res.r2 = 1.0 - rss / tss;
    for (Eigen::Index i = 0; i < rows; ++i)
        res.factor.push_back(panel.dates[static_cast<std::size_t>(i)], fitted(i));
    res.factor.set_name("cp");
    return res;
}

Series standardize(const Series& input) {
    if (input.size() < 2) throw ValidationError("standardize: need at least two observations");
    const auto& v = input.values();
    const double mu = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double ss = 0.0;
    for (const double x : v) ss += (x - mu) * (x - mu);
    const double sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
    if (!(sd > 0.0)) throw ValidationError("standardize: series is constant");
    Series out;
    out.set_name(input.name());
    for (std::size_t i = 0; i < input.size(); ++i)
        out.push_back(input.dates()[i], (v[i] - mu) / sd);
    return out;
}

YieldPanel panel_from_nss(const std::vector<std::pair<Date, NssParams>>& path,
                          const std::vector<int>& maturities_months) {
    if (path.empty()) throw ValidationError("panel_from_nss: empty parameter path");
    check_increasing(maturities_months);
    YieldPanel panel;
    panel.maturities_months = maturities_months;
    panel.yields.resize(static_cast<Eigen::Index>(path.size()),
                        static_cast<Eigen::Index>(maturities_months.size()));
    for (std::size_t i = 0; i < path.size(); ++i) {
        panel.dates.push_back(path[i].first);
        for (std::size_t j = 0; j < maturities_months.size(); ++j)
            panel.yields(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                nss_yield(path[i].second, maturities_months[j] / 12.0);
    }
    panel.validate();
    return panel;
}

std::vector<std::pair<Date, NssParams>> load_nss_params(const std::filesystem::path& path) {
    const auto t = csv::read_file(path);
    const std::size_t c_date = t.col("date");
    const std::array<std::size_t, 6> cols{t.col("beta0"), t.col("beta1"), t.col("beta2"),
                                          t.col("beta3"), t.col("tau1"),  t.col("tau2")};
    std::vector<std::pair<Date, NssParams>> out;
    for (const auto& row : t.rows) {
        NssParams p;
        p.beta0 = csv::to_double(t, row, cols[0]);
        p.beta1 = csv::to_double(t, row, cols[1]);
        p.beta2 = csv::to_double(t, row, cols[2]);
        p.beta3 = csv::to_double(t, row, cols[3]);
        p.tau1 = csv::to_double(t, row, cols[4]);
        p.tau2 = csv::to_double(t, row, cols[5]);
        out.emplace_back(Date::parse(row.fields[c_date]), p);
    }
    for (std::size_t i = 1; i < out.size(); ++i)
        if (!(out[i - 1].first < out[i].first))
            throw ValidationError(t.path + ": dates must be strictly increasing");
    return out;
}

YieldPanel load_panel(const std::filesystem::path& path) {
    const auto t = csv::read_file(path);
    if (t.header.empty() || t.header[0] != "date")
        throw ValidationError(t.path + ": first column must be 'date'");
    YieldPanel panel;
    for (std::size_t j = 1; j < t.header.size(); ++j) {
        const std::string& h = t.header[j];
        // Headers are month counts, canonically m-prefixed (`m3`); a bare
        // integer is accepted too.
        const std::string digits = (!h.empty() && h[0] == 'm') ? h.substr(1) : h;
        std::size_t pos = 0;
        int months = 0;
        try {
            months = std::stoi(digits, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (digits.empty() || pos != digits.size() || months <= 0)
            throw ValidationError(t.path + ": column '" + h +
                                  "' is not a positive maturity in months");
        panel.maturities_months.push_back(months);
    }
    panel.yields.resize(static_cast<Eigen::Index>(t.rows.size()),
                        static_cast<Eigen::Index>(panel.maturities_months.size()));
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        panel.dates.push_back(Date::parse(t.rows[i].fields[0]));
        for (std::size_t j = 1; j < t.header.size(); ++j)
            panel.yields(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j - 1)) =
                csv::to_double(t, t.rows[i], j);
    }
    panel.validate();
    return panel;
}

void write_panel(const YieldPanel& panel, const std::filesystem::path& path) {
    panel.validate();
    csv::Writer w(path);
    std::vector<std::string> header{"date"};
    for (const int m : panel.maturities_months) header.push_back("m" + std::to_string(m));
    w.write_row(header);
    for (std::size_t i = 0; i < panel.dates.size(); ++i) {
        std::vector<std::string> row{panel.dates[i].str()};
        for (Eigen::Index j = 0; j < panel.yields.cols(); ++j)
            row.push_back(csv::format_double(panel.yields(static_cast<Eigen::Index>(i), j)));
        w.write_row(row);
    }
    w.close();
}

void write_returns(const ReturnPanel& returns, const std::filesystem::path& path) {
    csv::Writer w(path);
    std::vector<std::string> header{"date"};
    for (const int m : returns.maturities_months) header.push_back("n" + std::to_string(m));
    w.write_row(header);
    for (std::size_t i = 0; i < returns.dates.size(); ++i) {
        std::vector<std::string> row{returns.dates[i].str()};
        for (Eigen::Index j = 0; j < returns.returns.cols(); ++j)
            row.push_back(csv::format_double(returns.returns(static_cast<Eigen::Index>(i), j)));
        w.write_row(row);
    }
    w.close();
}

} // namespace trb::curve
