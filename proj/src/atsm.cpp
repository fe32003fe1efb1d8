#include "trb/atsm.hpp"

#include "trb/core/errors.hpp"
#include "trb/core/parallel.hpp"
#include "trb/core/rng.hpp"
#include "trb/core/stats.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

namespace trb::atsm {

namespace {

std::string month_of(const Date& d) { return d.str().substr(0, 7); }

std::string join(const std::vector<std::string>& parts) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i > 0) out += ", ";
        out += parts[i];
    }
    return out;
}

double chi2_upper_p(double stat, int dof) {
    boost::math::chi_squared dist(static_cast<double>(dof));
    return boost::math::cdf(boost::math::complement(dist, stat));
}

double spectral_radius(const Eigen::MatrixXd& m) {
    Eigen::EigenSolver<Eigen::MatrixXd> es(m, /*computeEigenvectors=*/false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

/// Symmetric PSD square root through the eigendecomposition; negative
/// roundoff eigenvalues are clipped at zero.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    Eigen::VectorXd roots = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * roots.asDiagonal() * es.eigenvectors().transpose();
}

std::vector<double> column_values(const Eigen::MatrixXd& m, Eigen::Index j) {
    std::vector<double> out(static_cast<std::size_t>(m.rows()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) out[static_cast<std::size_t>(i)] = m(i, j);
    return out;
}

void check_model_shapes(const AtsmModel& model) {
    const int k = model.K;
    if (k < 1) throw ValidationError("atsm: model has no factors");
    if (model.mu.size() != k || model.delta1.size() != k || model.lambda0.size() != k ||
        model.phi.rows() != k || model.phi.cols() != k || model.sigma.rows() != k ||
        model.sigma.cols() != k || model.lambda1.rows() != k || model.lambda1.cols() != k) {
        throw ValidationError("atsm: model parameter shapes do not match K=" + std::to_string(k));
    }
}

/// Design matrix [1, vhat', x_lagged'] shared by the return regression and
/// its variance estimators.
Eigen::MatrixXd return_design(const Eigen::MatrixXd& vhat, const Eigen::MatrixXd& x_lagged) {
    const Eigen::Index t = vhat.cols();
    const Eigen::Index k = vhat.rows();
    Eigen::MatrixXd design(t, 1 + 2 * k);
    design.col(0).setOnes();
    design.middleCols(1, k) = vhat.transpose();
    design.rightCols(k) = x_lagged.transpose();
    return design;
}

struct StepTwoCoefficients {
    Eigen::VectorXd a;
    Eigen::MatrixXd beta;
    Eigen::MatrixXd c;
};

StepTwoCoefficients split_coefficients(const Eigen::MatrixXd& coef, Eigen::Index k) {
    StepTwoCoefficients out;
    out.a = coef.row(0).transpose();
    out.beta = coef.middleRows(1, k);
    out.c = coef.bottomRows(k).transpose();
    return out;
}

} // namespace

FactorPanel build_state(const Series& tail_risk, const curve::YieldPanel& yields) {
    yields.validate();
    if (yields.maturities_months.size() < 5) {
        throw ValidationError("build_state: need at least five maturities for the principal "
                              "components, got " +
                              std::to_string(yields.maturities_months.size()));
    }
    std::vector<double> tr_values;
    tr_values.reserve(yields.dates.size());
    std::vector<std::string> missing;
    for (const auto& d : yields.dates) {
        if (auto v = tail_risk.in_month(d)) {
            tr_values.push_back(*v);
        } else {
            missing.push_back(month_of(d));
        }
    }
    if (!missing.empty()) {
        throw ValidationError("build_state: no tail-risk value in months: " + join(missing));
    }

    Series aligned(yields.dates, tr_values, "tr");
    auto ortho = curve::orthogonalize(yields, aligned);
    auto pcs = curve::pca(ortho, 5);

    const auto t = static_cast<Eigen::Index>(yields.dates.size());
    FactorPanel x;
    x.dates = yields.dates;
    x.names = {"tr", "pc1", "pc2", "pc3", "pc4", "pc5"};
    x.values.resize(t, 6);
    x.means.resize(6);
    x.scales.resize(6);
    for (int j = 0; j < 6; ++j) {
        std::vector<double> raw =
            j == 0 ? tr_values : column_values(pcs.scores, static_cast<Eigen::Index>(j - 1));
        double center = stats::mean(raw);
        double scale = stats::sd(raw);
        if (!(scale > 0.0)) {
            throw ValidationError("build_state: factor '" + x.names[static_cast<std::size_t>(j)] +
                                  "' is constant");
        }
        x.means(j) = center;
        x.scales(j) = scale;
        for (Eigen::Index i = 0; i < t; ++i) {
            x.values(i, j) = (raw[static_cast<std::size_t>(i)] - center) / scale;
        }
    }
    return x;
}

namespace {

/// Benchmark state without the tail factor: the first five PCs of the raw
/// panel, standardized the same way as build_state.
FactorPanel build_pc_state(const curve::YieldPanel& yields) {
    yields.validate();
    if (yields.maturities_months.size() < 5) {
        throw ValidationError("build_pc_state: need at least five maturities for the principal "
                              "components, got " +
                              std::to_string(yields.maturities_months.size()));
    }
    auto pcs = curve::pca(yields, 5);
    const auto t = static_cast<Eigen::Index>(yields.dates.size());
    FactorPanel x;
    x.dates = yields.dates;
    x.names = {"pc1", "pc2", "pc3", "pc4", "pc5"};
    x.values.resize(t, 5);
    x.means.resize(5);
    x.scales.resize(5);
    for (int j = 0; j < 5; ++j) {
        std::vector<double> raw = column_values(pcs.scores, static_cast<Eigen::Index>(j));
        double center = stats::mean(raw);
        double scale = stats::sd(raw);
        if (!(scale > 0.0)) {
            throw ValidationError("build_pc_state: factor '" +
                                  x.names[static_cast<std::size_t>(j)] + "' is constant");
        }
        x.means(j) = center;
        x.scales(j) = scale;
        for (Eigen::Index i = 0; i < t; ++i) {
            x.values(i, j) = (raw[static_cast<std::size_t>(i)] - center) / scale;
        }
    }
    return x;
}

} // namespace

VarEstimate fit_var(const FactorPanel& x, bool zero_mean, std::vector<std::string>* warnings) {
    const Eigen::Index t = x.values.rows();
    const Eigen::Index k = x.values.cols();
    if (k < 1) throw ValidationError("fit_var: empty factor panel");
    if (t <= k + 1) {
        throw ValidationError("fit_var: need more than K+1 observations, got T=" +
                              std::to_string(t) + " for K=" + std::to_string(k));
    }
    Eigen::MatrixXd lead = x.values.bottomRows(t - 1);
    Eigen::MatrixXd lagged = x.values.topRows(t - 1);
    const Eigen::Index p = zero_mean ? k : k + 1;
    Eigen::MatrixXd design(t - 1, p);
    if (zero_mean) {
        design = lagged;
    } else {
        design.col(0).setOnes();
        design.rightCols(k) = lagged;
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    if (qr.rank() < p) throw NumericError("fit_var: factor history is rank deficient");
    Eigen::MatrixXd coef = qr.solve(lead); // p x k

    VarEstimate out;
    if (zero_mean) {
        out.mu = Eigen::VectorXd::Zero(k);
        out.phi = coef.transpose();
    } else {
        out.mu = coef.row(0).transpose();
        out.phi = coef.bottomRows(k).transpose();
    }
    Eigen::MatrixXd resid = lead - design * coef;
    out.innovations = resid.transpose();
    Eigen::MatrixXd sigma = out.innovations * out.innovations.transpose() /
                            static_cast<double>(out.innovations.cols());
    out.sigma = 0.5 * (sigma + sigma.transpose());

    double radius = spectral_radius(out.phi);
    if (radius >= 1.0 && warnings != nullptr) {
        warnings->push_back("fit_var: estimated VAR is unstable (spectral radius " +
                            std::to_string(radius) + "); proceeding, estimation does not require "
                            "stationarity");
    }
    return out;
}

ReturnRegression return_regression(const Eigen::MatrixXd& rx, const Eigen::MatrixXd& vhat,
                                   const Eigen::MatrixXd& x_lagged) {
    const Eigen::Index n = rx.rows();
    const Eigen::Index t = rx.cols();
    const Eigen::Index k = vhat.rows();
    if (n < 1) throw ValidationError("return_regression: no return maturities");
    if (vhat.cols() != t || x_lagged.cols() != t || x_lagged.rows() != k) {
        throw ValidationError("return_regression: rx, innovations and lagged factors must share "
                              "their time dimension");
    }
    if (t <= 2 * k + 1) {
        throw ValidationError("return_regression: need T > 2K+1 observations, got T=" +
                              std::to_string(t) + " for K=" + std::to_string(k));
    }
    Eigen::MatrixXd design = return_design(vhat, x_lagged);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    if (qr.rank() < design.cols()) {
        throw NumericError("return_regression: regressors are rank deficient (rank " +
                           std::to_string(qr.rank()) + " of " + std::to_string(design.cols()) +
                           ")");
    }
    Eigen::MatrixXd coef = qr.solve(rx.transpose()); // (1+2K) x N
    auto split = split_coefficients(coef, k);

    ReturnRegression out;
    out.a = std::move(split.a);
    out.beta = std::move(split.beta);
    out.c = std::move(split.c);
    out.residuals = rx - (design * coef).transpose();
    out.sigma2 = out.residuals.squaredNorm() / static_cast<double>(n * t);
    return out;
}

PriceOfRisk price_of_risk(const Eigen::VectorXd& a, const Eigen::MatrixXd& beta,
                          const Eigen::MatrixXd& c, const Eigen::MatrixXd& sigma, double sigma2) {
    const Eigen::Index k = beta.rows();
    const Eigen::Index n = beta.cols();
    if (a.size() != n || c.rows() != n || c.cols() != k || sigma.rows() != k ||
        sigma.cols() != k) {
        throw ValidationError("price_of_risk: coefficient shapes do not agree");
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(beta.transpose()); // N x K
    if (qr.rank() < k) {
        throw ValidationError("price_of_risk: return loadings have rank " +
                              std::to_string(qr.rank()) + " for K=" + std::to_string(k) +
                              " factors; too few independent maturities");
    }
    Eigen::VectorXd convexity(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        convexity(j) = beta.col(j).dot(sigma * beta.col(j)) + sigma2;
    }
    PriceOfRisk out;
    out.lambda0 = qr.solve(a + 0.5 * convexity);
    out.lambda1 = qr.solve(c);
    return out;
}

ShortRateFit short_rate_regression(const Series& y1m, const FactorPanel& x) {
    const Eigen::Index t = x.values.rows();
    const Eigen::Index k = x.values.cols();
    if (t <= k + 1) {
        throw ValidationError("short_rate_regression: need more than K+1 observations, got T=" +
                              std::to_string(t));
    }
    Eigen::VectorXd r(t);
    std::vector<std::string> missing;
    for (Eigen::Index i = 0; i < t; ++i) {
        if (auto v = y1m.in_month(x.dates[static_cast<std::size_t>(i)])) {
            r(i) = *v / 12.0;
        } else {
            missing.push_back(month_of(x.dates[static_cast<std::size_t>(i)]));
        }
    }
    if (!missing.empty()) {
        throw ValidationError("short_rate_regression: no short-rate value in months: " +
                              join(missing));
    }
    Eigen::MatrixXd design(t, k + 1);
    design.col(0).setOnes();
    design.rightCols(k) = x.values;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    if (qr.rank() < design.cols()) {
        throw NumericError("short_rate_regression: factors are rank deficient");
    }
    Eigen::VectorXd coef = qr.solve(r);
    Eigen::VectorXd resid = r - design * coef;

    ShortRateFit out;
    out.delta0 = coef(0);
    out.delta1 = coef.tail(k);
    out.resid_variance = resid.squaredNorm() / static_cast<double>(t - k - 1);
    return out;
}

RecursionCoefficients yield_recursions(const AtsmModel& model, int n_max) {
    check_model_shapes(model);
    if (n_max < 1) throw ValidationError("yield_recursions: n_max must be at least one month");
    const int k = model.K;

    auto run = [&](const Eigen::VectorXd& l0, const Eigen::MatrixXd& l1, Eigen::VectorXd& a,
                   Eigen::MatrixXd& b) {
        a.resize(n_max);
        b.resize(n_max, k);
        a(0) = -model.delta0;
        b.row(0) = -model.delta1.transpose();
        for (int n = 2; n <= n_max; ++n) {
            Eigen::RowVectorXd prev = b.row(n - 2);
            a(n - 1) = a(n - 2) + prev.dot(model.mu - l0) +
                       0.5 * ((prev * model.sigma).dot(prev) + model.sigma2) - model.delta0;
            b.row(n - 1) = prev * (model.phi - l1) - model.delta1.transpose();
        }
    };

    RecursionCoefficients out;
    run(model.lambda0, model.lambda1, out.a, out.b);
    Eigen::VectorXd zero0 = Eigen::VectorXd::Zero(k);
    Eigen::MatrixXd zero1 = Eigen::MatrixXd::Zero(k, k);
    run(zero0, zero1, out.a_rn, out.b_rn);
    return out;
}

AtsmFit fit_yields(const AtsmModel& model, const FactorPanel& x,
                   const curve::YieldPanel& observed) {
    observed.validate();
    if (x.dates != observed.dates) {
        throw ValidationError("fit_yields: factor panel dates do not match the yield panel");
    }
    if (x.values.cols() != model.K) {
        throw ValidationError("fit_yields: factor panel has " + std::to_string(x.values.cols()) +
                              " columns for a model with K=" + std::to_string(model.K));
    }
    const int deepest = observed.maturities_months.back();
    if (model.a.size() < deepest || model.b.rows() < deepest || model.a_rn.size() < deepest ||
        model.b_rn.rows() < deepest) {
        throw ValidationError("fit_yields: recursions stop at " + std::to_string(model.a.size()) +
                              " months but the panel includes " + std::to_string(deepest));
    }

    const Eigen::Index t = x.values.rows();
    const auto m = static_cast<Eigen::Index>(observed.maturities_months.size());
    AtsmFit fit;
    fit.model = model;
    fit.state = x;
    fit.dates = observed.dates;
    fit.maturities = observed.maturities_months;
    fit.fitted_yields.resize(t, m);
    fit.rn_yields.resize(t, m);
    for (Eigen::Index j = 0; j < m; ++j) {
        const int n = observed.maturities_months[static_cast<std::size_t>(j)];
        const double scale = -12.0 / static_cast<double>(n);
        Eigen::VectorXd exposure = x.values * model.b.row(n - 1).transpose();
        Eigen::VectorXd exposure_rn = x.values * model.b_rn.row(n - 1).transpose();
        fit.fitted_yields.col(j) = scale * (exposure.array() + model.a(n - 1)).matrix();
        fit.rn_yields.col(j) = scale * (exposure_rn.array() + model.a_rn(n - 1)).matrix();
    }
    fit.term_premia = fit.fitted_yields - fit.rn_yields;
    fit.yield_errors = observed.yields - fit.fitted_yields;
    return fit;
}

std::vector<WaldTest> wald_spanning(const Eigen::MatrixXd& beta,
                                    const Eigen::MatrixXd& var_beta) {
    if (beta.rows() != var_beta.rows() || beta.cols() != var_beta.cols()) {
        throw ValidationError("wald_spanning: beta and its variances must share a shape");
    }
    if ((var_beta.array() <= 0.0).any()) {
        throw ValidationError("wald_spanning: variances must be positive");
    }
    const auto n = static_cast<int>(beta.cols());
    std::vector<WaldTest> out;
    out.reserve(static_cast<std::size_t>(beta.rows()));
    for (Eigen::Index i = 0; i < beta.rows(); ++i) {
        WaldTest w;
        w.stat = (beta.row(i).array().square() / var_beta.row(i).array()).sum();
        w.p = chi2_upper_p(w.stat, n);
        out.push_back(w);
    }
    return out;
}

Eigen::MatrixXd beta_variances(const ReturnRegression& fit, const Eigen::MatrixXd& vhat,
                               const Eigen::MatrixXd& x_lagged) {
    const Eigen::Index k = vhat.rows();
    const Eigen::Index n = fit.beta.cols();
    const Eigen::Index t = vhat.cols();
    if (fit.residuals.rows() != n || fit.residuals.cols() != t || x_lagged.cols() != t) {
        throw ValidationError("beta_variances: fit and regressors do not agree");
    }
    Eigen::MatrixXd design = return_design(vhat, x_lagged);
    Eigen::MatrixXd bread = (design.transpose() * design).inverse();
    Eigen::MatrixXd out(k, n);
    for (Eigen::Index m = 0; m < n; ++m) {
        Eigen::VectorXd e2 = fit.residuals.row(m).transpose().array().square();
        Eigen::MatrixXd meat = design.transpose() * e2.asDiagonal() * design;
        Eigen::MatrixXd cov = bread * meat * bread;
        out.col(m) = cov.diagonal().segment(1, k);
    }
    return out;
}

PriceRiskWald wald_prices(const Eigen::MatrixXd& lambda, const Eigen::MatrixXd& var_lambda) {
    const Eigen::Index k = lambda.rows();
    if (lambda.cols() != k + 1 || var_lambda.rows() != k || var_lambda.cols() != k + 1) {
        throw ValidationError("wald_prices: expected K x (K+1) price-of-risk matrices");
    }
    if ((var_lambda.array() <= 0.0).any()) {
        throw ValidationError("wald_prices: variances must be positive");
    }
    PriceRiskWald out;
    out.joint.reserve(static_cast<std::size_t>(k));
    out.time_varying.reserve(static_cast<std::size_t>(k));
    for (Eigen::Index i = 0; i < k; ++i) {
        WaldTest joint;
        joint.stat = (lambda.row(i).array().square() / var_lambda.row(i).array()).sum();
        joint.p = chi2_upper_p(joint.stat, static_cast<int>(k) + 1);
        out.joint.push_back(joint);

        WaldTest tv;
        tv.stat = (lambda.row(i).tail(k).array().square() / var_lambda.row(i).tail(k).array())
                      .sum();
        tv.p = chi2_upper_p(tv.stat, static_cast<int>(k));
        out.time_varying.push_back(tv);
    }
    return out;
}

Eigen::MatrixXd lambda_variances(const ReturnRegression& fit, const Eigen::MatrixXd& vhat,
                                 const Eigen::MatrixXd& x_lagged, const Eigen::MatrixXd& sigma,
                                 int block, int reps, std::uint64_t seed, int threads) {
    const Eigen::Index k = vhat.rows();
    const Eigen::Index n = fit.beta.cols();
    const Eigen::Index t = vhat.cols();
    if (fit.residuals.rows() != n || fit.residuals.cols() != t) {
        throw ValidationError("lambda_variances: fit and regressors do not agree");
    }
    if (block < 1) throw ValidationError("lambda_variances: block length must be positive");
    if (reps < 2) throw ValidationError("lambda_variances: need at least two replications");

    Eigen::MatrixXd design = return_design(vhat, x_lagged);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    // Fitted returns rebuilt from the point estimates; adding resampled
    // residual blocks to these re-creates artificial samples under the fit.
    Eigen::MatrixXd fitted = fit.a.replicate(1, t) + fit.beta.transpose() * vhat +
                             fit.c * x_lagged;

    const Eigen::Index width = k * (k + 1);
    Eigen::MatrixXd draws(reps, width);
    parallel_for(static_cast<std::size_t>(reps), threads, [&](std::size_t rep) {
        Rng rng(seed, 1 + static_cast<std::uint64_t>(rep));
        Eigen::MatrixXd shuffled(n, t);
        Eigen::Index filled = 0;
        while (filled < t) {
            auto start = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(t)));
            for (int j = 0; j < block && filled < t; ++j, ++filled) {
                shuffled.col(filled) = fit.residuals.col((start + j) % t);
            }
        }
        Eigen::MatrixXd rx_star = fitted + shuffled;
        Eigen::MatrixXd coef = qr.solve(rx_star.transpose());
        auto split = split_coefficients(coef, k);
        double sigma2_star = (rx_star - (design * coef).transpose()).squaredNorm() /
                             static_cast<double>(n * t);
        auto prices = price_of_risk(split.a, split.beta, split.c, sigma, sigma2_star);
        for (Eigen::Index i = 0; i < k; ++i) {
            draws(static_cast<Eigen::Index>(rep), i) = prices.lambda0(i);
            for (Eigen::Index j = 0; j < k; ++j) {
                draws(static_cast<Eigen::Index>(rep), k + i * k + j) = prices.lambda1(i, j);
            }
        }
    });

    Eigen::MatrixXd out(k, k + 1);
    for (Eigen::Index col = 0; col < width; ++col) {
        std::vector<double> sample = column_values(draws, col);
        double v = stats::variance(sample);
        if (col < k) {
            out(col, 0) = v;
        } else {
            Eigen::Index flat = col - k;
            out(flat / k, 1 + flat % k) = v;
        }
    }
    return out;
}

FactorContribution factor_contribution(const AtsmFit& fit, int factor) {
    const int k = fit.model.K;
    if (factor < 0 || factor >= k) {
        throw ValidationError("factor_contribution: factor index " + std::to_string(factor) +
                              " out of range for K=" + std::to_string(k));
    }
    const Eigen::Index t = fit.state.values.rows();
    const auto m = static_cast<Eigen::Index>(fit.maturities.size());
    FactorContribution out;
    out.fitted.resize(t, m);
    out.rn.resize(t, m);
    for (Eigen::Index j = 0; j < m; ++j) {
        const int n = fit.maturities[static_cast<std::size_t>(j)];
        const double scale = -12.0 / static_cast<double>(n);
        out.fitted.col(j) = scale * fit.model.b(n - 1, factor) * fit.state.values.col(factor);
        out.rn.col(j) = scale * fit.model.b_rn(n - 1, factor) * fit.state.values.col(factor);
    }
    out.term_premium = out.fitted - out.rn;
    return out;
}

FactorContribution intercept_contribution(const AtsmFit& fit) {
    const Eigen::Index t = fit.state.values.rows();
    const auto m = static_cast<Eigen::Index>(fit.maturities.size());
    FactorContribution out;
    out.fitted.resize(t, m);
    out.rn.resize(t, m);
    for (Eigen::Index j = 0; j < m; ++j) {
        const int n = fit.maturities[static_cast<std::size_t>(j)];
        const double scale = -12.0 / static_cast<double>(n);
        out.fitted.col(j).setConstant(scale * fit.model.a(n - 1));
        out.rn.col(j).setConstant(scale * fit.model.a_rn(n - 1));
    }
    out.term_premium = out.fitted - out.rn;
    return out;
}

std::vector<ErrorStats> error_summary(const std::vector<int>& maturities,
                                      const Eigen::MatrixXd& errors) {
    if (static_cast<Eigen::Index>(maturities.size()) != errors.cols()) {
        throw ValidationError("error_summary: one maturity per error column required");
    }
    std::vector<ErrorStats> out;
    out.reserve(maturities.size());
    for (Eigen::Index j = 0; j < errors.cols(); ++j) {
        std::vector<double> column = column_values(errors, j);
        ErrorStats row;
        row.maturity_months = maturities[static_cast<std::size_t>(j)];
        row.mean = stats::mean(column);
        row.sd = stats::sd(column);
        row.skewness = stats::skewness(column);
        row.kurtosis = stats::kurtosis(column);
        row.rho1 = stats::autocorrelation(column, 1);
        row.rho6 = stats::autocorrelation(column, 6);
        out.push_back(row);
    }
    return out;
}

SimulatedAtsm simulate(const AtsmModel& model, int months,
                       const std::vector<int>& yield_maturities,
                       const std::vector<int>& return_maturities, std::uint64_t seed) {
    check_model_shapes(model);
    if (months < 2) throw ValidationError("simulate: need at least two months");
    if (yield_maturities.empty()) throw ValidationError("simulate: no yield maturities");

    // Price internally at every maturity the outputs or the return legs
    // need; the panel handed back carries only the requested columns.
    std::vector<int> needed = yield_maturities;
    needed.push_back(1);
    for (int n : return_maturities) {
        if (n < 2) throw ValidationError("simulate: return maturities need a one-month-shorter "
                                         "leg, got " + std::to_string(n));
        needed.push_back(n);
        needed.push_back(n - 1);
    }
    std::sort(needed.begin(), needed.end());
    needed.erase(std::unique(needed.begin(), needed.end()), needed.end());
    if (needed.front() < 1) throw ValidationError("simulate: maturities must be positive");
    if (model.a.size() < needed.back() || model.b.rows() < needed.back()) {
        throw ValidationError("simulate: recursions stop at " + std::to_string(model.a.size()) +
                              " months but maturity " + std::to_string(needed.back()) +
                              " is requested");
    }

    const int k = model.K;
    Eigen::MatrixXd shock_root = psd_sqrt(model.sigma);
    Rng path(seed, 0);
    auto draw_shock = [&]() {
        Eigen::VectorXd eps(k);
        for (int j = 0; j < k; ++j) eps(j) = path.normal();
        return Eigen::VectorXd(shock_root * eps);
    };

    Eigen::VectorXd state = Eigen::VectorXd::Zero(k);
    for (int burn = 0; burn < 200; ++burn) {
        state = model.mu + model.phi * state + draw_shock();
    }

    SimulatedAtsm out;
    out.state.names.reserve(static_cast<std::size_t>(k));
    for (int j = 0; j < k; ++j) out.state.names.push_back("f" + std::to_string(j + 1));
    out.state.values.resize(months, k);
    out.state.means = Eigen::VectorXd::Zero(k);
    out.state.scales = Eigen::VectorXd::Ones(k);
    out.innovations.resize(k, months - 1);
    out.state.dates.reserve(static_cast<std::size_t>(months));
    for (int i = 0; i < months; ++i) {
        int key = 1990 * 12 + i;
        out.state.dates.push_back(Date(key / 12, key % 12 + 1, 1).month_end());
    }
    for (int i = 0; i < months; ++i) {
        out.state.values.row(i) = state.transpose();
        if (i + 1 < months) {
            Eigen::VectorXd v = draw_shock();
            out.innovations.col(i) = v;
            state = model.mu + model.phi * state + v;
        }
    }

    curve::YieldPanel priced;
    priced.dates = out.state.dates;
    priced.maturities_months = needed;
    priced.yields.resize(months, static_cast<Eigen::Index>(needed.size()));
    for (std::size_t j = 0; j < needed.size(); ++j) {
        const int n = needed[j];
        const double scale = -12.0 / static_cast<double>(n);
        Eigen::VectorXd exposure = out.state.values * model.b.row(n - 1).transpose();
        priced.yields.col(static_cast<Eigen::Index>(j)) =
            scale * (exposure.array() + model.a(n - 1)).matrix();
    }

    out.yields.dates = priced.dates;
    std::vector<int> requested = yield_maturities;
    std::sort(requested.begin(), requested.end());
    requested.erase(std::unique(requested.begin(), requested.end()), requested.end());
    out.yields.maturities_months = requested;
    out.yields.yields.resize(months, static_cast<Eigen::Index>(requested.size()));
    for (std::size_t j = 0; j < requested.size(); ++j) {
        out.yields.yields.col(static_cast<Eigen::Index>(j)) =
            priced.yields.col(static_cast<Eigen::Index>(priced.col_of(requested[j])));
    }

    if (!return_maturities.empty()) {
        out.returns = curve::excess_returns(priced, return_maturities);
        if (model.sigma2 > 0.0) {
            Rng noise(seed, 1);
            const double sd = std::sqrt(model.sigma2);
            for (Eigen::Index r = 0; r < out.returns.returns.rows(); ++r) {
                for (Eigen::Index c = 0; c < out.returns.returns.cols(); ++c) {
                    out.returns.returns(r, c) += noise.normal(0.0, sd);
                }
            }
        }
    }
    return out;
}

EstimateResult estimate(const Series& tail_risk, const curve::YieldPanel& yields,
                        const EstimateOptions& options, std::vector<std::string>* warnings) {
    yields.validate();
    EstimateOptions opts = options;
    if (opts.return_maturities.empty()) {
        for (int n = 6; n <= 120; n += 6) opts.return_maturities.push_back(n);
    }
    if (opts.pc_maturities.empty()) {
        for (int n = 3; n <= 120; n += 3) opts.pc_maturities.push_back(n);
    }
    int deepest = std::max(*std::max_element(opts.return_maturities.begin(),
                                             opts.return_maturities.end()),
                           *std::max_element(opts.pc_maturities.begin(),
                                             opts.pc_maturities.end()));
    if (opts.n_max < deepest) {
        throw ValidationError("estimate: n_max=" + std::to_string(opts.n_max) +
                              " is shorter than the deepest requested maturity " +
                              std::to_string(deepest));
    }

    // Sub-panel carrying the principal-component maturities.
    curve::YieldPanel sub;
    sub.dates = yields.dates;
    sub.maturities_months = opts.pc_maturities;
    sub.yields.resize(yields.yields.rows(),
                      static_cast<Eigen::Index>(opts.pc_maturities.size()));
    for (std::size_t j = 0; j < opts.pc_maturities.size(); ++j) {
        sub.yields.col(static_cast<Eigen::Index>(j)) =
            yields.yields.col(static_cast<Eigen::Index>(yields.col_of(opts.pc_maturities[j])));
    }

    auto x = opts.include_tail ? build_state(tail_risk, sub) : build_pc_state(sub);
    auto var = fit_var(x, /*zero_mean=*/true, warnings);

    auto rx_panel = curve::excess_returns(yields, opts.return_maturities);
    const Eigen::Index t = x.values.rows();
    Eigen::MatrixXd rx = rx_panel.returns.transpose();
    Eigen::MatrixXd x_lagged = x.values.topRows(t - 1).transpose();
    auto step2 = return_regression(rx, var.innovations, x_lagged);
    auto prices = price_of_risk(step2.a, step2.beta, step2.c, var.sigma, step2.sigma2);

    Series y1m(yields.dates,
               column_values(yields.yields, static_cast<Eigen::Index>(yields.col_of(1))), "y1m");
    auto short_rate = short_rate_regression(y1m, x);

    AtsmModel model;
    model.K = static_cast<int>(x.values.cols());
    model.mu = var.mu;
    model.phi = var.phi;
    model.sigma = var.sigma;
    model.lambda0 = prices.lambda0;
    model.lambda1 = prices.lambda1;
    model.sigma2 = step2.sigma2;
    model.delta0 = short_rate.delta0;
    model.delta1 = short_rate.delta1;
    model.beta = step2.beta;
    model.return_maturities = opts.return_maturities;
    auto rec = yield_recursions(model, opts.n_max);
    model.a = rec.a;
    model.b = rec.b;
    model.a_rn = rec.a_rn;
    model.b_rn = rec.b_rn;

    EstimateResult out;
    out.fit = fit_yields(model, x, sub);
    out.fit.return_errors = step2.residuals;
    out.lambda.resize(model.K, model.K + 1);
    out.lambda.col(0) = prices.lambda0;
    out.lambda.rightCols(model.K) = prices.lambda1;
    out.lambda_var = lambda_variances(step2, var.innovations, x_lagged, var.sigma,
                                      opts.block_length, opts.bootstrap_reps, opts.seed,
                                      opts.threads);
    out.spanning = wald_spanning(step2.beta, beta_variances(step2, var.innovations, x_lagged));
    out.prices = wald_prices(out.lambda, out.lambda_var);
    out.step2 = std::move(step2);
    return out;
}

} // namespace trb::atsm
