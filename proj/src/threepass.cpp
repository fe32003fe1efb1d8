#include "trb/threepass.hpp"

#include "trb/core/errors.hpp"
#include "trb/core/parallel.hpp"
#include "trb/core/rng.hpp"
#include "trb/core/stats.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

namespace trb::threepass {

namespace {

double chi2_upper_p(double stat, double dof) {
    if (stat <= 0.0) return 1.0;
    const boost::math::chi_squared dist(dof);
    return boost::math::cdf(boost::math::complement(dist, stat));
}

Eigen::MatrixXd demeaned_rows(const Eigen::MatrixXd& m) {
    Eigen::MatrixXd out = m;
    out.colwise() -= Eigen::VectorXd(m.rowwise().mean());
    return out;
}

// A constant factor row survives demeaning with roundoff-sized residue, so
// the degeneracy has to be caught on the raw values.
void reject_constant_rows(const Eigen::MatrixXd& g, const char* where) {
    for (Eigen::Index i = 0; i < g.rows(); ++i)
        if (g.row(i).maxCoeff() == g.row(i).minCoeff())
            throw ValidationError(std::string(where) + ": observed factor row " +
                                  std::to_string(i) + " is constant");
}

} // namespace

PcaPass gx_pca(const Eigen::MatrixXd& centered, int p, std::vector<std::string>* warnings) {
    const Eigen::Index n = centered.rows();
    const Eigen::Index t = centered.cols();
    if (n < 1 || t < 1) throw ValidationError("gx_pca: the return panel is empty");
    const Eigen::Index cap = std::min(n, t);
    if (p < 1 || p > cap)
        throw ValidationError("gx_pca: component count " + std::to_string(p) + " outside 1.." +
                              std::to_string(cap));

    const double scale = 1.0 / (static_cast<double>(n) * static_cast<double>(t));

    // Decompose whichever Gram matrix is smaller; the two sides share their
    // nonzero spectrum and the score-side eigenvectors follow by projection.
    Eigen::MatrixXd xi(t, p);
    Eigen::VectorXd lambda(p);
    bool have_boundary = false;
    double boundary = 0.0;
    if (t <= n) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(
            Eigen::MatrixXd(centered.transpose() * centered * scale));
        if (solver.info() != Eigen::Success)
            throw NumericError("gx_pca: eigenvalue decomposition failed");
        for (int j = 0; j < p; ++j) {
            const Eigen::Index idx = t - 1 - j;
            lambda(j) = solver.eigenvalues()(idx);
            xi.col(j) = solver.eigenvectors().col(idx);
        }
        if (p < t) {
            have_boundary = true;
            boundary = solver.eigenvalues()(t - 1 - p);
        }
    } else {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(
            Eigen::MatrixXd(centered * centered.transpose() * scale));
        if (solver.info() != Eigen::Success)
            throw NumericError("gx_pca: eigenvalue decomposition failed");
        for (int j = 0; j < p; ++j) {
            const Eigen::Index idx = n - 1 - j;
            lambda(j) = solver.eigenvalues()(idx);
            xi.col(j) = centered.transpose() * solver.eigenvectors().col(idx);
            const double norm = xi.col(j).norm();
            if (norm > 0.0) xi.col(j) /= norm;
        }
        // Beyond the asset count the spectrum is exactly zero.
        have_boundary = true;
        boundary = p < n ? solver.eigenvalues()(n - 1 - p) : 0.0;
    }

    const double top = std::max(lambda(0), 0.0);
    for (int j = 0; j < p; ++j)
        if (!(lambda(j) > top * 1e-13))
            throw NumericError("gx_pca: the panel supports only " + std::to_string(j) +
                               " components; " + std::to_string(p) + " requested");

    // Deterministic orientation: the largest-magnitude coordinate of each
    // score eigenvector points up.
    for (int j = 0; j < p; ++j) {
        Eigen::Index imax = 0;
        xi.col(j).cwiseAbs().maxCoeff(&imax);
        if (xi(imax, j) < 0.0) xi.col(j) = -xi.col(j);
    }

    if (warnings && have_boundary && lambda(p - 1) - boundary <= 1e-10 * std::max(top, 1e-300))
        warnings->push_back("gx_pca: eigenvalues " + std::to_string(p) + " and " +
                            std::to_string(p + 1) +
                            " are numerically tied; the component rotation at the boundary is "
                            "arbitrary");

    PcaPass out;
    out.vhat = std::sqrt(static_cast<double>(t)) * xi.transpose();
    out.beta = centered * out.vhat.transpose() / static_cast<double>(t);
    return out;
}

Eigen::VectorXd gx_cross_section(const Eigen::MatrixXd& beta,
                                 const Eigen::VectorXd& mean_returns) {
    if (beta.rows() != mean_returns.size())
        throw ValidationError("gx_cross_section: loadings hold " + std::to_string(beta.rows()) +
                              " assets but " + std::to_string(mean_returns.size()) +
                              " mean returns were given");
    if (beta.rows() < beta.cols())
        throw ValidationError("gx_cross_section: fewer assets than components");
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(beta);
    if (qr.rank() < beta.cols())
        throw NumericError("gx_cross_section: loadings are rank deficient (rank " +
                           std::to_string(qr.rank()) + " of " + std::to_string(beta.cols()) +
                           ")");
    return qr.solve(mean_returns);
}

TimeSeriesPass gx_time_series(const Eigen::MatrixXd& g_centered, const Eigen::MatrixXd& vhat,
                              const Eigen::VectorXd& gamma) {
    const Eigen::Index d = g_centered.rows();
    const Eigen::Index p = vhat.rows();
    const Eigen::Index t = vhat.cols();
    if (d < 1) throw ValidationError("gx_time_series: no observed factors");
    if (g_centered.cols() != t)
        throw ValidationError("gx_time_series: factors cover " +
                              std::to_string(g_centered.cols()) +
                              " months but the scores cover " + std::to_string(t));
    if (gamma.size() != p)
        throw ValidationError("gx_time_series: " + std::to_string(gamma.size()) +
                              " premia supplied for " + std::to_string(p) + " scores");
    if (t <= p) throw ValidationError("gx_time_series: more components than months");
    for (Eigen::Index i = 0; i < d; ++i)
        if (g_centered.row(i).squaredNorm() == 0.0)
            throw ValidationError("gx_time_series: observed factor row " + std::to_string(i) +
                                  " has zero variance");

    // Least squares on the score matrix keeps the pass exact for arbitrary
    // invertible rotations of the scores, which is what makes the premium of
    // the observed factor rotation invariant.
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(vhat.transpose());
    if (qr.rank() < p) throw NumericError("gx_time_series: scores are rank deficient");

    TimeSeriesPass out;
    out.eta.resize(d, p);
    for (Eigen::Index i = 0; i < d; ++i)
        out.eta.row(i) = qr.solve(g_centered.row(i).transpose()).transpose();
    out.residuals = g_centered - out.eta * vhat;
    out.gamma_g = out.eta * gamma;
    out.r2.resize(d);
    for (Eigen::Index i = 0; i < d; ++i) {
        const double explained = (out.eta.row(i) * vhat).squaredNorm();
        out.r2(i) = std::clamp(explained / g_centered.row(i).squaredNorm(), 0.0, 1.0);
    }
    return out;
}

std::vector<WaldResult> gx_weak_test(const Eigen::MatrixXd& eta, const Eigen::MatrixXd& vhat,
                                     const Eigen::MatrixXd& residuals, int hac_lags) {
    const Eigen::Index d = eta.rows();
    const Eigen::Index p = eta.cols();
    const Eigen::Index t = vhat.cols();
    if (vhat.rows() != p)
        throw ValidationError("gx_weak_test: " + std::to_string(p) + "-column loadings against " +
                              std::to_string(vhat.rows()) + " score rows");
    if (residuals.rows() != d || residuals.cols() != t)
        throw ValidationError("gx_weak_test: residual panel must be " + std::to_string(d) + " x " +
                              std::to_string(t));
    if (hac_lags < 0) throw ValidationError("gx_weak_test: lag count must be nonnegative");
    if (t <= p) throw ValidationError("gx_weak_test: more components than months");

    const Eigen::MatrixXd gram = vhat * vhat.transpose();
    const int lags = static_cast<int>(std::min<Eigen::Index>(hac_lags, t - 1));

    std::vector<WaldResult> out;
    out.reserve(static_cast<std::size_t>(d));
    for (Eigen::Index i = 0; i < d; ++i) {
        if (eta.row(i).cwiseAbs().maxCoeff() == 0.0) {
            out.push_back({0.0, 1.0});
            continue;
        }
        Eigen::MatrixXd scores(p, t);
        for (Eigen::Index s = 0; s < t; ++s) scores.col(s) = vhat.col(s) * residuals(i, s);
        Eigen::MatrixXd meat = scores * scores.transpose();
        for (int l = 1; l <= lags; ++l) {
            const double w = 1.0 - static_cast<double>(l) / (static_cast<double>(lags) + 1.0);
            Eigen::MatrixXd cross = Eigen::MatrixXd::Zero(p, p);
            for (Eigen::Index s = l; s < t; ++s)
                cross.noalias() += scores.col(s) * scores.col(s - l).transpose();
            meat.noalias() += w * (cross + cross.transpose());
        }
        // The coefficient covariance is (V V')^-1 meat (V V')^-1, so the
        // Wald form collapses to m' meat^-1 m with m = (V V') eta_i'.
        const Eigen::VectorXd m = gram * eta.row(i).transpose();
        const Eigen::LDLT<Eigen::MatrixXd> ldlt(meat);
        if (ldlt.info() != Eigen::Success)
            throw NumericError("gx_weak_test: HAC covariance is singular");
        const double stat = m.dot(ldlt.solve(m));
        if (!std::isfinite(stat))
            throw NumericError("gx_weak_test: HAC covariance is singular");
        out.push_back({stat, chi2_upper_p(stat, static_cast<double>(p))});
    }
    return out;
}

Eigen::VectorXd gx_se(const Eigen::MatrixXd& returns, const Eigen::MatrixXd& g,
                      const ThreePassOptions& options) {
    const Eigen::Index n = returns.rows();
    const Eigen::Index t = returns.cols();
    const Eigen::Index d = g.rows();
    if (n < 1 || d < 1) throw ValidationError("gx_se: empty inputs");
    if (g.cols() != t)
        throw ValidationError("gx_se: factors cover " + std::to_string(g.cols()) +
                              " months but returns cover " + std::to_string(t));
    if (t < 2) throw ValidationError("gx_se: at least two months are required");
    if (options.p < 1 || options.p > std::min(n, t))
        throw ValidationError("gx_se: component count " + std::to_string(options.p) +
                              " outside 1.." + std::to_string(std::min(n, t)));
    if (options.bootstrap_reps < 2)
        throw ValidationError("gx_se: at least two bootstrap replications are required");
    if (options.block_length < 1) throw ValidationError("gx_se: block length must be positive");
    if (options.threads < 1) throw ValidationError("gx_se: thread count must be positive");
    reject_constant_rows(g, "gx_se");

    const int reps = options.bootstrap_reps;
    Eigen::MatrixXd draws(reps, d);
    parallel_for(static_cast<std::size_t>(reps), options.threads, [&](std::size_t rep) {
        Rng rng(options.seed, rep);
        Eigen::MatrixXd r_star(n, t);
        Eigen::MatrixXd g_star(d, t);
        Eigen::Index filled = 0;
        while (filled < t) {
            const auto start =
                static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(t)));
            for (int k = 0; k < options.block_length && filled < t; ++k, ++filled) {
                const Eigen::Index src = (start + k) % t;
                r_star.col(filled) = returns.col(src);
                g_star.col(filled) = g.col(src);
            }
        }
        const auto pca = gx_pca(demeaned_rows(r_star), options.p, nullptr);
        const Eigen::VectorXd gamma = gx_cross_section(pca.beta, r_star.rowwise().mean());
        const auto ts = gx_time_series(demeaned_rows(g_star), pca.vhat, gamma);
        draws.row(static_cast<Eigen::Index>(rep)) = ts.gamma_g.transpose();
    });

    Eigen::VectorXd se(d);
    std::vector<double> column(static_cast<std::size_t>(reps));
    for (Eigen::Index i = 0; i < d; ++i) {
        for (int rep = 0; rep < reps; ++rep) column[static_cast<std::size_t>(rep)] = draws(rep, i);
        se(i) = stats::sd(column);
    }
    return se;
}

ThreePassResult estimate(const Eigen::MatrixXd& returns, const Eigen::MatrixXd& g,
                         const ThreePassOptions& options, std::vector<std::string>* warnings) {
    const Eigen::Index n = returns.rows();
    const Eigen::Index t = returns.cols();
    if (n < 1 || t < 2)
        throw ValidationError(
            "estimate: the return panel needs at least one asset and two months");
    if (g.rows() < 1) throw ValidationError("estimate: no observed factors");
    if (g.cols() != t)
        throw ValidationError("estimate: factors cover " + std::to_string(g.cols()) +
                              " months but returns cover " + std::to_string(t));
    if (options.p < 1 || options.p > std::min(n, t))
        throw ValidationError("estimate: component count " + std::to_string(options.p) +
                              " outside 1.." + std::to_string(std::min(n, t)));
    if (options.bootstrap_reps < 2)
        throw ValidationError("estimate: at least two bootstrap replications are required");
    reject_constant_rows(g, "estimate");

    const Eigen::VectorXd rbar = returns.rowwise().mean();
    Eigen::MatrixXd centered = returns;
    centered.colwise() -= rbar;

    auto pca = gx_pca(centered, options.p, warnings);
    const Eigen::VectorXd gamma = gx_cross_section(pca.beta, rbar);
    const auto ts = gx_time_series(demeaned_rows(g), pca.vhat, gamma);

    ThreePassResult out;
    out.p = options.p;
    out.vhat = std::move(pca.vhat);
    out.beta = std::move(pca.beta);
    out.gamma = gamma;
    out.eta = ts.eta;
    out.gamma_g = ts.gamma_g;
    out.r2_g = ts.r2;
    out.weak_wald = gx_weak_test(ts.eta, out.vhat, ts.residuals, options.hac_lags);
    out.se_gamma_g = gx_se(returns, g, options);
    return out;
}

} // namespace trb::threepass
