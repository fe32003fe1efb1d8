#include "doctest.h"

#include "trb/core/errors.hpp"
#include "trb/core/rng.hpp"
#include "trb/predict.hpp"
#include "trb/threepass.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

using namespace trb;

namespace {

Eigen::MatrixXd demean_rows(Eigen::MatrixXd m) {
    const Eigen::VectorXd means = m.rowwise().mean();
    m.colwise() -= means;
    return m;
}

/// Factor-model panel: returns(i, t) = loadings.row(i) * (premia + f_t) +
/// idio_sd * noise.  Factor column j is scaled by factor_sd[j].
struct FactorPanel {
    Eigen::MatrixXd returns;  // n x T
    Eigen::MatrixXd factors;  // k x T
    Eigen::MatrixXd loadings; // n x k
};

FactorPanel simulate_panel(int n, int t, const Eigen::VectorXd& premia,
                           const Eigen::VectorXd& factor_sd, double idio_sd, std::uint64_t seed) {
    const auto k = premia.size();
    FactorPanel out;
    Rng rb(seed, 0);
    out.loadings.resize(n, k);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < k; ++j)
            out.loadings(i, j) = (j == 0 ? 1.0 : 0.0) + 0.6 * rb.normal();
    Rng rf(seed, 1);
    out.factors.resize(k, t);
    for (int s = 0; s < t; ++s)
        for (int j = 0; j < k; ++j)
            out.factors(j, s) = factor_sd(j) * rf.normal();
    Rng re(seed, 2);
    out.returns.resize(n, t);
    for (int s = 0; s < t; ++s)
        out.returns.col(s) = out.loadings * (premia + out.factors.col(s));
    for (int i = 0; i < n; ++i)
        for (int s = 0; s < t; ++s)
            out.returns(i, s) += idio_sd * re.normal();
    return out;
}

double max_abs_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    return (a - b).cwiseAbs().maxCoeff();
}

} // namespace

TEST_CASE("threepass: first pass recovers a rank-one panel exactly") {
    const int n = 8;
    const int t = 30;
    Eigen::VectorXd loading(n);
    loading << 1.0, 0.8, 0.6, 0.4, 0.2, -0.1, -0.3, -0.5;
    Rng rng(41);
    Eigen::VectorXd score(t);
    for (int s = 0; s < t; ++s) score(s) = rng.normal();
    score.array() -= score.mean();
    const Eigen::MatrixXd centered = loading * score.transpose();

    auto pass = threepass::gx_pca(centered, 1);
    REQUIRE(pass.vhat.rows() == 1);
    REQUIRE(pass.vhat.cols() == t);
    REQUIRE(pass.beta.rows() == n);
    REQUIRE(pass.beta.cols() == 1);

    // The single component reconstructs the panel and carries the score
    // normalization vhat * vhat' = T.
    CHECK(max_abs_diff(pass.beta * pass.vhat, centered) < 1e-10);
    CHECK((pass.vhat * pass.vhat.transpose())(0, 0) == doctest::Approx(t).epsilon(1e-12));

    // The score series spans the generator's score exactly.
    const double align = (pass.vhat.row(0) * score)(0) / (std::sqrt(double(t)) * score.norm());
    CHECK(std::abs(std::abs(align) - 1.0) < 1e-12);
}

TEST_CASE("threepass: first pass matches a power-iteration oracle on a small panel") {
    const int n = 4;
    const int t = 6;
    Eigen::VectorXd base(t);
    base << 1.2, 0.8, 0.3, -0.5, -0.9, -0.9;
    Eigen::VectorXd level(n);
    level << 1.0, 0.9, 0.7, 0.5;
    Rng rng(3);
    Eigen::MatrixXd raw(n, t);
    for (int i = 0; i < n; ++i)
        for (int s = 0; s < t; ++s) raw(i, s) = 2.0 * level(i) * base(s) + 0.6 * rng.normal();
    const Eigen::MatrixXd centered = demean_rows(raw);
    const Eigen::MatrixXd gram =
        centered.transpose() * centered / (double(n) * double(t)); // t x t

    auto pass = threepass::gx_pca(centered, 4);

    // Every extracted score solves the eigenvalue equation of the Gram
    // matrix, the eigenvalues are sorted, and the top four exhaust the trace
    // (the panel has at most four nonzero directions).
    std::vector<double> eigenvalues;
    for (int j = 0; j < 4; ++j) {
        const Eigen::VectorXd xi = pass.vhat.row(j).transpose() / std::sqrt(double(t));
        const double lambda = xi.dot(gram * xi);
        CHECK((gram * xi - lambda * xi).cwiseAbs().maxCoeff() < 1e-12);
        if (j > 0) CHECK(lambda <= eigenvalues.back() + 1e-15);
        CHECK(lambda > 0.0);
        eigenvalues.push_back(lambda);
    }
    double trace_sum = 0.0;
    for (double v : eigenvalues) trace_sum += v;
    CHECK(trace_sum == doctest::Approx(gram.trace()).epsilon(1e-12));

    // Independent oracle for the dominant direction: plain power iteration.
    Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(t, 1.0, 2.0).normalized();
    for (int it = 0; it < 2000; ++it) x = (gram * x).normalized();
    const double sign = x.dot(pass.vhat.row(0).transpose()) >= 0 ? 1.0 : -1.0;
    CHECK((sign * std::sqrt(double(t)) * x - pass.vhat.row(0).transpose()).cwiseAbs().maxCoeff() <
          1e-6);

    // Loadings follow from the stated projection, and scores are orthonormal
    // at scale T.
    CHECK(max_abs_diff(pass.beta, centered * pass.vhat.transpose() / double(t)) < 1e-14);
    CHECK(max_abs_diff(pass.vhat * pass.vhat.transpose(),
                       double(t) * Eigen::MatrixXd::Identity(4, 4)) < 1e-10);
}

TEST_CASE("threepass: reconstruction error is monotone in the component count") {
    Rng rng(7);
    Eigen::MatrixXd raw(12, 40);
    for (int i = 0; i < raw.rows(); ++i)
        for (int s = 0; s < raw.cols(); ++s) raw(i, s) = rng.normal();
    const Eigen::MatrixXd centered = demean_rows(raw);

    double previous = centered.norm();
    for (int p = 1; p <= 6; ++p) {
        auto pass = threepass::gx_pca(centered, p);
        const double err = (centered - pass.beta * pass.vhat).norm();
        CHECK(err <= previous + 1e-12);
        previous = err;
    }

    // With as many components as assets the reconstruction is exact.
    auto full = threepass::gx_pca(centered, 12);
    CHECK((centered - full.beta * full.vhat).norm() < 1e-8 * centered.norm());

    CHECK_THROWS_AS((void)threepass::gx_pca(centered, 0), ValidationError);
    CHECK_THROWS_AS((void)threepass::gx_pca(centered, 13), ValidationError);
}

TEST_CASE("threepass: tied eigenvalues at the component boundary warn") {
    // Two orthogonal mean-zero patterns of equal norm give exactly tied top
    // eigenvalues; the remaining rows are flat.
    const int t = 8;
    Eigen::MatrixXd centered = Eigen::MatrixXd::Zero(4, t);
    centered.row(0) << 1, -1, 1, -1, 1, -1, 1, -1;
    centered.row(1) << 1, 1, -1, -1, 1, 1, -1, -1;

    std::vector<std::string> warnings;
    auto one = threepass::gx_pca(centered, 1, &warnings);
    REQUIRE(warnings.size() == 1);
    CHECK(warnings[0].find("tied") != std::string::npos);
    CHECK((one.vhat * one.vhat.transpose())(0, 0) == doctest::Approx(t).epsilon(1e-12));

    std::vector<std::string> clean;
    (void)threepass::gx_pca(centered, 2, &clean);
    CHECK(clean.empty());

    // The panel has rank two, so a third component does not exist.
    CHECK_THROWS_AS((void)threepass::gx_pca(centered, 3), NumericError);
}

TEST_CASE("threepass: cross-sectional pass solves the loading regression") {
    Eigen::MatrixXd beta(6, 2);
    beta << 1.0, 0.2, 0.9, -0.4, 0.7, 0.5, 0.5, -0.1, 0.3, 0.3, 0.1, -0.6;
    Eigen::VectorXd gamma(2);
    gamma << 0.3, -0.1;

    SUBCASE("exact system is recovered exactly") {
        const Eigen::VectorXd rbar = beta * gamma;
        CHECK((threepass::gx_cross_section(beta, rbar) - gamma).cwiseAbs().maxCoeff() < 1e-12);
    }

    SUBCASE("mean returns orthogonal to the loadings give zero premia") {
        Eigen::VectorXd w(6);
        w << 0.4, -0.2, 0.1, 0.5, -0.3, 0.2;
        const Eigen::VectorXd fitted = beta * (beta.transpose() * beta)
                                                  .ldlt()
                                                  .solve(beta.transpose() * w);
        const Eigen::VectorXd perp = w - fitted;
        CHECK(threepass::gx_cross_section(beta, perp).cwiseAbs().maxCoeff() < 1e-12);
    }

    SUBCASE("generic system matches an independent least-squares solver") {
        Eigen::VectorXd w(6);
        w << 0.12, -0.05, 0.33, 0.08, -0.21, 0.17;
        const auto fit = predict::ols(w, beta);
        CHECK((threepass::gx_cross_section(beta, w) - fit.coefficients).cwiseAbs().maxCoeff() <
              1e-10);
    }

    SUBCASE("rank-deficient loadings are an error") {
        Eigen::MatrixXd degenerate(6, 2);
        degenerate.col(0) = beta.col(0);
        degenerate.col(1) = 2.0 * beta.col(0);
        Eigen::VectorXd rbar = beta * gamma;
        CHECK_THROWS_AS((void)threepass::gx_cross_section(degenerate, rbar), NumericError);
    }
}

TEST_CASE("threepass: time-series pass projects the observed factor on the scores") {
    auto panel = simulate_panel(10, 60, (Eigen::VectorXd(2) << 0.3, -0.2).finished(),
                                (Eigen::VectorXd(2) << 2.0, 1.0).finished(), 0.2, 11);
    const Eigen::MatrixXd centered = demean_rows(panel.returns);
    auto pca = threepass::gx_pca(centered, 3);
    const Eigen::VectorXd gamma =
        threepass::gx_cross_section(pca.beta, panel.returns.rowwise().mean());

    SUBCASE("a factor equal to the first score is an identity projection") {
        Eigen::MatrixXd g = pca.vhat.row(0);
        auto ts = threepass::gx_time_series(g, pca.vhat, gamma);
        CHECK(std::abs(ts.eta(0, 0) - 1.0) < 1e-10);
        CHECK(std::abs(ts.eta(0, 1)) < 1e-10);
        CHECK(std::abs(ts.eta(0, 2)) < 1e-10);
        CHECK(ts.gamma_g(0) == doctest::Approx(gamma(0)).epsilon(1e-12));
        CHECK(ts.r2(0) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(ts.residuals.cwiseAbs().maxCoeff() < 1e-8);
    }

    SUBCASE("scaling the factor scales the loading and premium, not the fit") {
        Rng rng(13);
        Eigen::MatrixXd g(1, 60);
        for (int s = 0; s < 60; ++s) g(0, s) = rng.normal();
        g.array() -= g.mean();
        auto base = threepass::gx_time_series(g, pca.vhat, gamma);
        auto scaled = threepass::gx_time_series(Eigen::MatrixXd(-2.5 * g), pca.vhat, gamma);
        CHECK(max_abs_diff(scaled.eta, -2.5 * base.eta) < 1e-12);
        CHECK(std::abs(scaled.gamma_g(0) + 2.5 * base.gamma_g(0)) < 1e-12);
        CHECK(scaled.r2(0) == doctest::Approx(base.r2(0)).epsilon(1e-12));
    }

    SUBCASE("a flat factor is an error") {
        Eigen::MatrixXd flat = Eigen::MatrixXd::Zero(1, 60);
        CHECK_THROWS_AS((void)threepass::gx_time_series(flat, pca.vhat, gamma), ValidationError);
    }

    SUBCASE("conformability is validated") {
        Eigen::MatrixXd g = pca.vhat.row(0).leftCols(59);
        CHECK_THROWS_AS((void)threepass::gx_time_series(g, pca.vhat, gamma), ValidationError);
        Eigen::MatrixXd ok = pca.vhat.row(0);
        CHECK_THROWS_AS(
            (void)threepass::gx_time_series(ok, pca.vhat, Eigen::VectorXd::Zero(2)),
            ValidationError);
    }
}

TEST_CASE("threepass: a factor of pure noise has vanishing fit as the sample grows") {
    const Eigen::VectorXd premia = (Eigen::VectorXd(2) << 0.5, -0.2).finished();
    const Eigen::VectorXd sds = (Eigen::VectorXd(2) << 2.0, 1.0).finished();
    auto average_r2 = [&](int t, std::uint64_t seed_base) {
        double total_r2 = 0.0;
        double total_premium = 0.0;
        const int reps = 25;
        for (int r = 0; r < reps; ++r) {
            auto panel = simulate_panel(15, t, premia, sds, 0.3, seed_base + r);
            const Eigen::MatrixXd centered = demean_rows(panel.returns);
            auto pca = threepass::gx_pca(centered, 2);
            const Eigen::VectorXd gamma =
                threepass::gx_cross_section(pca.beta, panel.returns.rowwise().mean());
            Rng rng(seed_base + 1000 + r);
            Eigen::MatrixXd g(1, t);
            for (int s = 0; s < t; ++s) g(0, s) = rng.normal();
            g.array() -= g.mean();
            auto ts = threepass::gx_time_series(g, pca.vhat, gamma);
            total_r2 += ts.r2(0);
            total_premium += std::abs(ts.gamma_g(0));
        }
        return std::pair<double, double>{total_r2 / reps, total_premium / reps};
    };

    auto [r2_short, premium_short] = average_r2(150, 500);
    auto [r2_long, premium_long] = average_r2(900, 900);
    CHECK(r2_short < 0.1);
    CHECK(r2_long < 0.5 * r2_short);
    CHECK(premium_long < 0.1 * premia(0));
    (void)premium_short;
}

TEST_CASE("threepass: weak-factor test statistic and calibration") {
    // A longer sample keeps the finite-sample inflation of the HAC Wald well
    // inside the calibration band checked below.
    auto panel = simulate_panel(10, 480, (Eigen::VectorXd(2) << 0.4, -0.1).finished(),
                                (Eigen::VectorXd(2) << 2.0, 1.0).finished(), 0.3, 19);
    const Eigen::MatrixXd centered = demean_rows(panel.returns);
    auto pca = threepass::gx_pca(centered, 2);
    const Eigen::VectorXd gamma =
        threepass::gx_cross_section(pca.beta, panel.returns.rowwise().mean());

    SUBCASE("zero loadings give a zero statistic and unit p-value") {
        Rng rng(23);
        Eigen::MatrixXd resid(1, 480);
        for (int s = 0; s < 480; ++s) resid(0, s) = rng.normal();
        resid.array() -= resid.mean();
        auto walds =
            threepass::gx_weak_test(Eigen::MatrixXd::Zero(1, 2), pca.vhat, resid, 12);
        REQUIRE(walds.size() == 1);
        CHECK(walds[0].stat == 0.0);
        CHECK(walds[0].p == 1.0);
    }

    SUBCASE("statistic matches an independent HAC sandwich") {
        Rng rng(29);
        Eigen::MatrixXd g(1, 480);
        for (int s = 0; s < 480; ++s)
            g(0, s) = 0.02 * pca.vhat(0, s) - 0.05 * pca.vhat(1, s) + rng.normal();
        g.array() -= g.mean();
        auto ts = threepass::gx_time_series(g, pca.vhat, gamma);
        auto walds = threepass::gx_weak_test(ts.eta, pca.vhat, ts.residuals, 12);

        const auto fit = predict::ols(g.row(0).transpose(), pca.vhat.transpose());
        CHECK((fit.coefficients.transpose() - ts.eta.row(0)).cwiseAbs().maxCoeff() < 1e-10);
        const Eigen::MatrixXd cov = predict::newey_west_cov(fit, 12);
        const double oracle =
            (ts.eta.row(0) * cov.inverse() * ts.eta.row(0).transpose())(0, 0);
        CHECK(walds[0].stat == doctest::Approx(oracle).epsilon(1e-8));
        CHECK(walds[0].p >= 0.0);
        CHECK(walds[0].p <= 1.0);
    }

    SUBCASE("size stays near the nominal level under the null") {
        // The long-lag HAC Wald is oversized in short samples, so the size
        // check runs on a sample long enough for the asymptotics to bind.
        auto wide = simulate_panel(10, 2000, (Eigen::VectorXd(2) << 0.4, -0.1).finished(),
                                   (Eigen::VectorXd(2) << 2.0, 1.0).finished(), 0.3, 20);
        const Eigen::MatrixXd wide_centered = demean_rows(wide.returns);
        auto wide_pca = threepass::gx_pca(wide_centered, 2);
        const Eigen::VectorXd wide_gamma =
            threepass::gx_cross_section(wide_pca.beta, wide.returns.rowwise().mean());
        int rejections = 0;
        const int sims = 1000;
        for (int sim = 0; sim < sims; ++sim) {
            Rng rng(3000 + sim);
            Eigen::MatrixXd g(1, 2000);
            for (int s = 0; s < 2000; ++s) g(0, s) = rng.normal();
            g.array() -= g.mean();
            auto ts = threepass::gx_time_series(g, wide_pca.vhat, wide_gamma);
            auto walds = threepass::gx_weak_test(ts.eta, wide_pca.vhat, ts.residuals, 12);
            if (walds[0].p < 0.10) ++rejections;
        }
        CHECK(rejections >= 60);
        CHECK(rejections <= 140);
    }

    SUBCASE("a strong factor is always detected") {
        int rejections = 0;
        const int sims = 100;
        for (int sim = 0; sim < sims; ++sim) {
            Rng rng(5000 + sim);
            Eigen::MatrixXd g(1, 480);
            for (int s = 0; s < 480; ++s) g(0, s) = pca.vhat(0, s) + rng.normal();
            g.array() -= g.mean();
            auto ts = threepass::gx_time_series(g, pca.vhat, gamma);
            auto walds = threepass::gx_weak_test(ts.eta, pca.vhat, ts.residuals, 12);
            if (walds[0].p < 0.05) ++rejections;
        }
        CHECK(rejections == sims);
    }
}

TEST_CASE("threepass: bootstrap standard errors are deterministic and thread-invariant") {
    auto panel = simulate_panel(8, 120, (Eigen::VectorXd(2) << 0.3, -0.2).finished(),
                                (Eigen::VectorXd(2) << 1.5, 1.0).finished(), 0.3, 37);
    Rng rng(39);
    Eigen::MatrixXd g(1, 120);
    for (int s = 0; s < 120; ++s) g(0, s) = panel.factors(0, s) + 0.5 * rng.normal();

    threepass::ThreePassOptions options;
    options.p = 2;
    options.bootstrap_reps = 99;
    options.seed = 5;

    const Eigen::VectorXd first = threepass::gx_se(panel.returns, g, options);
    const Eigen::VectorXd second = threepass::gx_se(panel.returns, g, options);
    CHECK((first - second).cwiseAbs().maxCoeff() == 0.0);

    options.threads = 4;
    const Eigen::VectorXd threaded = threepass::gx_se(panel.returns, g, options);
    CHECK((first - threaded).cwiseAbs().maxCoeff() == 0.0);

    options.threads = 1;
    options.seed = 6;
    const Eigen::VectorXd reseeded = threepass::gx_se(panel.returns, g, options);
    CHECK((first - reseeded).cwiseAbs().maxCoeff() > 0.0);
    CHECK(first.minCoeff() > 0.0);

    options.bootstrap_reps = 1;
    CHECK_THROWS_AS((void)threepass::gx_se(panel.returns, g, options), ValidationError);
    options.bootstrap_reps = 99;
    options.block_length = 0;
    CHECK_THROWS_AS((void)threepass::gx_se(panel.returns, g, options), ValidationError);
}

TEST_CASE("threepass: bootstrap standard errors shrink at the root-T rate") {
    auto run = [](int t) {
        Rng rb(21, 0);
        Eigen::VectorXd loading(8);
        for (int i = 0; i < 8; ++i) loading(i) = 1.2 + 0.2 * rb.normal();
        Rng rf(21, 1);
        Eigen::VectorXd score(t);
        for (int s = 0; s < t; ++s) score(s) = rf.normal();
        Eigen::MatrixXd returns(8, t);
        for (int s = 0; s < t; ++s) returns.col(s) = loading * (0.5 + score(s));
        Eigen::MatrixXd g = 2.0 * score.transpose();

        threepass::ThreePassOptions options;
        options.p = 1;
        options.bootstrap_reps = 299;
        options.seed = 43;
        return threepass::gx_se(returns, g, options)(0);
    };

    const double se_short = run(200);
    const double se_long = run(800);
    CHECK(se_long > 0.0);
    // Quadrupling the sample should halve the error, give or take.
    const double ratio = se_short / se_long;
    CHECK(ratio > 2.0 / 1.6);
    CHECK(ratio < 2.0 * 1.6);
    CHECK(se_long < 0.15);
}

TEST_CASE("threepass: premia are invariant to invertible score rotations") {
    auto panel = simulate_panel(10, 80, (Eigen::VectorXd(2) << 0.4, -0.1).finished(),
                                (Eigen::VectorXd(2) << 2.0, 1.0).finished(), 0.2, 17);
    const Eigen::MatrixXd centered = demean_rows(panel.returns);
    const Eigen::VectorXd rbar = panel.returns.rowwise().mean();
    auto pca = threepass::gx_pca(centered, 3);
    const Eigen::VectorXd gamma = threepass::gx_cross_section(pca.beta, rbar);

    Rng rng(47);
    Eigen::MatrixXd g(1, 80);
    for (int s = 0; s < 80; ++s)
        g(0, s) = panel.factors(0, s) + 0.5 * panel.factors(1, s) + 0.4 * rng.normal();
    g.array() -= g.mean();
    auto ts = threepass::gx_time_series(g, pca.vhat, gamma);
    auto wald = threepass::gx_weak_test(ts.eta, pca.vhat, ts.residuals, 12);

    Eigen::MatrixXd h(3, 3);
    Rng hr(53);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) h(i, j) = hr.normal();
    REQUIRE(std::abs(h.determinant()) > 0.05);

    // Rotate scores by H and loadings by H^-1; every reported quantity about
    // the observed factor must be unchanged.
    const Eigen::MatrixXd vhat_rot = h * pca.vhat;
    const Eigen::MatrixXd beta_rot = pca.beta * h.inverse();
    const Eigen::VectorXd gamma_rot = threepass::gx_cross_section(beta_rot, rbar);
    auto ts_rot = threepass::gx_time_series(g, vhat_rot, gamma_rot);
    auto wald_rot = threepass::gx_weak_test(ts_rot.eta, vhat_rot, ts_rot.residuals, 12);

    CHECK(std::abs(ts_rot.gamma_g(0) - ts.gamma_g(0)) < 1e-10);
    CHECK(std::abs(ts_rot.r2(0) - ts.r2(0)) < 1e-10);
    CHECK(wald_rot[0].stat == doctest::Approx(wald[0].stat).epsilon(1e-8));
    CHECK(max_abs_diff(ts_rot.residuals, ts.residuals) < 1e-10);
}

TEST_CASE("threepass: estimates are invariant to the asset ordering") {
    auto panel = simulate_panel(12, 100, (Eigen::VectorXd(2) << 0.4, -0.1).finished(),
                                (Eigen::VectorXd(2) << 2.0, 1.0).finished(), 0.3, 59);
    Rng rng(61);
    Eigen::MatrixXd g(1, 100);
    for (int s = 0; s < 100; ++s) g(0, s) = panel.factors(0, s) + 0.6 * rng.normal();

    threepass::ThreePassOptions options;
    options.p = 2;
    options.bootstrap_reps = 49;
    options.seed = 3;

    auto base = threepass::estimate(panel.returns, g, options);
    auto flipped = threepass::estimate(panel.returns.colwise().reverse().eval(), g, options);

    CHECK(std::abs(base.gamma_g(0) - flipped.gamma_g(0)) < 1e-10);
    CHECK(std::abs(base.r2_g(0) - flipped.r2_g(0)) < 1e-10);
    CHECK(std::abs(base.weak_wald[0].stat - flipped.weak_wald[0].stat) < 1e-8);
    CHECK(std::abs(base.se_gamma_g(0) - flipped.se_gamma_g(0)) < 1e-10);
    // Loadings travel with their assets.
    CHECK((base.beta.row(0) - flipped.beta.row(11)).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("threepass: observed-factor fit is monotone in the component count") {
    auto panel = simulate_panel(16, 300, (Eigen::VectorXd(3) << 0.4, -0.2, 0.1).finished(),
                                (Eigen::VectorXd(3) << 2.0, 1.0, 0.5).finished(), 0.3, 67);
    const Eigen::MatrixXd centered = demean_rows(panel.returns);
    const Eigen::VectorXd rbar = panel.returns.rowwise().mean();
    Rng rng(71);
    Eigen::MatrixXd g(1, 300);
    // The factor tracks the second-largest source of curve variation, so the
    // fit should jump once the second component enters.
    for (int s = 0; s < 300; ++s) g(0, s) = panel.factors(1, s) + 0.4 * rng.normal();
    g.array() -= g.mean();

    double previous = -1.0;
    std::vector<double> r2s;
    for (int p = 1; p <= 8; ++p) {
        auto pca = threepass::gx_pca(centered, p);
        const Eigen::VectorXd gamma = threepass::gx_cross_section(pca.beta, rbar);
        auto ts = threepass::gx_time_series(g, pca.vhat, gamma);
        CHECK(ts.r2(0) >= previous - 1e-12);
        CHECK(ts.r2(0) <= 1.0);
        previous = ts.r2(0);
        r2s.push_back(ts.r2(0));
    }
    CHECK(r2s[1] > r2s[0] + 0.2);
}

TEST_CASE("threepass: full pipeline recovers noisy-factor premia without attenuation") {
    const int n = 25;
    const int t = 2000;
    Rng rb(31, 0);
    Eigen::MatrixXd loadings(n, 2);
    for (int i = 0; i < n; ++i) {
        loadings(i, 0) = 1.0 + 0.3 * rb.normal();
        loadings(i, 1) = 0.5 * rb.normal();
    }
    const Eigen::VectorXd premia = (Eigen::VectorXd(2) << 0.4, -0.2).finished();
    Rng rf(31, 1);
    Eigen::MatrixXd factors(2, t);
    for (int s = 0; s < t; ++s) {
        factors(0, s) = rf.normal();
        factors(1, s) = rf.normal();
    }
    Rng re(31, 2);
    Eigen::MatrixXd returns(n, t);
    for (int s = 0; s < t; ++s) returns.col(s) = loadings * (premia + factors.col(s));
    for (int i = 0; i < n; ++i)
        for (int s = 0; s < t; ++s) returns(i, s) += 0.3 * re.normal();

    // Both observed factors are heavily contaminated with noise that never
    // touches the return panel; the premia should still be recovered at
    // their uncontaminated values.
    Rng rz(31, 3);
    Eigen::MatrixXd g(2, t);
    for (int s = 0; s < t; ++s) {
        g(0, s) = factors(0, s) + 1.0 * rz.normal();
        g(1, s) = factors(1, s) - factors(0, s) + 0.7 * rz.normal();
    }

    threepass::ThreePassOptions options;
    options.p = 2;
    options.bootstrap_reps = 199;
    options.seed = 31;

    auto res = threepass::estimate(returns, g, options);
    REQUIRE(res.p == 2);
    REQUIRE(res.vhat.rows() == 2);
    REQUIRE(res.vhat.cols() == t);
    REQUIRE(res.beta.rows() == n);
    REQUIRE(res.gamma_g.size() == 2);
    REQUIRE(res.se_gamma_g.size() == 2);
    REQUIRE(res.weak_wald.size() == 2);

    CHECK(std::abs(res.gamma_g(0) - 0.4) < 0.1);
    CHECK(std::abs(res.gamma_g(1) + 0.6) < 0.12);
    CHECK(std::abs(res.gamma_g(0) - 0.4) < 4.0 * res.se_gamma_g(0));
    CHECK(std::abs(res.gamma_g(1) + 0.6) < 4.0 * res.se_gamma_g(1));
    CHECK(res.se_gamma_g.minCoeff() > 0.0);
    CHECK(res.se_gamma_g.maxCoeff() < 0.15);

    // A fifty-fifty noise mix caps the time-series fit near one half.
    CHECK(res.r2_g(0) > 0.35);
    CHECK(res.r2_g(0) < 0.65);
    CHECK(res.r2_g(1) > 0.6);
    CHECK(res.r2_g(1) < 0.92);
    CHECK(res.weak_wald[0].p < 1e-6);
    CHECK(res.weak_wald[1].p < 1e-6);

    // Reported premia are exactly the composition of the two passes, and the
    // scores keep their normalization.
    CHECK((res.gamma_g - res.eta * res.gamma).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(max_abs_diff(res.vhat * res.vhat.transpose() / double(t),
                       Eigen::MatrixXd::Identity(2, 2)) < 1e-10);
}

TEST_CASE("threepass: estimate validates its inputs") {
    Eigen::MatrixXd returns = Eigen::MatrixXd::Random(5, 20);
    Eigen::MatrixXd g = Eigen::MatrixXd::Random(1, 20);
    threepass::ThreePassOptions options;
    options.p = 2;
    options.bootstrap_reps = 9;

    CHECK_THROWS_AS((void)threepass::estimate(returns, g.leftCols(19), options), ValidationError);

    threepass::ThreePassOptions bad = options;
    bad.p = 0;
    CHECK_THROWS_AS((void)threepass::estimate(returns, g, bad), ValidationError);
    bad.p = 6;
    CHECK_THROWS_AS((void)threepass::estimate(returns, g, bad), ValidationError);

    threepass::ThreePassOptions tiny = options;
    tiny.bootstrap_reps = 1;
    CHECK_THROWS_AS((void)threepass::estimate(returns, g, tiny), ValidationError);

    CHECK_THROWS_AS(
        (void)threepass::estimate(returns.leftCols(1), g.leftCols(1), options), ValidationError);

    Eigen::MatrixXd flat = Eigen::MatrixXd::Constant(1, 20, 0.7);
    CHECK_THROWS_AS((void)threepass::estimate(returns, flat, options), ValidationError);
}
