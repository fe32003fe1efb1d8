#include "doctest.h"

#include "trb/core/errors.hpp"
#include "trb/core/rng.hpp"
#include "trb/core/stats.hpp"
#include "trb/curve.hpp"
#include "trb/synthlab.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

using namespace trb;
using curve::NssParams;
using curve::YieldPanel;

namespace {

std::vector<Date> monthly_dates(int year, int month, int count) {
    std::vector<Date> dates;
    Date d{year, month, 1};
    for (int i = 0; i < count; ++i) {
        dates.push_back(d.month_end());
        d = d.add_months(1);
    }
    return dates;
}

YieldPanel random_panel(int t, std::vector<int> maturities, std::uint64_t seed) {
    YieldPanel panel;
    panel.dates = monthly_dates(1996, 1, t);
    panel.maturities_months = std::move(maturities);
    const auto m = static_cast<Eigen::Index>(panel.maturities_months.size());
    panel.yields.resize(t, m);
    Rng rng(seed, 0);
    for (Eigen::Index i = 0; i < t; ++i)
        for (Eigen::Index j = 0; j < m; ++j)
            panel.yields(i, j) = 0.03 + 0.002 * static_cast<double>(j) + 0.01 * rng.normal();
    return panel;
}

// Hand cofactor expansion, independent of any eigen machinery.
double det3(const Eigen::Matrix3d& a) {
    return a(0, 0) * (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1)) -
           a(0, 1) * (a(1, 0) * a(2, 2) - a(1, 2) * a(2, 0)) +
           a(0, 2) * (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0));
}

} // namespace

TEST_CASE("nss_yield limits and an independent scalar oracle") {
    NssParams p;
    p.beta0 = 0.03;
    p.beta1 = -0.01;
    p.beta2 = 0.02;
    p.beta3 = 0.00;
    p.tau1 = 1.5;
    p.tau2 = 10.0;

    // n -> 0+ tends to beta0 + beta1; n -> infinity tends to beta0
    CHECK(curve::nss_yield(p, 1e-9) == doctest::Approx(0.02).epsilon(1e-8));
    CHECK(curve::nss_yield(p, 1e6) == doctest::Approx(0.03).epsilon(1e-6));

    CHECK(curve::nss_yield(p, 2.0) ==
          doctest::Approx(0.030251078701817514).epsilon(1e-14));
    CHECK(curve::nss_yield(p, 2.0) ==
          doctest::Approx(synthlab::nss_yield_reference(0.03, -0.01, 0.02, 0.0, 1.5, 10.0, 2.0))
              .epsilon(1e-13));

    NssParams q;
    q.beta0 = 0.051;
    q.beta1 = -0.023;
    q.beta2 = 0.034;
    q.beta3 = -0.019;
    q.tau1 = 0.9;
    q.tau2 = 6.5;
    for (double n : {0.25, 1.0, 2.0, 5.0, 10.0, 30.0})
        CHECK(curve::nss_yield(q, n) ==
              doctest::Approx(synthlab::nss_yield_reference(q.beta0, q.beta1, q.beta2, q.beta3,
                                                            q.tau1, q.tau2, n))
                  .epsilon(1e-13));

    CHECK_THROWS_AS((void)curve::nss_yield(p, 0.0), ValidationError);
    CHECK_THROWS_AS((void)curve::nss_yield(p, -1.0), ValidationError);
    NssParams bad = p;
    bad.tau1 = 0.0;
    CHECK_THROWS_AS((void)curve::nss_yield(bad, 1.0), ValidationError);
}

TEST_CASE("fit_nss recovers a generating curve from noiseless points") {
    NssParams truth;
    truth.beta0 = 0.05;
    truth.beta1 = -0.02;
    truth.beta2 = 0.03;
    truth.beta3 = 0.015;
    truth.tau1 = 1.3;
    truth.tau2 = 7.0;
    const std::vector<double> mats{0.25, 0.5, 1.0, 2.0, 3.0, 4.0, 5.0, 7.0, 10.0, 15.0, 20.0, 30.0};
    std::vector<std::pair<double, double>> observed;
    for (double n : mats) observed.emplace_back(n, curve::nss_yield(truth, n));

    const NssParams fit = curve::fit_nss(observed);
    double sse = 0.0;
    for (const auto& [n, y] : observed) {
        const double e = curve::nss_yield(fit, n) - y;
        sse += e * e;
    }
    CHECK(std::sqrt(sse / static_cast<double>(observed.size())) < 1e-8);
    // identical curve off the observation grid too
    for (double n : {0.75, 1.7, 6.0, 12.0, 25.0})
        CHECK(curve::nss_yield(fit, n) == doctest::Approx(curve::nss_yield(truth, n)).epsilon(1e-7));
}

TEST_CASE("fit_nss on a flat curve is flat") {
    std::vector<std::pair<double, double>> observed;
    for (double n : {0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 30.0}) observed.emplace_back(n, 0.02);
    const NssParams fit = curve::fit_nss(observed);
    for (double n : {0.3, 1.0, 4.0, 8.0, 15.0, 30.0})
        CHECK(curve::nss_yield(fit, n) == doctest::Approx(0.02).epsilon(1e-10));
}

TEST_CASE("fit_nss needs six distinct maturities") {
    std::vector<std::pair<double, double>> five;
    for (double n : {1.0, 2.0, 3.0, 5.0, 10.0}) five.emplace_back(n, 0.02);
    CHECK_THROWS_AS((void)curve::fit_nss(five), ValidationError);
    auto dup = five;
    dup.emplace_back(10.0, 0.02); // six rows, five distinct
    CHECK_THROWS_AS((void)curve::fit_nss(dup), ValidationError);
}

TEST_CASE("excess_returns telescopes to zero on a constant flat curve") {
    YieldPanel panel;
    panel.dates = monthly_dates(2000, 1, 8);
    panel.maturities_months = {1, 11, 12, 23, 24};
    panel.yields = Eigen::MatrixXd::Constant(8, 5, 0.04);
    const auto rx = curve::excess_returns(panel, {12, 24});
    REQUIRE(rx.returns.rows() == 7);
    REQUIRE(rx.returns.cols() == 2);
    CHECK(rx.returns.cwiseAbs().maxCoeff() < 1e-15);
    CHECK(rx.dates.front() == panel.dates[1]);
    CHECK(rx.dates.back() == panel.dates.back());
    CHECK(rx.maturities_months == std::vector<int>{12, 24});
}

TEST_CASE("excess_returns hand-computed single period") {
    YieldPanel panel;
    panel.dates = monthly_dates(2000, 1, 2);
    panel.maturities_months = {1, 11, 12};
    panel.yields.resize(2, 3);
    panel.yields << 0.010, 0.030, 0.025, //
        0.011, 0.020, 0.027;
    const auto rx = curve::excess_returns(panel, {12});
    REQUIRE(rx.returns.rows() == 1);
    // -(11/12)*0.02 + (12/12)*0.025 - (1/12)*0.01
    CHECK(rx.returns(0, 0) == doctest::Approx(0.0058333333333333345).epsilon(1e-14));
}

TEST_CASE("excess_returns names the missing maturity") {
    YieldPanel panel;
    panel.dates = monthly_dates(2000, 1, 3);
    panel.maturities_months = {1, 12};
    panel.yields = Eigen::MatrixXd::Constant(3, 2, 0.04);
    CHECK_THROWS_WITH_AS((void)curve::excess_returns(panel, {12}),
                         doctest::Contains("11"), ValidationError);
    YieldPanel no_short;
    no_short.dates = panel.dates;
    no_short.maturities_months = {11, 12};
    no_short.yields = Eigen::MatrixXd::Constant(3, 2, 0.04);
    CHECK_THROWS_WITH_AS((void)curve::excess_returns(no_short, {12}),
                         doctest::Contains("1"), ValidationError);
}

TEST_CASE("pca on a diagonal-covariance two-series panel") {
    YieldPanel panel;
    panel.dates = monthly_dates(2001, 1, 5);
    panel.maturities_months = {12, 120};
    const double s = std::sqrt(2.0 / 2.5);
    panel.yields.resize(5, 2);
    panel.yields << -2 * s, -1, //
        -1 * s, 1,              //
        0, 1,                   //
        1 * s, -1,              //
        2 * s, 0;
    const auto res = curve::pca(panel, 2);
    CHECK(res.eigenvalues(0) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(res.eigenvalues(1) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(res.loadings(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(res.loadings(1, 0)) < 1e-12);
    // sign rule: column sums positive
    CHECK(res.loadings.col(0).sum() > 0.0);
    CHECK(res.loadings.col(1).sum() > 0.0);
}

TEST_CASE("pca reconstructs the demeaned panel at full rank") {
    const auto panel = random_panel(40, {3, 6, 12, 24, 60, 120}, 11);
    const auto res = curve::pca(panel, 6);
    const Eigen::MatrixXd centered = panel.yields.rowwise() - res.means.transpose();
    const Eigen::MatrixXd rebuilt = res.scores * res.loadings.transpose();
    CHECK((rebuilt - centered).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((res.scores - centered * res.loadings).cwiseAbs().maxCoeff() < 1e-10);

    // scores are uncorrelated and loadings orthonormal
    const Eigen::MatrixXd cov =
        res.scores.transpose() * res.scores / static_cast<double>(panel.dates.size() - 1);
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) {
            if (i == j) {
                CHECK(cov(i, j) == doctest::Approx(res.eigenvalues(i)).epsilon(1e-10));
            } else {
                CHECK(std::abs(cov(i, j)) < 1e-10);
            }
        }
    const Eigen::MatrixXd gram = res.loadings.transpose() * res.loadings;
    CHECK((gram - Eigen::MatrixXd::Identity(6, 6)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("pca eigenvalues match a brute-force characteristic-polynomial solve") {
    const auto panel = random_panel(50, {6, 24, 120}, 29);
    const auto res = curve::pca(panel, 3);

    // sample covariance by direct two-pass accumulation
    Eigen::Matrix3d s = Eigen::Matrix3d::Zero();
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    const auto t = static_cast<Eigen::Index>(panel.dates.size());
    for (Eigen::Index i = 0; i < t; ++i) mean += panel.yields.row(i).transpose();
    mean /= static_cast<double>(t);
    for (Eigen::Index i = 0; i < t; ++i) {
        const Eigen::Vector3d d = panel.yields.row(i).transpose() - mean;
        s += d * d.transpose();
    }
    s /= static_cast<double>(t - 1);

    // roots of det(S - lambda I) by sign-change bisection
    const auto p = [&](double lam) {
        Eigen::Matrix3d a = s;
        a.diagonal().array() -= lam;
        return det3(a);
    };
    std::vector<double> roots;
    const double hi = s.trace() + 1e-6;
    const int grid = 20000;
    double prev = p(0.0), prev_x = 0.0;
    for (int i = 1; i <= grid; ++i) {
        const double x = hi * static_cast<double>(i) / grid;
        const double val = p(x);
        if ((prev < 0) != (val < 0)) {
            double lo = prev_x, up = x;
            for (int it = 0; it < 200; ++it) {
                const double midpoint = 0.5 * (lo + up);
                if ((p(lo) < 0) != (p(midpoint) < 0)) up = midpoint;
                else lo = midpoint;
            }
            roots.push_back(0.5 * (lo + up));
        }
        prev = val;
        prev_x = x;
    }
    REQUIRE(roots.size() == 3);
    std::sort(roots.rbegin(), roots.rend());
    for (int i = 0; i < 3; ++i)
        CHECK(res.eigenvalues(i) == doctest::Approx(roots[i]).epsilon(1e-8));
}

TEST_CASE("pca error taxonomy") {
    const auto panel = random_panel(10, {3, 12}, 5);
    CHECK_THROWS_AS((void)curve::pca(panel, 3), ValidationError); // k > maturities
    YieldPanel dup = panel;
    dup.maturities_months = {3, 12, 24};
    dup.yields.conservativeResize(10, 3);
    dup.yields.col(2) = dup.yields.col(0); // exact collinearity
    CHECK_THROWS_AS((void)curve::pca(dup, 3), ValidationError);
    YieldPanel tiny = random_panel(2, {3, 12}, 6);
    CHECK_THROWS_AS((void)curve::pca(tiny, 2), ValidationError); // sample length must exceed k
}

TEST_CASE("orthogonalize removes the factor exactly and is idempotent") {
    const int t = 60;
    auto panel = random_panel(t, {12, 60, 120}, 77);
    Rng rng(123, 9);
    Series factor;
    std::vector<double> f;
    for (int i = 0; i < t; ++i) {
        f.push_back(rng.normal());
        factor.push_back(panel.dates[static_cast<std::size_t>(i)], f.back());
    }
    for (Eigen::Index j = 0; j < 3; ++j)
        for (Eigen::Index i = 0; i < t; ++i)
            panel.yields(i, j) += 2.0 * f[static_cast<std::size_t>(i)];

    const auto clean = curve::orthogonalize(panel, factor);
    for (Eigen::Index j = 0; j < 3; ++j) {
        std::vector<double> col(clean.yields.col(j).data(), clean.yields.col(j).data() + t);
        const double cov = stats::correlation(col, f) * stats::sd(col) * stats::sd(f);
        CHECK(std::abs(cov) < 1e-12);
    }

    const auto twice = curve::orthogonalize(clean, factor);
    CHECK((twice.yields - clean.yields).cwiseAbs().maxCoeff() < 1e-12);

    SUBCASE("constant factor is collinear with the intercept") {
        Series flat;
        for (const auto& d : panel.dates) flat.push_back(d, 1.0);
        CHECK_THROWS_AS((void)curve::orthogonalize(panel, flat), ValidationError);
    }
    SUBCASE("factor must cover every panel date") {
        Series partial;
        for (std::size_t i = 0; i + 1 < panel.dates.size(); ++i)
            partial.push_back(panel.dates[i], f[i]);
        CHECK_THROWS_WITH_AS((void)curve::orthogonalize(panel, partial),
                             doctest::Contains(panel.dates.back().str().c_str()), ValidationError);
    }
}

TEST_CASE("orthogonalized panel PCs have zero covariance with the factor") {
    const int t = 80;
    auto panel = random_panel(t, {3, 12, 36, 60, 120}, 31);
    Rng rng(7, 3);
    Series factor;
    std::vector<double> f;
    for (int i = 0; i < t; ++i) {
        f.push_back(0.1 * rng.normal());
        factor.push_back(panel.dates[static_cast<std::size_t>(i)], f.back());
        for (Eigen::Index j = 0; j < 5; ++j)
            panel.yields(i, j) += (0.5 + 0.1 * static_cast<double>(j)) * f.back();
    }
    const auto res = curve::pca(curve::orthogonalize(panel, factor), 3);
    for (int c = 0; c < 3; ++c) {
        std::vector<double> score(res.scores.col(c).data(), res.scores.col(c).data() + t);
        const double cov = stats::correlation(score, f) * stats::sd(score) * stats::sd(f);
        CHECK(std::abs(cov) < 1e-12);
    }
}

TEST_CASE("one_year_forwards on a flat curve all equal the yield") {
    YieldPanel panel;
    panel.dates = monthly_dates(2002, 1, 4);
    panel.maturities_months = {12, 24, 36, 48, 60};
    panel.yields = Eigen::MatrixXd::Constant(4, 5, 0.035);
    const auto fwd = curve::one_year_forwards(panel);
    REQUIRE(fwd.rows() == 4);
    REQUIRE(fwd.cols() == 5);
    CHECK((fwd.array() - 0.035).abs().maxCoeff() < 1e-15);
}

TEST_CASE("cp_factor reproduces an exactly linear forecasting relation") {
    const int t = 30;
    auto panel = random_panel(t, {12, 24, 36, 48, 60}, 55);
    const auto fwd = curve::one_year_forwards(panel);

    Eigen::VectorXd beta(6);
    beta << 0.001, 0.8, -0.3, 0.25, 0.4, -0.15;
    curve::ReturnPanel rx;
    rx.dates.assign(panel.dates.begin() + 1, panel.dates.end());
    rx.maturities_months = {24};
    rx.returns.resize(t - 1, 1);
    for (int i = 0; i + 1 < t; ++i)
        rx.returns(i, 0) = beta(0) + fwd.row(i).dot(beta.tail(5));

    const auto cp = curve::cp_factor(panel, rx);
    CHECK(cp.r2 == doctest::Approx(1.0).epsilon(1e-10));
    CHECK((cp.coefficients - beta).cwiseAbs().maxCoeff() < 1e-8);
    REQUIRE(cp.factor.size() == static_cast<std::size_t>(t - 1));
    for (int i = 0; i + 1 < t; ++i) {
        const auto v = cp.factor.at(panel.dates[static_cast<std::size_t>(i)]);
        REQUIRE(v);
        CHECK(*v == doctest::Approx(rx.returns(i, 0)).epsilon(1e-10));
    }

    // standardizing the factor downstream yields mean 0, variance 1
    const auto z = curve::standardize(cp.factor);
    std::vector<double> values;
    for (std::size_t i = 0; i < z.size(); ++i) values.push_back(z.values()[i]);
    CHECK(std::abs(stats::mean(values)) < 1e-14);
    CHECK(stats::variance(values) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("standardize maps {1,2,3} onto {-1,0,1}") {
    Series s;
    s.push_back(Date{2001, 1, 31}, 1.0);
    s.push_back(Date{2001, 2, 28}, 2.0);
    s.push_back(Date{2001, 3, 31}, 3.0);
    const auto z = curve::standardize(s);
    CHECK(z.values()[0] == doctest::Approx(-1.0).epsilon(1e-14));
    CHECK(std::abs(z.values()[1]) < 1e-14);
    CHECK(z.values()[2] == doctest::Approx(1.0).epsilon(1e-14));

    const auto zz = curve::standardize(z);
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(zz.values()[i] == doctest::Approx(z.values()[i]).epsilon(1e-12));

    Series flat;
    flat.push_back(Date{2001, 1, 31}, 4.0);
    flat.push_back(Date{2001, 2, 28}, 4.0);
    CHECK_THROWS_AS((void)curve::standardize(flat), ValidationError);
}

TEST_CASE("standardize agrees with a two-pass oracle on a long random series") {
    Rng rng(99, 1);
    Series s;
    std::vector<double> raw;
    auto dates = monthly_dates(1990, 1, 400);
    for (int i = 0; i < 400; ++i) {
        raw.push_back(5.0 + 3.0 * rng.normal());
        s.push_back(dates[static_cast<std::size_t>(i)], raw.back());
    }
    const double mu = stats::mean(raw);
    const double sd = stats::sd(raw);
    const auto z = curve::standardize(s);
    for (std::size_t i = 0; i < z.size(); ++i)
        CHECK(z.values()[i] == doctest::Approx((raw[i] - mu) / sd).epsilon(1e-12));
}

TEST_CASE("panel round-trips through CSV and NSS parameter paths evaluate") {
    const auto dir = std::filesystem::temp_directory_path() / "trb_curve_test";
    std::filesystem::create_directories(dir);

    const auto panel = random_panel(6, {1, 12, 120}, 4);
    const auto path = dir / "yields.csv";
    curve::write_panel(panel, path);
    const auto loaded = curve::load_panel(path);
    REQUIRE(loaded.dates == panel.dates);
    REQUIRE(loaded.maturities_months == panel.maturities_months);
    CHECK((loaded.yields - panel.yields).cwiseAbs().maxCoeff() == 0.0);

    const auto nss_path = dir / "nss.csv";
    {
        std::ofstream out(nss_path);
        out << "date,beta0,beta1,beta2,beta3,tau1,tau2\n";
        out << "2001-01-31,0.05,-0.02,0.03,0.015,1.3,7\n";
        out << "2001-02-28,0.049,-0.018,0.028,0.012,1.2,6.5\n";
    }
    const auto path_params = curve::load_nss_params(nss_path);
    REQUIRE(path_params.size() == 2);
    CHECK(path_params[0].first == Date{2001, 1, 31});
    CHECK(path_params[1].second.tau2 == 6.5);

    const auto from_nss = curve::panel_from_nss(path_params, {12, 60, 120});
    REQUIRE(from_nss.dates.size() == 2);
    REQUIRE(from_nss.maturities_months == std::vector<int>{12, 60, 120});
    NssParams p0 = path_params[0].second;
    CHECK(from_nss.yields(0, 1) == doctest::Approx(curve::nss_yield(p0, 5.0)).epsilon(1e-14));

    SUBCASE("excess returns on an NSS panel match direct arithmetic") {
        const auto wide = curve::panel_from_nss(path_params, {1, 11, 12});
        const auto rx = curve::excess_returns(wide, {12});
        const double expect = -(11.0 / 12.0) * wide.yields(1, 1) + wide.yields(0, 2) -
                              wide.yields(0, 0) / 12.0;
        CHECK(rx.returns(0, 0) == doctest::Approx(expect).epsilon(1e-14));
    }
}
