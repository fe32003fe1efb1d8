#include "trb/synthlab.hpp"

#include "trb/core/csv.hpp"
#include "trb/core/errors.hpp"
#include "trb/core/rng.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

namespace trb::synthlab {

// ---------------------------------------------------------------------------
// Black pricer + implied vol
// ---------------------------------------------------------------------------

double black_price(double forward, double strike, double tau_years, double sigma, char kind) {
    if (forward <= 0.0 || strike <= 0.0) throw ValidationError("black_price: F and K must be > 0");
    if (tau_years < 0.0 || sigma < 0.0) throw ValidationError("black_price: tau and sigma must be >= 0");
    if (kind != 'C' && kind != 'P') throw ValidationError("black_price: kind must be 'C' or 'P'");

    const double vol = sigma * std::sqrt(tau_years);
    if (vol == 0.0) {
        return kind == 'C' ? std::max(forward - strike, 0.0) : std::max(strike - forward, 0.0);
    }
    const double d1 = std::log(forward / strike) / vol + 0.5 * vol;
    const double d2 = d1 - vol;
    if (kind == 'C') return forward * normal_cdf(d1) - strike * normal_cdf(d2);
    return strike * normal_cdf(-d2) - forward * normal_cdf(-d1);
}

double implied_vol(double price, double forward, double strike, double tau_years, char kind) {
    if (tau_years <= 0.0) throw ValidationError("implied_vol: tau must be > 0");
    double lo = 1e-10, hi = 20.0;
    const double p_lo = black_price(forward, strike, tau_years, lo, kind);
    const double p_hi = black_price(forward, strike, tau_years, hi, kind);
    if (price < p_lo || price > p_hi) {
        throw NumericError("implied_vol: price outside attainable range [" +
                           std::to_string(p_lo) + ", " + std::to_string(p_hi) + "]");
    }
    while (hi - lo > 1e-10) {
        const double mid = 0.5 * (lo + hi);
        if (black_price(forward, strike, tau_years, mid, kind) < price) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

// ---------------------------------------------------------------------------
// Quadrature oracle
// ---------------------------------------------------------------------------

namespace {

double simpson(double a, double b, double fa, double fm, double fb) {
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

template <typename F>
double adaptive_simpson(const F& f, double a, double b, double fa, double fm, double fb,
                        double whole, double eps, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = simpson(a, m, fa, flm, fm);
    const double right = simpson(m, b, fm, frm, fb);
    const double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * eps) {
        return left + right + delta / 15.0; // Richardson tail correction
    }
    return adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * eps, depth - 1) +
           adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * eps, depth - 1);
}

} // namespace

double numeric_tail_integral(double alpha, double phi, double K) {
    if (alpha <= 0.0) throw ValidationError("numeric_tail_integral: alpha must be > 0");
    if (phi < 0.0) throw ValidationError("numeric_tail_integral: phi must be >= 0");
    if (K < 0.0) throw ValidationError("numeric_tail_integral: K must be >= 0");
    if (phi == 0.0) return 0.0;

    const auto f = [&](double u) { return u * u * phi * std::exp(-alpha * u); };
    // Truncate where the remainder is ~1e-20 of the integral's scale.
    const double upper = K + 80.0 / alpha;
    // Two panels: [K, K + 8/alpha] holds nearly all mass; the rest is tail.
    const double mid = K + 8.0 / alpha;
    double total = 0.0;
    for (const auto& [a, b] : {std::pair{K, mid}, std::pair{mid, upper}}) {
        const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
        const double rough = simpson(a, b, fa, fm, fb);
        const double eps = std::max(std::abs(rough), 1e-300) * 1e-13;
        total += adaptive_simpson(f, a, b, fa, fm, fb, rough, eps, 48);
    }
    return total;
}

double nss_yield_reference(double b0, double b1, double b2, double b3, double tau1, double tau2,
                           double n_years) {
    if (!(n_years > 0.0)) throw ValidationError("nss_yield_reference: maturity must be > 0");
    if (!(tau1 > 0.0) || !(tau2 > 0.0))
        throw ValidationError("nss_yield_reference: tau must be > 0");
    const long double x1 = static_cast<long double>(n_years) / tau1;
    const long double x2 = static_cast<long double>(n_years) / tau2;
    const long double g1 = -std::expm1(-x1) / x1;
    const long double g2 = -std::expm1(-x2) / x2;
    const long double y = b0 + b1 * g1 + b2 * (g1 - std::exp(-x1)) + b3 * (g2 - std::exp(-x2));
    return static_cast<double>(y);
}

// ---------------------------------------------------------------------------
// Option-chain generator
// ---------------------------------------------------------------------------

namespace {

/// Deep-OTM tail put price (the exponential form the level/decay estimators
/// invert).
double tail_put_price(double k, double alpha, double phi, double forward, double rate,
                      double tau_years) {
    return std::exp(-rate * tau_years) * tau_years * forward * phi *
           std::exp((1.0 + alpha) * k) / (alpha * (alpha + 1.0));
}

} // namespace

TailDataset gen_tail_options(const TailGeneratorSpec& spec) {
    if (spec.alpha <= 0.0) throw ValidationError("gen_tail_options: alpha must be > 0");
    if (spec.phi < 0.0) throw ValidationError("gen_tail_options: phi must be >= 0");
    if (spec.noise_sd < 0.0) throw ValidationError("gen_tail_options: noise_sd must be >= 0");
    if (spec.strikes_per_tenor < 1) throw ValidationError("gen_tail_options: need >= 1 strike");
    if (spec.half_spread <= 0.0 || spec.half_spread >= 1.0)
        throw ValidationError("gen_tail_options: half_spread must be in (0,1)");

    TailDataset out;
    out.spec = spec;
    out.atm_iv30.set_name("atm_iv30");
    out.rates.set_name("rate");

    // Near-the-money strike multiples for the forward-recovery pairs.
    static constexpr double pair_mult[] = {0.95, 0.975, 1.0, 1.025, 1.05};

    Date d = spec.start;
    while (d.iso_weekday() > 5) d = d.add_days(1);
    for (int day = 0; day < spec.n_days; ++day) {
        out.atm_iv30.push_back(d, spec.atm_iv30);
        out.rates.push_back(d, spec.rate);

        for (std::size_t ti = 0; ti < spec.tenor_days.size(); ++ti) {
            const int tenor = spec.tenor_days[ti];
            const double tau = tenor / 365.0;
            const Date expiry = d.add_days(tenor);
            // Stream id depends on (day, tenor) only, so prices scale exactly
            // with phi under a fixed seed (linearity contract).
            Rng rng(spec.seed, static_cast<std::uint64_t>(day) * 64 + ti);

            for (const double m : pair_mult) {
                const double strike = m * spec.forward;
                const double disc = std::exp(-spec.rate * tau);
                for (const char kind : {'C', 'P'}) {
                    const double mid =
                        disc * black_price(spec.forward, strike, tau, spec.atm_iv30, kind);
                    out.options.push_back({d, expiry, strike, kind, mid * (1.0 - spec.half_spread),
                                           mid * (1.0 + spec.half_spread)});
                }
            }

            // Deep-OTM put grid: volatility-adjusted moneyness from -2.6 to -5.0
            // (safely below the -2.5 eligibility bound).
            const double unit = spec.atm_iv30 * std::sqrt(tenor / 365.0);
            std::vector<double> ks;
            for (int s = 0; s < spec.strikes_per_tenor; ++s) {
                const double frac = spec.strikes_per_tenor == 1
                                        ? 0.0
                                        : static_cast<double>(s) /
                                              (spec.strikes_per_tenor - 1.0);
                ks.push_back(-(2.6 + (5.0 - 2.6) * frac) * unit);
            }
            if (day == 0) out.put_moneyness.push_back(ks);

            for (const double k : ks) {
                const double strike = spec.forward * std::exp(k);
                double mid = tail_put_price(k, spec.alpha, spec.phi, spec.forward, spec.rate, tau);
                if (spec.noise_sd > 0.0) mid *= std::exp(spec.noise_sd * rng.normal());
                out.options.push_back({d, expiry, strike, 'P', mid * (1.0 - spec.half_spread),
                                       mid * (1.0 + spec.half_spread)});
            }
        }

        d = d.add_days(d.iso_weekday() == 5 ? 3 : 1); // next weekday
    }
    return out;
}

void TailDataset::write(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    csv::Writer w(dir / "options.csv");
    w.write_row({"date", "expiry", "strike", "kind", "bid", "ask"});
    for (const auto& o : options) {
        w.write_row({o.date.str(), o.expiry.str(), csv::format_double(o.strike),
                     std::string(1, o.kind), csv::format_double(o.bid),
                     csv::format_double(o.ask)});
    }
    w.close();
    atm_iv30.to_csv(dir / "atm_iv.csv");
    rates.to_csv(dir / "rates.csv");
}

// ---------------------------------------------------------------------------
// ATSM generator
// ---------------------------------------------------------------------------

AtsmGeneratorSpec AtsmGeneratorSpec::standard(int K, int N, int T, std::uint64_t seed) {
    if (K < 1 || K > 6) throw ValidationError("AtsmGeneratorSpec::standard: K in [1,6]");
    if (N < 1 || N > 60) throw ValidationError("AtsmGeneratorSpec::standard: N in [1,60]");
    AtsmGeneratorSpec s;
    s.K = K;
    s.T = T;
    s.seed = seed;
    s.mu = Eigen::VectorXd::Zero(K);
    static constexpr double diag[] = {0.95, 0.88, 0.78, 0.66, 0.52, 0.40};
    s.Phi = Eigen::MatrixXd::Zero(K, K);
    for (int i = 0; i < K; ++i) s.Phi(i, i) = diag[i];
    for (int i = 0; i + 1 < K; ++i) s.Phi(i, i + 1) = 0.03;
    s.Sigma = Eigen::MatrixXd::Identity(K, K);
    for (int i = 0; i + 1 < K; ++i) {
        s.Sigma(i, i + 1) = 0.2;
        s.Sigma(i + 1, i) = 0.2;
    }
    s.lambda0 = Eigen::VectorXd::Zero(K);
    s.lambda1 = Eigen::MatrixXd::Zero(K, K);
    static constexpr double l0[] = {-0.12, 0.08, -0.05, 0.03, -0.02, 0.01};
    for (int i = 0; i < K; ++i) {
        s.lambda0(i) = l0[i];
        s.lambda1(i, i) = 0.02 * (i % 2 == 0 ? 1.0 : -1.0);
        if (i + 1 < K) s.lambda1(i, i + 1) = -0.015;
    }
    s.delta0 = 0.004;
    s.delta1 = Eigen::VectorXd::Zero(K);
    static constexpr double d1[] = {4.0e-4, -2.5e-4, 1.5e-4, -1.0e-4, 0.6e-4, -0.4e-4};
    for (int i = 0; i < K; ++i) s.delta1(i) = d1[i];
    s.return_maturities.clear();
    for (int j = 1; j <= N; ++j) s.return_maturities.push_back(j * 120 / N);
    s.yield_maturities = {1, 3, 6, 12, 24, 36, 48, 60, 84, 120};
    return s;
}

AtsmDataset gen_atsm_panel(const AtsmGeneratorSpec& spec) {
    const int K = spec.K;
    const int T = spec.T;
    if (T < 2) throw ValidationError("gen_atsm_panel: T must be >= 2");
    if (spec.mu.size() != K || spec.Phi.rows() != K || spec.Phi.cols() != K ||
        spec.Sigma.rows() != K || spec.Sigma.cols() != K || spec.lambda0.size() != K ||
        spec.lambda1.rows() != K || spec.lambda1.cols() != K || spec.delta1.size() != K) {
        throw ValidationError("gen_atsm_panel: parameter dimensions do not match K");
    }
    if (spec.return_maturities.empty() || spec.yield_maturities.empty())
        throw ValidationError("gen_atsm_panel: maturity lists must be nonempty");

    const double radius =
        spec.Phi.eigenvalues().cwiseAbs().maxCoeff();
    if (radius >= 1.0)
        throw ValidationError("gen_atsm_panel: Phi spectral radius must be < 1, got " +
                              std::to_string(radius));

    Eigen::LLT<Eigen::MatrixXd> llt(spec.Sigma);
    if (llt.info() != Eigen::Success)
        throw ValidationError("gen_atsm_panel: Sigma is not positive definite");
    const Eigen::MatrixXd chol = llt.matrixL();

    int n_max = 1;
    for (int n : spec.return_maturities) n_max = std::max(n_max, n);
    for (int n : spec.yield_maturities) n_max = std::max(n_max, n);

    AtsmDataset out;
    out.spec = spec;
    out.return_maturities = spec.return_maturities;
    out.yield_maturities = spec.yield_maturities;

    // --- no-arbitrage recursion coefficients (model truth) ---
    out.a = Eigen::VectorXd::Zero(n_max);
    out.b = Eigen::MatrixXd::Zero(n_max, K);
    out.a_rn = Eigen::VectorXd::Zero(n_max);
    out.b_rn = Eigen::MatrixXd::Zero(n_max, K);
    {
        Eigen::VectorXd bn = -spec.delta1, bn_rn = -spec.delta1;
        double an = -spec.delta0, an_rn = -spec.delta0;
        out.a(0) = an;
        out.b.row(0) = bn.transpose();
        out.a_rn(0) = an_rn;
        out.b_rn.row(0) = bn_rn.transpose();
        for (int n = 2; n <= n_max; ++n) {
            an = an + bn.dot(spec.mu - spec.lambda0) +
                 0.5 * (bn.dot(spec.Sigma * bn) + spec.sigma2) - spec.delta0;
            bn = (spec.Phi - spec.lambda1).transpose() * bn - spec.delta1;
            an_rn = an_rn + bn_rn.dot(spec.mu) +
                    0.5 * (bn_rn.dot(spec.Sigma * bn_rn) + spec.sigma2) - spec.delta0;
            bn_rn = spec.Phi.transpose() * bn_rn - spec.delta1;
            out.a(n - 1) = an;
            out.b.row(n - 1) = bn.transpose();
            out.a_rn(n - 1) = an_rn;
            out.b_rn.row(n - 1) = bn_rn.transpose();
        }
    }

    // --- simulate states (burn-in 200) ---
    Rng state_rng(spec.seed, 0);
    Eigen::VectorXd x = spec.mu; // start at the mean-ish point, burn in
    for (int t = 0; t < 200; ++t) {
        Eigen::VectorXd z(K);
        for (int i = 0; i < K; ++i) z(i) = state_rng.normal();
        x = spec.mu + spec.Phi * x + chol * z;
    }
    out.X.resize(T, K);
    Eigen::MatrixXd innov(T, K); // innov.row(t) belongs to the transition t-1 -> t
    innov.row(0).setZero();
    out.X.row(0) = x.transpose();
    for (int t = 1; t < T; ++t) {
        Eigen::VectorXd z(K);
        for (int i = 0; i < K; ++i) z(i) = state_rng.normal();
        const Eigen::VectorXd v = chol * z;
        x = spec.mu + spec.Phi * x + v;
        out.X.row(t) = x.transpose();
        innov.row(t) = v.transpose();
    }

    // --- excess returns from the one-period pricing identity ---
    const int N = static_cast<int>(spec.return_maturities.size());
    out.returns.resize(T - 1, N);
    Rng ret_rng(spec.seed, 1);
    for (int t = 0; t + 1 < T; ++t) {
        const Eigen::VectorXd xt = out.X.row(t).transpose();
        const Eigen::VectorXd v = innov.row(t + 1).transpose();
        for (int j = 0; j < N; ++j) {
            const int n = spec.return_maturities[j];
            if (n < 2) throw ValidationError("gen_atsm_panel: return maturities must be >= 2");
            const Eigen::VectorXd beta = out.b.row(n - 2).transpose(); // b_{n-1}
            double rx = beta.dot(spec.lambda0 + spec.lambda1 * xt) -
                        0.5 * (beta.dot(spec.Sigma * beta) + spec.sigma2) + beta.dot(v);
            if (spec.sigma2 > 0.0) rx += std::sqrt(spec.sigma2) * ret_rng.normal();
            out.returns(t, j) = rx;
        }
    }

    // --- yields from the recursions (annualized x12) ---
    const int M = static_cast<int>(spec.yield_maturities.size());
    out.yields.resize(T, M);
    Rng yld_rng(spec.seed, 2);
    for (int t = 0; t < T; ++t) {
        const Eigen::VectorXd xt = out.X.row(t).transpose();
        for (int j = 0; j < M; ++j) {
            const int n = spec.yield_maturities[j];
            double y = -(out.a(n - 1) + out.b.row(n - 1).dot(xt)) / n * 12.0;
            if (spec.yield_noise_sd > 0.0) y += spec.yield_noise_sd * yld_rng.normal();
            out.yields(t, j) = y;
        }
    }

    // --- month-end date stamps ---
    out.dates.reserve(static_cast<std::size_t>(T));
    Date stamp = Date(1996, 1, 1).month_end();
    for (int t = 0; t < T; ++t) {
        out.dates.push_back(stamp);
        stamp = stamp.add_days(1).month_end();
    }
    return out;
}

void AtsmDataset::write(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    {
        csv::Writer w(dir / "yields.csv");
        std::vector<std::string> head{"date"};
        for (int m : yield_maturities) head.push_back("m" + std::to_string(m));
        w.write_row(head);
        for (int t = 0; t < yields.rows(); ++t) {
            std::vector<std::string> row{dates[static_cast<std::size_t>(t)].str()};
            for (int j = 0; j < yields.cols(); ++j) row.push_back(csv::format_double(yields(t, j)));
            w.write_row(row);
        }
        w.close();
    }
    {
        csv::Writer w(dir / "states.csv");
        std::vector<std::string> head{"date"};
        for (int i = 0; i < X.cols(); ++i) head.push_back("x" + std::to_string(i + 1));
        w.write_row(head);
        for (int t = 0; t < X.rows(); ++t) {
            std::vector<std::string> row{dates[static_cast<std::size_t>(t)].str()};
            for (int j = 0; j < X.cols(); ++j) row.push_back(csv::format_double(X(t, j)));
            w.write_row(row);
        }
        w.close();
    }
    {
        csv::Writer w(dir / "returns.csv");
        std::vector<std::string> head{"date"};
        for (int m : return_maturities) head.push_back("n" + std::to_string(m));
        w.write_row(head);
        for (int t = 0; t < returns.rows(); ++t) {
            // row t carries rx_{t+1}: stamp with the t+1 date
            std::vector<std::string> row{dates[static_cast<std::size_t>(t) + 1].str()};
            for (int j = 0; j < returns.cols(); ++j)
                row.push_back(csv::format_double(returns(t, j)));
            w.write_row(row);
        }
        w.close();
    }
}

} // namespace trb::synthlab
