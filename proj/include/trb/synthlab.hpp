#pragma once

#include "trb/core/date.hpp"
#include "trb/core/series.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

/// Synthetic-data generators and independent numerical oracles backing the
/// test suite.  Everything here is deterministic given (spec, seed), and the
/// generators emit exactly the CSV schemas the ingest module reads.
namespace trb::synthlab {

// ---------------------------------------------------------------------------
// Oracles
// ---------------------------------------------------------------------------

/// Undiscounted Black (1976) price of a European option on a forward.
/// kind is 'C' or 'P'.  sigma == 0 returns intrinsic value.
[[nodiscard]] double black_price(double forward, double strike, double tau_years, double sigma,
                                 char kind);

/// Invert black_price by bisection; the bracket [1e-10, 20] is tightened to
/// an absolute width of 1e-10.  Throws NumericError when the target price is
/// outside the attainable range.
[[nodiscard]] double implied_vol(double price, double forward, double strike, double tau_years,
                                 char kind);

/// Adaptive-Simpson evaluation of the truncated tail integral
///   integral_K^inf u^2 * phi * exp(-alpha u) du
/// to a relative accuracy of about 1e-12.  Independent of any closed form on
/// purpose: this is the quadrature oracle the tail-volatility formula is
/// checked against.
[[nodiscard]] double numeric_tail_integral(double alpha, double phi, double K);

/// Independent scalar evaluation of the Svensson zero-curve (long double,
/// expm1-based), used as the oracle for the production implementation.
[[nodiscard]] double nss_yield_reference(double b0, double b1, double b2, double b3, double tau1,
                                         double tau2, double n_years);

// ---------------------------------------------------------------------------
// Option-chain generator
// ---------------------------------------------------------------------------

struct TailGeneratorSpec {
    double alpha = 18.0;            ///< true tail decay
    double phi = 0.004;             ///< true tail level
    int strikes_per_tenor = 10;     ///< deep-OTM put strikes per (date, tenor)
    std::vector<int> tenor_days{10, 17, 31, 44};
    double rate = 0.02;             ///< annualized cc risk-free rate
    double forward = 100.0;         ///< flat underlying forward
    double atm_iv30 = 0.18;         ///< 30-day ATM implied vol (flat)
    double noise_sd = 0.0;          ///< multiplicative lognormal sd on put mids
    double half_spread = 0.01;      ///< relative half bid-ask spread
    Date start{2001, 1, 1};
    int n_days = 21;                ///< consecutive weekdays from `start`
    std::uint64_t seed = 1;
};

struct OptionRow {
    Date date;
    Date expiry;
    double strike = 0.0;
    char kind = 'P';
    double bid = 0.0;
    double ask = 0.0;
};

struct TailDataset {
    std::vector<OptionRow> options;
    Series atm_iv30;  ///< per-day 30d ATM vol
    Series rates;     ///< per-day annualized cc rate
    TailGeneratorSpec spec;

    /// Deepest-OTM log-moneyness grid per tenor (for assertions).
    std::vector<std::vector<double>> put_moneyness;

    /// Write options.csv / atm_iv.csv / rates.csv into dir.
    void write(const std::filesystem::path& dir) const;
};

/// Deep-OTM puts priced by the exponential tail form
///   O = e^{-r tau} * tau * F * phi * e^{(1+alpha) k} / (alpha (alpha+1)),
/// plus five near-the-money call/put pairs per (date, tenor) priced by the
/// discounted Black formula, so put-call parity recovers the forward exactly.
/// Noise is median-one lognormal: O_obs = O * exp(noise_sd * z).
[[nodiscard]] TailDataset gen_tail_options(const TailGeneratorSpec& spec);

// ---------------------------------------------------------------------------
// Affine term-structure generator
// ---------------------------------------------------------------------------

struct AtsmGeneratorSpec {
    int K = 3;          ///< factor count
    int T = 5000;       ///< sample length (states t = 1..T)
    Eigen::VectorXd mu;          ///< K
    Eigen::MatrixXd Phi;         ///< K x K, spectral radius < 1
    Eigen::MatrixXd Sigma;       ///< K x K PSD innovation covariance
    Eigen::VectorXd lambda0;     ///< K
    Eigen::MatrixXd lambda1;     ///< K x K
    double sigma2 = 2.5e-7;      ///< return pricing-error variance
    double delta0 = 0.004;       ///< monthly short-rate intercept
    Eigen::VectorXd delta1;      ///< K
    std::vector<int> return_maturities;  ///< months, e.g. 6,12,...,120
    std::vector<int> yield_maturities;   ///< months for the emitted panel
    double yield_noise_sd = 0.0;         ///< measurement noise on annualized yields
    std::uint64_t seed = 7;

    /// A stable, well-conditioned benchmark parameterization.
    static AtsmGeneratorSpec standard(int K, int N, int T, std::uint64_t seed);
};

struct AtsmDataset {
    Eigen::MatrixXd X;        ///< T x K simulated states
    Eigen::MatrixXd returns;  ///< (T-1) x N excess log-returns, row t holds rx_{t+1}
    Eigen::MatrixXd yields;   ///< T x M annualized cc yields (with noise if requested)
    std::vector<int> return_maturities;
    std::vector<int> yield_maturities;
    std::vector<Date> dates;  ///< month-end stamps, one per state row

    // no-arbitrage recursion coefficients of the generating model (truth)
    Eigen::VectorXd a, a_rn;  ///< n_max
    Eigen::MatrixXd b, b_rn;  ///< n_max x K
    AtsmGeneratorSpec spec;

    /// Write yields.csv (grid schema), states.csv, returns.csv into dir.
    void write(const std::filesystem::path& dir) const;
};

/// Simulate the state VAR, build returns from the one-period pricing
/// identity and yields from the no-arbitrage recursions.
[[nodiscard]] AtsmDataset gen_atsm_panel(const AtsmGeneratorSpec& spec);

} // namespace trb::synthlab
