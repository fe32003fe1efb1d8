#pragma once

#include "trb/core/date.hpp"
#include "trb/core/series.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

/// Yield-curve panels, monthly excess bond returns, principal components,
/// forward rates and the return-forecasting factor built from them.
namespace trb::curve {

/// Panel of annualized continuously-compounded zero-coupon yields.
struct YieldPanel {
    std::vector<Date> dates;            ///< strictly increasing, monthly
    std::vector<int> maturities_months; ///< strictly increasing
    Eigen::MatrixXd yields;             ///< dates.size() x maturities.size()

    /// Column index of a maturity; throws naming the maturity when absent.
    [[nodiscard]] std::size_t col_of(int maturity_months) const;
    void validate() const;
};

/// Monthly excess log-returns.  Column n holds the return to buying an
/// n-month bond and selling it one month later; rows are stamped with the
/// sale date t+1.
struct ReturnPanel {
    std::vector<Date> dates;            ///< t+1 stamps
    std::vector<int> maturities_months; ///< n, the purchase maturity
    Eigen::MatrixXd returns;            ///< monthly decimals

    [[nodiscard]] std::size_t col_of(int maturity_months) const;
};

/// Svensson zero-curve parameters.
struct NssParams {
    double beta0 = 0.0;
    double beta1 = 0.0;
    double beta2 = 0.0;
    double beta3 = 0.0;
    double tau1 = 1.0; ///< years, > 0
    double tau2 = 1.0; ///< years, > 0
};

/// Annualized cc yield at maturity n years:
///   b0 + b1 g(n/t1) + b2 (g(n/t1) - e^{-n/t1}) + b3 (g(n/t2) - e^{-n/t2}),
/// g(x) = (1 - e^{-x}) / x.  Throws on n <= 0.
[[nodiscard]] double nss_yield(const NssParams& params, double n_years);

/// Nonlinear least squares over (beta, tau): multi-start grid
/// tau1 in {0.5,1,2,5} x tau2 in {5,10,15}, beta profiled out by linear
/// least squares at each tau, then damped Gauss-Newton refinement from the
/// best start (ties broken by lower tau1, then tau2).  The returned fit's
/// residual sum of squares never exceeds the best grid point's.
/// Requires >= 6 distinct maturities.
[[nodiscard]] NssParams fit_nss(const std::vector<std::pair<double, double>>& observed);

/// Eq.-style one-month excess log-returns for each requested purchase
/// maturity n (months):
///   rx_{t+1}^{(n-1)} = -((n-1)/12) y_{t+1}^{(n-1)} + (n/12) y_t^{(n)}
///                      - (1/12) y_t^{(1)}.
/// The panel must carry maturities n, n-1 and 1; a missing one is named in
/// the error.
[[nodiscard]] ReturnPanel excess_returns(const YieldPanel& panel, const std::vector<int>& ns);

struct PcaResult {
    Eigen::MatrixXd loadings;    ///< maturities x k, orthonormal columns
    Eigen::MatrixXd scores;      ///< dates x k, scores = demeaned yields * loadings
    Eigen::VectorXd eigenvalues; ///< descending
    Eigen::VectorXd means;       ///< per-maturity sample means
};

/// PCA of the sample covariance (divisor n-1) of yield levels.  Each loading
/// column is flipped so its sum across maturities is positive, making the
/// first component read as the curve level.
[[nodiscard]] PcaResult pca(const YieldPanel& panel, int k);

/// Remove a factor's contribution from every maturity: regress each yield
/// column on a constant and the factor and keep intercept + residual.  The
/// output has exactly zero sample covariance with the factor.  The factor
/// series must cover every panel date; a constant factor is an error.
[[nodiscard]] YieldPanel orthogonalize(const YieldPanel& panel, const Series& factor);

/// Columns [y^(1y), f^(2y), ..., f^(5y)] where
/// f_t^(n) = n y_t^(n) - (n-1) y_t^(n-1) in years; needs the 12..60 month
/// maturities.
[[nodiscard]] Eigen::MatrixXd one_year_forwards(const YieldPanel& panel);

struct CpResult {
    Series factor;                ///< fitted values, stamped with predictor date t
    Eigen::VectorXd coefficients; ///< intercept, then the five forward slopes
    double r2 = 0.0;
};

/// Return-forecasting factor: regress the cross-maturity average of next
/// month's excess returns on a constant, the one-year yield and the 2-5 year
/// one-year forward rates; the fitted values are the factor.
[[nodiscard]] CpResult cp_factor(const YieldPanel& panel, const ReturnPanel& returns);

/// Affine map to exact zero sample mean and unit sample variance (n-1).
/// Constant input is an error.
[[nodiscard]] Series standardize(const Series& input);

/// Evaluate an NSS parameter path into a yield panel.
[[nodiscard]] YieldPanel panel_from_nss(const std::vector<std::pair<Date, NssParams>>& path,
                                        const std::vector<int>& maturities_months);

/// `date,beta0,beta1,beta2,beta3,tau1,tau2` rows.
[[nodiscard]] std::vector<std::pair<Date, NssParams>> load_nss_params(
    const std::filesystem::path& path);

/// Grid schema `date,m3,m6,...` (month-count headers; the `m` prefix is
/// canonical but a bare integer is accepted).
[[nodiscard]] YieldPanel load_panel(const std::filesystem::path& path);
void write_panel(const YieldPanel& panel, const std::filesystem::path& path);
void write_returns(const ReturnPanel& returns, const std::filesystem::path& path);

} // namespace trb::curve
