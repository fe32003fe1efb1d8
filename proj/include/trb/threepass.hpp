#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

/// Three-pass risk-premium estimation for observed factors against a panel
/// of test-asset excess returns: principal components of the demeaned return
/// panel, a cross-sectional regression of mean returns on the estimated
/// loadings, and a time-series projection of the observed factors onto the
/// component space.  The premium of an observed factor is identified even
/// when the factor is measured with noise and the latent factor space is
/// larger than the observed one, because the final combination is invariant
/// to invertible rotations of the components.
///
/// Matrix orientation follows the estimator's algebra: return panels are
/// assets x months (n x T), observed factors are d x T.
namespace trb::threepass {

/// First-pass principal components of a demeaned return panel.
struct PcaPass {
    Eigen::MatrixXd vhat; ///< p x T scores; vhat * vhat' = T * I by construction
    Eigen::MatrixXd beta; ///< n x p loadings; beta = centered * vhat' / T
};

/// Third-pass projection of the observed factors onto the latent scores.
struct TimeSeriesPass {
    Eigen::MatrixXd eta;       ///< d x p loadings of the factors on the scores
    Eigen::VectorXd gamma_g;   ///< d observed-factor premia, eta * gamma
    Eigen::VectorXd r2;        ///< d time-series R-squared values, each in [0, 1]
    Eigen::MatrixXd residuals; ///< d x T projection residuals
};

struct WaldResult {
    double stat = 0.0;
    double p = 1.0;
};

struct ThreePassOptions {
    int p = 1;               ///< number of principal components
    int block_length = 12;   ///< circular bootstrap block for standard errors
    int bootstrap_reps = 999;
    int hac_lags = 12;       ///< Bartlett lags in the weak-factor test
    std::uint64_t seed = 1;
    int threads = 1;
};

/// Full output for one choice of component count.
struct ThreePassResult {
    int p = 0;
    Eigen::MatrixXd vhat;              ///< p x T latent scores
    Eigen::MatrixXd beta;              ///< n x p latent loadings
    Eigen::VectorXd gamma;             ///< p latent premia
    Eigen::MatrixXd eta;               ///< d x p
    Eigen::VectorXd gamma_g;           ///< d observed-factor premia
    Eigen::VectorXd se_gamma_g;        ///< d bootstrap standard errors
    Eigen::VectorXd r2_g;              ///< d, strength of each factor in the panel
    std::vector<WaldResult> weak_wald; ///< d tests of H0: the factor is weak
};

/// First pass.  `centered` is the n x T return panel demeaned by row; the
/// scores are sqrt(T) times the leading eigenvectors of centered' *
/// centered / (nT) and the loadings follow by projection.  Scores carry a
/// deterministic sign (largest-magnitude coordinate positive).  Warns when
/// the eigenvalues at the p / p+1 boundary are numerically tied: the
/// rotation inside the tied block is then arbitrary, although observed-factor
/// premia are unaffected.
[[nodiscard]] PcaPass gx_pca(const Eigen::MatrixXd& centered, int p,
                             std::vector<std::string>* warnings = nullptr);

/// Second pass: cross-sectional least squares of mean excess returns on the
/// first-pass loadings.  Rank-deficient loadings are an error.
[[nodiscard]] Eigen::VectorXd gx_cross_section(const Eigen::MatrixXd& beta,
                                               const Eigen::VectorXd& mean_returns);

/// Third pass: project the demeaned observed factors (d x T) onto the scores
/// and combine the loadings with the latent premia.  A zero-variance factor
/// row is an error.
[[nodiscard]] TimeSeriesPass gx_time_series(const Eigen::MatrixXd& g_centered,
                                            const Eigen::MatrixXd& vhat,
                                            const Eigen::VectorXd& gamma);

/// Wald test of H0: eta row = 0 (the observed factor is weak), one result
/// per factor row, with a Bartlett HAC covariance of the third-pass
/// coefficients and a chi-squared(p) p-value.
[[nodiscard]] std::vector<WaldResult> gx_weak_test(const Eigen::MatrixXd& eta,
                                                   const Eigen::MatrixXd& vhat,
                                                   const Eigen::MatrixXd& residuals,
                                                   int hac_lags = 12);

/// Circular block bootstrap over time of the full pipeline (returns and
/// factors resampled jointly, demeaned within each replication); returns the
/// bootstrap standard deviation of gamma_g per observed factor.
/// Deterministic given the seed and invariant to the thread count.
[[nodiscard]] Eigen::VectorXd gx_se(const Eigen::MatrixXd& returns, const Eigen::MatrixXd& g,
                                    const ThreePassOptions& options);

/// Run the full pipeline on raw (not yet demeaned) inputs observed over the
/// same months: returns n x T, factors d x T.
[[nodiscard]] ThreePassResult estimate(const Eigen::MatrixXd& returns, const Eigen::MatrixXd& g,
                                       const ThreePassOptions& options,
                                       std::vector<std::string>* warnings = nullptr);

} // namespace trb::threepass
