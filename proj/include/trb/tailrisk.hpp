#pragma once

#include "trb/core/config.hpp"
#include "trb/core/date.hpp"
#include "trb/core/series.hpp"
#include "trb/ingest.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

/// Left-tail estimators for equity index options: the exponential tail decay
/// alpha, the tail level phi, the jump threshold, and the left jump tail
/// volatility assembled into a monthly series.
namespace trb::tailrisk {

/// Estimated tail parameters for one trading day.  alpha is shared across
/// the day's ISO week; phi, the threshold and the quote count are daily.
struct TailParams {
    Date as_of;
    double alpha = 0.0;       ///< tail decay, > 0
    double phi = 0.0;         ///< tail level, > 0
    double k_threshold = 0.0; ///< jump magnitude |k_t|, > 0
    int n_options_alpha = 0;  ///< adjacent put pairs pooled into alpha
    int n_options_phi = 0;    ///< quotes pooled into phi
};

/// Tail decay from pooled chains (one ISO week in production use).  Under
/// the exponential tail form, each within-chain adjacent put pair gives
///   x_i = ln(O(k_i)/O(k_{i-1})) / (k_i - k_{i-1}) = 1 + alpha,
/// and the least-absolute-deviations fit of that location parameter is the
/// pooled median, so alpha = median(x) - 1.
/// Throws NoTailDataError when no chain has an adjacent pair and
/// DegenerateTailError when the estimate is <= 0.
[[nodiscard]] double estimate_alpha(std::span<const ingest::FilteredChain> chains);

/// Tail level for one day given alpha.  Each quote contributes
///   c_i = ln(e^{r tau} O(k_i) / (tau F)) - (1 + alpha) k_i
///         + ln(alpha + 1) + ln(alpha),
/// and phi = exp(median(c)).  Throws NoTailDataError when the pooled chains
/// carry no quotes.
[[nodiscard]] double estimate_phi(std::span<const ingest::FilteredChain> chains, double alpha);

/// Jump threshold magnitude: three 30-day ATM standard deviations,
/// 3 * atm_iv30 * sqrt(30/365).
[[nodiscard]] double tail_threshold(double atm_iv30);

/// Annualized left jump tail volatility
///   sqrt( phi * e^{-alpha K} * (alpha K (alpha K + 2) + 2) / alpha^3 )
/// with K = k_threshold; equals sqrt(integral_K^inf u^2 phi e^{-alpha u} du).
/// K = 0 is permitted (untruncated variation).
[[nodiscard]] double left_jump_volatility(const TailParams& params);

/// Run the weekly-alpha / daily-phi estimation over filtered chains sorted
/// by date.  Chains are pooled per ISO week for alpha; days in weeks where
/// alpha fails (no pairs, or degenerate decay) are skipped with a warning,
/// as are days without a same-day ATM vol observation or without quotes.
[[nodiscard]] std::vector<TailParams> estimate_daily_params(
    std::span<const ingest::FilteredChain> chains, const Series& atm_iv,
    std::vector<std::string>* warnings = nullptr);

/// One monthly observation.  The parameter fields describe the day the
/// month was sampled on (the last usable day of the month).
struct TailObservation {
    Date date; ///< calendar month end
    double tr = 0.0;
    double alpha = 0.0;
    double phi = 0.0;
    double k_threshold = 0.0;
    int n_options = 0;
};

struct TailSeries {
    TailSampling sampling = TailSampling::month_end;
    std::vector<TailObservation> observations; ///< strictly increasing dates
};

/// Assemble the monthly series from daily parameters (sorted by date).
/// month_end records the last usable day's value; last5_mean averages the
/// month's last five usable days (fewer available -> averaged with a
/// warning).  Interior months with no usable day are omitted with a warning.
[[nodiscard]] TailSeries build_tail_series(std::span<const TailParams> daily,
                                           TailSampling sampling,
                                           std::vector<std::string>* warnings = nullptr);

/// Monthly TR as a core Series (date -> tr).
[[nodiscard]] Series tr_series(const TailSeries& series);

/// Write `date,tr,alpha,phi,k_threshold,n_options` rows.
void write_series(const TailSeries& series, const std::filesystem::path& path);

} // namespace trb::tailrisk
