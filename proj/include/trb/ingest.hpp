#pragma once

#include "trb/core/date.hpp"
#include "trb/core/series.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

/// Option-chain loading, forward extraction, and the deep-OTM put filter.
namespace trb::ingest {

struct OptionQuote {
    Date date;
    Date expiry;
    double strike = 0.0;
    char kind = 'P'; ///< 'C' or 'P'
    double bid = 0.0;
    double ask = 0.0;

    [[nodiscard]] double mid() const { return 0.5 * (bid + ask); }
    [[nodiscard]] int tenor_days() const { return static_cast<int>(days_between(date, expiry)); }
};

struct ChainKey {
    Date date;
    Date expiry;
    friend auto operator<=>(const ChainKey&, const ChainKey&) = default;
};

using ChainMap = std::map<ChainKey, std::vector<OptionQuote>>;

struct LoadReport {
    std::size_t rows = 0;
    std::size_t duplicates_dropped = 0;
    std::vector<std::string> warnings;
};

/// Read an options CSV (`date,expiry,strike,kind,bid,ask`) into per-(date,
/// expiry) groups.  Malformed rows throw ValidationError naming file, line
/// and field; duplicate (date,expiry,strike,kind) keys keep the last row and
/// warn (vendor files carry corrections).
[[nodiscard]] ChainMap load_option_chain(const std::filesystem::path& path,
                                         LoadReport* report = nullptr);

/// One strike-matched call/put pair.
struct ParityPair {
    double strike = 0.0;
    double call_mid = 0.0;
    double put_mid = 0.0;
};

/// Forward via put-call parity: median over pairs of K + (C - P) e^{r tau}.
/// Requires at least five pairs; fewer throws ValidationError (callers drop
/// the tenor and log).
[[nodiscard]] double implied_forward(const std::vector<ParityPair>& pairs, double rate,
                                     double tau_years);

/// Deep-OTM put chain surviving all filters for one (date, expiry) group.
struct FilteredChain {
    Date date;
    int tenor_days = 0;
    double forward = 0.0;
    double rate = 0.0; ///< annualized cc

    /// (k = ln(K/F), mid price), sorted by increasing |k| (toward deeper OTM).
    std::vector<std::pair<double, double>> puts;

    [[nodiscard]] double tau_years() const { return tenor_days / 365.0; }
    /// The decay estimator needs at least one adjacent pair.
    [[nodiscard]] bool eligible_for_alpha() const { return puts.size() >= 2; }
    /// The level estimator needs at least one quote.
    [[nodiscard]] bool usable_for_phi() const { return !puts.empty(); }
};

/// Apply the deep-OTM put filters to one (date, expiry) quote group:
///   1. tenor within [8, 45] calendar days (otherwise nullopt);
///   2. puts only, strike < forward (k < 0);
///   3. positive bid and positive bid-ask spread;
///   4. volatility-adjusted moneyness k / (atm_iv30 sqrt(tau_days/365)) <= -2.5;
///   5. strictly decreasing mid price scanning from the least-OTM strike
///      downward, dropping violators.
[[nodiscard]] std::optional<FilteredChain> filter_chain(const std::vector<OptionQuote>& quotes,
                                                        double forward, double rate,
                                                        double atm_iv30);

/// Pipeline glue: for every (date, expiry) group, screen quotes, match pairs,
/// extract the forward (needs >= 5 pairs, otherwise the tenor is dropped with
/// a warning), and run filter_chain.  `rates` is matched as-of date; `atm_iv`
/// must have a same-day observation.
[[nodiscard]] std::vector<FilteredChain> prepare_chains(const ChainMap& chains,
                                                        const Series& rates,
                                                        const Series& atm_iv,
                                                        std::vector<std::string>* warnings = nullptr);

} // namespace trb::ingest
