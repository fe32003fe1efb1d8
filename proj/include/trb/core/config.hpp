#pragma once

#include "trb/core/date.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace trb {

/// How the out-of-sample training window grows.
enum class WindowPolicy { expanding, rolling };

/// How daily tail estimates collapse to a monthly observation.
enum class TailSampling { month_end, last5_mean };

/// Run-wide knobs shared by the pipeline stages.  Defaults reproduce the
/// headline configuration; everything can be overridden from a flat
/// `key = value` config file.
struct RunConfig {
    Date sample_start{1996, 1, 1};
    Date sample_end{2018, 12, 31};

    /// Bond maturities (months) for the return panel and tables.
    std::vector<int> maturities_months{12, 24, 36, 48, 60, 84, 120};

    int nw_lags = 12;                  ///< Newey-West lag truncation.
    double gamma = 5.0;                ///< Mean-variance risk aversion.
    double weight_low = -1.0;          ///< Portfolio weight floor.
    double weight_high = 5.0;          ///< Portfolio weight cap.
    int bootstrap_reps = 5000;         ///< Residual-bootstrap replications.
    std::uint64_t seed = 42;           ///< Global RNG seed.
    Date oos_split{2007, 6, 30};       ///< Last return month of the initial training sample.
    WindowPolicy window = WindowPolicy::expanding;
    TailSampling tail_sampling = TailSampling::month_end;

    /// Parse a flat config file: one `key = value` per line, '#' comments,
    /// unknown keys rejected (typo safety).  Missing keys keep defaults.
    static RunConfig from_file(const std::filesystem::path& path);
    static RunConfig from_string(const std::string& text, const std::string& label = "<config>");
};

[[nodiscard]] std::string to_string(WindowPolicy w);
[[nodiscard]] std::string to_string(TailSampling t);

} // namespace trb
