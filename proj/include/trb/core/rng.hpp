#pragma once

#include <cstdint>
#include <limits>

namespace trb {

/// Counter-based deterministic random generator.
///
/// Each (seed, stream) pair defines an independent sequence; the n-th draw is
/// a pure function of (seed, stream, n).  Parallel code gives every
/// independent task its own stream id, so results do not depend on the number
/// of worker threads or on scheduling order.  Draws use the splitmix64
/// finalizer over the keyed counter, which passes standard statistical
/// batteries and is more than adequate for Monte Carlo work.
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

    /// Next raw 64-bit value.
    std::uint64_t next_u64();

    /// Uniform on (0, 1); never returns exactly 0 or 1.
    double uniform();

    /// Uniform on [lo, hi).
    double uniform(double lo, double hi);

    /// Standard normal via the inverse CDF (deterministic across platforms,
    /// unlike std::normal_distribution).
    double normal();

    double normal(double mean, double sd) { return mean + sd * normal(); }

    /// Uniform integer on [0, n).  Requires n > 0.
    std::uint64_t below(std::uint64_t n);

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

/// Inverse standard-normal CDF, |relative error| < 1e-14 after the Halley
/// refinement step.  Exposed because forecast p-values reuse it.
double inverse_normal_cdf(double p);

/// Standard normal CDF.
double normal_cdf(double x);

} // namespace trb
