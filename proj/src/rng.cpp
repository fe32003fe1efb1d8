#include "trb/core/rng.hpp"

#include "trb/core/errors.hpp"

#include <cmath>

namespace trb {

namespace {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

// splitmix64 finalizer: bijective mix with full avalanche.
std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace

Rng::Rng(std::uint64_t seed, std::uint64_t stream)
    : key_(mix64(mix64(seed + kGolden) ^ (stream * 0xda942042e4dd58b5ULL + kGolden))) {}

std::uint64_t Rng::next_u64() {
    const std::uint64_t c = counter_++;
    return mix64(key_ + c * kGolden);
}

double Rng::uniform() {
    // 53 random bits into (0,1): (n + 0.5) / 2^53 is symmetric and never 0/1.
    const std::uint64_t bits = next_u64() >> 11;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() { return inverse_normal_cdf(uniform()); }

std::uint64_t Rng::below(std::uint64_t n) {
    if (n == 0) throw ValidationError("Rng::below requires n > 0");
    // Rejection-free threshold method keeps the draw count deterministic...
    // but introduces modulo bias for astronomically large n.  For Monte Carlo
    // index draws (n << 2^32) the bias is < 2^-32 and irrelevant; keeping one
    // counter tick per draw is what preserves cross-thread reproducibility.
    return next_u64() % n;
}

double inverse_normal_cdf(double p) {
    if (!(p > 0.0 && p < 1.0)) throw ValidationError("inverse_normal_cdf requires p in (0,1)");

    // Acklam's rational approximation (relative error ~1.15e-9)...
    static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                   -2.759285104469687e+02, 1.383577518672690e+02,
                                   -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                   -1.556989798598866e+02, 6.680131188771972e+01,
                                   -1.328068155288572e+01};
    static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                   -2.400758277161838e+00, -2.549732539343734e+00,
                                   4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                   2.445134137142996e+00, 3.754408661907416e+00};
    constexpr double p_low = 0.02425;

    double x;
    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - p_low) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log1p(-p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }

    // ... sharpened to ~1e-15 by one Halley step on Phi(x) - p = 0.
    const double e = normal_cdf(x) - p;
    const double u = e * std::sqrt(2.0 * 3.141592653589793) * std::exp(0.5 * x * x);
    x -= u / (1.0 + 0.5 * x * u);
    return x;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

} // namespace trb
