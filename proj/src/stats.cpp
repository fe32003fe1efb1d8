#include "trb/core/stats.hpp"

#include "trb/core/errors.hpp"

#include <algorithm>
#include <cmath>

namespace trb::stats {

namespace {
void require_nonempty(std::span<const double> x, const char* who) {
    if (x.empty()) throw ValidationError(std::string(who) + ": empty input");
}
} // namespace

double mean(std::span<const double> x) {
    require_nonempty(x, "mean");
    double s = 0.0;
    for (double v : x) s += v;
    return s / static_cast<double>(x.size());
}

double variance(std::span<const double> x) {
    if (x.size() < 2) throw ValidationError("variance: need at least 2 observations");
    const double m = mean(x);
    double s = 0.0;
    for (double v : x) s += (v - m) * (v - m);
    return s / static_cast<double>(x.size() - 1);
}

double variance_pop(std::span<const double> x) {
    require_nonempty(x, "variance_pop");
    const double m = mean(x);
    double s = 0.0;
    for (double v : x) s += (v - m) * (v - m);
    return s / static_cast<double>(x.size());
}

double sd(std::span<const double> x) { return std::sqrt(variance(x)); }

double median(std::span<const double> x) {
    require_nonempty(x, "median");
    std::vector<double> v(x.begin(), x.end());
    const std::size_t n = v.size();
    const std::size_t mid = n / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    double hi = v[mid];
    if (n % 2 == 1) return hi;
    double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lo + hi);
}

double correlation(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw ValidationError("correlation: length mismatch");
    if (x.size() < 2) throw ValidationError("correlation: need at least 2 observations");
    const double mx = mean(x);
    const double my = mean(y);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx <= 0.0 || syy <= 0.0) throw NumericError("correlation: zero-variance input");
    return sxy / std::sqrt(sxx * syy);
}

double autocorrelation(std::span<const double> x, int lag) {
    if (lag < 0) throw ValidationError("autocorrelation: negative lag");
    if (x.size() <= static_cast<std::size_t>(lag))
        throw ValidationError("autocorrelation: series shorter than lag");
    const double m = mean(x);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) den += (x[i] - m) * (x[i] - m);
    for (std::size_t i = static_cast<std::size_t>(lag); i < x.size(); ++i)
        num += (x[i] - m) * (x[i - static_cast<std::size_t>(lag)] - m);
    if (den <= 0.0) throw NumericError("autocorrelation: zero-variance input");
    return num / den;
}

double skewness(std::span<const double> x) {
    if (x.size() < 2) throw ValidationError("skewness: need at least 2 observations");
    const double m = mean(x);
    double s2 = 0.0, s3 = 0.0;
    for (double v : x) {
        const double d = v - m;
        s2 += d * d;
        s3 += d * d * d;
    }
    const double n = static_cast<double>(x.size());
    const double sig = std::sqrt(s2 / n);
    if (sig <= 0.0) throw NumericError("skewness: zero-variance input");
    return (s3 / n) / (sig * sig * sig);
}

double kurtosis(std::span<const double> x) {
    if (x.size() < 2) throw ValidationError("kurtosis: need at least 2 observations");
    const double m = mean(x);
    double s2 = 0.0, s4 = 0.0;
    for (double v : x) {
        const double d = v - m;
        s2 += d * d;
        s4 += d * d * d * d;
    }
    const double n = static_cast<double>(x.size());
    const double var = s2 / n;
    if (var <= 0.0) throw NumericError("kurtosis: zero-variance input");
    return (s4 / n) / (var * var);
}

double quantile(std::span<const double> x, double q) {
    require_nonempty(x, "quantile");
    if (q < 0.0 || q > 1.0) throw ValidationError("quantile: q outside [0,1]");
    std::vector<double> v(x.begin(), x.end());
    std::sort(v.begin(), v.end());
    // Linear interpolation between closest ranks (type-7).
    const double h = q * (static_cast<double>(v.size()) - 1.0);
    const std::size_t lo = static_cast<std::size_t>(h);
    if (lo + 1 >= v.size()) return v.back();
    const double w = h - static_cast<double>(lo);
    return (1.0 - w) * v[lo] + w * v[lo + 1];
}

} // namespace trb::stats
