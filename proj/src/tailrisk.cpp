#include "trb/tailrisk.hpp"

#include "trb/core/csv.hpp"
#include "trb/core/errors.hpp"
#include "trb/core/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace trb::tailrisk {

namespace {

std::string month_label(int month_key) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02d", month_key / 12, month_key % 12 + 1);
    return buf;
}

} // namespace

double estimate_alpha(std::span<const ingest::FilteredChain> chains) {
    std::vector<double> slopes;
    for (const auto& chain : chains) {
        for (std::size_t i = 1; i < chain.puts.size(); ++i) {
            const auto& [k1, o1] = chain.puts[i - 1];
            const auto& [k2, o2] = chain.puts[i];
            slopes.push_back(std::log(o2 / o1) / (k2 - k1));
        }
    }
    if (slopes.empty())
        throw NoTailDataError("estimate_alpha: no adjacent put pairs in pooled chains");
    const double alpha = stats::median(slopes) - 1.0;
    if (!(alpha > 0.0))
        throw DegenerateTailError("estimate_alpha: degenerate decay, alpha = " +
                                  csv::format_double(alpha) + " <= 0");
    return alpha;
}

double estimate_phi(std::span<const ingest::FilteredChain> chains, double alpha) {
    if (!(alpha > 0.0)) throw ValidationError("estimate_phi: alpha must be > 0");
    const double shift = std::log(alpha + 1.0) + std::log(alpha);
    std::vector<double> levels;
    for (const auto& chain : chains) {
        const double tau = chain.tau_years();
        const double base = chain.rate * tau - std::log(tau * chain.forward);
        for (const auto& [k, mid] : chain.puts)
            levels.push_back(std::log(mid) + base - (1.0 + alpha) * k + shift);
    }
    if (levels.empty()) throw NoTailDataError("estimate_phi: no usable put quotes");
    return std::exp(stats::median(levels));
}

double tail_threshold(double atm_iv30) {
    if (!(atm_iv30 > 0.0)) throw ValidationError("tail_threshold: atm_iv30 must be > 0");
    return 3.0 * atm_iv30 * std::sqrt(30.0 / 365.0);
}

double left_jump_volatility(const TailParams& params) {
    const double a = params.alpha, phi = params.phi, K = params.k_threshold;
    if (!(a > 0.0)) throw ValidationError("left_jump_volatility: alpha must be > 0");
    if (!(phi > 0.0)) throw ValidationError("left_jump_volatility: phi must be > 0");
    if (K < 0.0) throw ValidationError("left_jump_volatility: k_threshold must be >= 0");
    const double aK = a * K;
    return std::sqrt(phi * std::exp(-aK) * (aK * (aK + 2.0) + 2.0) / (a * a * a));
}

std::vector<TailParams> estimate_daily_params(std::span<const ingest::FilteredChain> chains,
                                              const Series& atm_iv,
                                              std::vector<std::string>* warnings) {
    const auto warn = [&](const std::string& msg) {
        if (warnings) warnings->push_back(msg);
    };
    std::vector<TailParams> out;

    // Chains arrive sorted by date, so ISO weeks form contiguous runs.
    std::size_t week_begin = 0;
    while (week_begin < chains.size()) {
        const int week = chains[week_begin].date.iso_week_key();
        std::size_t week_end = week_begin;
        while (week_end < chains.size() && chains[week_end].date.iso_week_key() == week)
            ++week_end;
        const auto week_chains = chains.subspan(week_begin, week_end - week_begin);

        double alpha = 0.0;
        int n_pairs = 0;
        try {
            alpha = estimate_alpha(week_chains);
            for (const auto& c : week_chains)
                if (c.puts.size() >= 2) n_pairs += static_cast<int>(c.puts.size()) - 1;
        } catch (const DegenerateTailError&) {
            warn("week " + std::to_string(week) + " (starting " +
                 week_chains.front().date.str() + "): degenerate tail decay; week skipped");
            week_begin = week_end;
            continue;
        } catch (const NoTailDataError&) {
            warn("week " + std::to_string(week) + " (starting " +
                 week_chains.front().date.str() + "): no adjacent put pairs; week skipped");
            week_begin = week_end;
            continue;
        }

        std::size_t day_begin = 0;
        while (day_begin < week_chains.size()) {
            const Date date = week_chains[day_begin].date;
            std::size_t day_end = day_begin;
            while (day_end < week_chains.size() && week_chains[day_end].date == date) ++day_end;
            const auto day_chains = week_chains.subspan(day_begin, day_end - day_begin);
            day_begin = day_end;

            const auto iv = atm_iv.at(date);
            if (!iv) {
                warn(date.str() + ": no ATM vol observation; day skipped");
                continue;
            }
            TailParams p;
            p.as_of = date;
            p.alpha = alpha;
            p.n_options_alpha = n_pairs;
            try {
                p.phi = estimate_phi(day_chains, alpha);
            } catch (const NoTailDataError&) {
                warn(date.str() + ": no usable put quotes; day skipped");
                continue;
            }
            for (const auto& c : day_chains) p.n_options_phi += static_cast<int>(c.puts.size());
            p.k_threshold = tail_threshold(*iv);
            out.push_back(p);
        }
        week_begin = week_end;
    }
    return out;
}

TailSeries build_tail_series(std::span<const TailParams> daily, TailSampling sampling,
                             std::vector<std::string>* warnings) {
    const auto warn = [&](const std::string& msg) {
        if (warnings) warnings->push_back(msg);
    };
    TailSeries series;
    series.sampling = sampling;

    std::size_t begin = 0;
    int prev_month = -1;
    while (begin < daily.size()) {
        const int month = daily[begin].as_of.month_key();
        std::size_t end = begin;
        while (end < daily.size() && daily[end].as_of.month_key() == month) ++end;

        if (prev_month >= 0)
            for (int gap = prev_month + 1; gap < month; ++gap)
                warn(month_label(gap) + ": no usable tail days; month omitted");
        prev_month = month;

        const auto days = daily.subspan(begin, end - begin);
        begin = end;

        const TailParams& last = days.back();
        TailObservation obs;
        obs.date = last.as_of.month_end();
        obs.alpha = last.alpha;
        obs.phi = last.phi;
        obs.k_threshold = last.k_threshold;
        obs.n_options = last.n_options_phi;
        if (sampling == TailSampling::month_end) {
            obs.tr = left_jump_volatility(last);
        } else {
            const std::size_t take = std::min<std::size_t>(5, days.size());
            double sum = 0.0;
            for (std::size_t i = days.size() - take; i < days.size(); ++i)
                sum += left_jump_volatility(days[i]);
            obs.tr = sum / static_cast<double>(take);
            if (take < 5)
                warn(month_label(month) + ": last5_mean averaged over " + std::to_string(take) +
                     " available days");
        }
        series.observations.push_back(obs);
    }
    return series;
}

Series tr_series(const TailSeries& series) {
    Series out;
    for (const auto& obs : series.observations) out.push_back(obs.date, obs.tr);
    return out;
}

void write_series(const TailSeries& series, const std::filesystem::path& path) {
    csv::Writer w(path);
    w.write_row({"date", "tr", "alpha", "phi", "k_threshold", "n_options"});
    for (const auto& obs : series.observations)
        w.write_row({obs.date.str(), csv::format_double(obs.tr), csv::format_double(obs.alpha),
                     csv::format_double(obs.phi), csv::format_double(obs.k_threshold),
                     std::to_string(obs.n_options)});
    w.close();
}

} // namespace trb::tailrisk
