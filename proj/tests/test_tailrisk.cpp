#include "doctest.h"

#include "trb/core/errors.hpp"
#include "trb/core/stats.hpp"
#include "trb/ingest.hpp"
#include "trb/synthlab.hpp"
#include "trb/tailrisk.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <vector>

using namespace trb;
using tailrisk::TailParams;

namespace {

// Exponential deep-OTM put price used throughout as the generating form.
double btx_price(double k, double alpha, double phi, double rate, double tau, double fwd) {
    return std::exp(-rate * tau) * tau * fwd * phi * std::exp((1.0 + alpha) * k) /
           (alpha * (alpha + 1.0));
}

// Hand-built filtered chain; puts arrive as (k, mid) sorted by k descending.
ingest::FilteredChain make_chain(std::vector<std::pair<double, double>> puts,
                                 double forward = 100.0, double rate = 0.02, int tenor = 30,
                                 Date date = Date{2001, 1, 3}) {
    std::sort(puts.begin(), puts.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    ingest::FilteredChain c;
    c.date = date;
    c.tenor_days = tenor;
    c.forward = forward;
    c.rate = rate;
    c.puts = std::move(puts);
    return c;
}

ingest::FilteredChain btx_chain(double alpha, double phi, const std::vector<double>& ks,
                                double forward = 100.0, double rate = 0.02, int tenor = 30,
                                Date date = Date{2001, 1, 3}) {
    std::vector<std::pair<double, double>> puts;
    for (double k : ks) puts.emplace_back(k, btx_price(k, alpha, phi, rate, tenor / 365.0, forward));
    return make_chain(std::move(puts), forward, rate, tenor, date);
}

ingest::ChainMap to_chain_map(const synthlab::TailDataset& ds) {
    ingest::ChainMap chains;
    for (const auto& r : ds.options) {
        ingest::OptionQuote q;
        q.date = r.date;
        q.expiry = r.expiry;
        q.strike = r.strike;
        q.kind = r.kind;
        q.bid = r.bid;
        q.ask = r.ask;
        chains[{r.date, r.expiry}].push_back(q);
    }
    return chains;
}

TailParams params_for(double alpha, double phi, double k) {
    TailParams p;
    p.as_of = Date{2001, 1, 31};
    p.alpha = alpha;
    p.phi = phi;
    p.k_threshold = k;
    p.n_options_alpha = 1;
    p.n_options_phi = 1;
    return p;
}

} // namespace

TEST_CASE("estimate_alpha inverts exact exponential decay") {
    // O(k) = C e^{16k}  =>  every pair slope is 16, alpha = 15.
    std::vector<std::pair<double, double>> puts;
    for (double k : {-0.10, -0.12, -0.14}) puts.emplace_back(k, 5.0 * std::exp(16.0 * k));
    const auto chain = make_chain(std::move(puts));
    const std::vector<ingest::FilteredChain> chains{chain};
    CHECK(tailrisk::estimate_alpha(chains) == doctest::Approx(15.0).epsilon(1e-12));
}

TEST_CASE("estimate_alpha with a single pair returns that slope minus one") {
    const auto chain =
        make_chain({{-0.10, std::exp(21.0 * -0.10)}, {-0.20, std::exp(21.0 * -0.20)}});
    const std::vector<ingest::FilteredChain> chains{chain};
    CHECK(tailrisk::estimate_alpha(chains) == doctest::Approx(20.0).epsilon(1e-12));
}

TEST_CASE("estimate_alpha error taxonomy") {
    SUBCASE("no adjacent pairs anywhere") {
        const std::vector<ingest::FilteredChain> chains{make_chain({{-0.3, 0.02}})};
        CHECK_THROWS_AS((void)tailrisk::estimate_alpha(chains), NoTailDataError);
        CHECK_THROWS_AS((void)tailrisk::estimate_alpha(std::vector<ingest::FilteredChain>{}),
                        NoTailDataError);
    }
    SUBCASE("decay too flat gives alpha <= 0") {
        // slope 0.5 => alpha = -0.5
        std::vector<std::pair<double, double>> puts;
        for (double k : {-0.1, -0.2, -0.3}) puts.emplace_back(k, std::exp(0.5 * k));
        const std::vector<ingest::FilteredChain> chains{make_chain(std::move(puts))};
        CHECK_THROWS_AS((void)tailrisk::estimate_alpha(chains), DegenerateTailError);
    }
    SUBCASE("slope exactly one gives alpha == 0 which is degenerate") {
        std::vector<std::pair<double, double>> puts;
        for (double k : {-0.1, -0.2}) puts.emplace_back(k, std::exp(1.0 * k));
        const std::vector<ingest::FilteredChain> chains{make_chain(std::move(puts))};
        CHECK_THROWS_AS((void)tailrisk::estimate_alpha(chains), DegenerateTailError);
    }
}

TEST_CASE("estimate_alpha pools pair slopes across chains as one median") {
    const auto a = btx_chain(15.0, 0.004, {-0.20, -0.25});          // one pair, slope 16
    const auto b = btx_chain(20.0, 0.004, {-0.20, -0.25, -0.30});   // two pairs, slope 21
    std::vector<ingest::FilteredChain> chains{a, b};
    const double est = tailrisk::estimate_alpha(chains);
    CHECK(est == doctest::Approx(20.0).epsilon(1e-12)); // median{16,21,21} = 21

    SUBCASE("permutation of chain order is irrelevant") {
        std::vector<ingest::FilteredChain> swapped{b, a};
        CHECK(tailrisk::estimate_alpha(swapped) == doctest::Approx(est).epsilon(1e-14));
    }
    SUBCASE("common price scaling within a chain cancels") {
        auto scaled = chains;
        for (auto& [k, mid] : scaled[0].puts) mid *= 7.25;
        for (auto& [k, mid] : scaled[1].puts) mid *= 0.031;
        CHECK(tailrisk::estimate_alpha(scaled) == doctest::Approx(est).epsilon(1e-12));
    }
}

TEST_CASE("estimate_alpha recovers the decay under multiplicative noise across seeds") {
    // 4 tenors x 10 strikes, 1% lognormal noise: the pooled median over 36
    // pair slopes keeps every draw well inside [17, 19] around truth 18.
    synthlab::TailGeneratorSpec spec;
    spec.alpha = 18.0;
    spec.phi = 0.004;
    spec.strikes_per_tenor = 10;
    spec.tenor_days = {10, 17, 31, 44};
    spec.noise_sd = 0.01;
    spec.n_days = 1;
    std::vector<double> errors;
    for (std::uint64_t seed = 1; seed <= 200; ++seed) {
        spec.seed = seed;
        const auto ds = synthlab::gen_tail_options(spec);
        const auto chains = ingest::prepare_chains(to_chain_map(ds), ds.rates, ds.atm_iv30);
        REQUIRE(chains.size() == 4);
        const double est = tailrisk::estimate_alpha(chains);
        CHECK(est > 17.0);
        CHECK(est < 19.0);
        errors.push_back(std::abs(est - 18.0));
    }
    CHECK(stats::median(errors) < 0.35);
}

TEST_CASE("estimate_phi inverts the generating level exactly on clean prices") {
    const std::vector<double> ks{-0.20, -0.25, -0.30, -0.35, -0.40};
    SUBCASE("phi = 0.004") {
        const std::vector<ingest::FilteredChain> chains{btx_chain(15.0, 0.004, ks)};
        const double est = tailrisk::estimate_phi(chains, 15.0);
        CHECK(std::abs(est / 0.004 - 1.0) < 1e-12);
    }
    SUBCASE("phi = 1") {
        const std::vector<ingest::FilteredChain> chains{btx_chain(15.0, 1.0, ks)};
        CHECK(std::abs(tailrisk::estimate_phi(chains, 15.0) - 1.0) < 1e-12);
    }
    SUBCASE("pools across chains with different tenor, rate and forward") {
        const auto c1 = btx_chain(15.0, 0.004, ks, 100.0, 0.02, 30);
        const auto c2 = btx_chain(15.0, 0.004, ks, 97.0, 0.035, 12);
        const std::vector<ingest::FilteredChain> chains{c1, c2};
        CHECK(std::abs(tailrisk::estimate_phi(chains, 15.0) / 0.004 - 1.0) < 1e-12);
    }
}

TEST_CASE("estimate_phi is a median: one corrupted quote does not move it") {
    std::vector<double> ks;
    for (int i = 0; i < 10; ++i) ks.push_back(-0.20 - 0.10 * i);
    auto chain = btx_chain(15.0, 0.004, ks);
    const std::vector<ingest::FilteredChain> clean{chain};
    const double base = tailrisk::estimate_phi(clean, 15.0);
    chain.puts.back().second *= 2.0; // deepest quote doubled, ordering intact
    REQUIRE(chain.puts[8].second > chain.puts[9].second);
    const std::vector<ingest::FilteredChain> dirty{chain};
    CHECK(tailrisk::estimate_phi(dirty, 15.0) == doctest::Approx(base).epsilon(1e-14));
}

TEST_CASE("estimate_phi scales one-for-one with a common price factor") {
    const std::vector<double> ks{-0.20, -0.25, -0.30, -0.35};
    auto chain = btx_chain(12.0, 0.01, ks);
    const std::vector<ingest::FilteredChain> clean{chain};
    const double base = tailrisk::estimate_phi(clean, 12.0);
    const double c = 2.718281828459045;
    for (auto& [k, mid] : chain.puts) mid *= c;
    const std::vector<ingest::FilteredChain> scaled{chain};
    CHECK(std::abs(tailrisk::estimate_phi(scaled, 12.0) / (c * base) - 1.0) < 1e-12);
}

TEST_CASE("estimate_phi error taxonomy") {
    const std::vector<ingest::FilteredChain> empty{};
    CHECK_THROWS_AS((void)tailrisk::estimate_phi(empty, 15.0), NoTailDataError);
    ingest::FilteredChain hollow;
    hollow.date = Date{2001, 1, 3};
    hollow.tenor_days = 30;
    hollow.forward = 100.0;
    const std::vector<ingest::FilteredChain> chains{hollow};
    CHECK_THROWS_AS((void)tailrisk::estimate_phi(chains, 15.0), NoTailDataError);
    const std::vector<ingest::FilteredChain> ok{btx_chain(15.0, 0.004, {-0.2, -0.3})};
    CHECK_THROWS_AS((void)tailrisk::estimate_phi(ok, 0.0), ValidationError);
    CHECK_THROWS_AS((void)tailrisk::estimate_phi(ok, -1.0), ValidationError);
}

TEST_CASE("tail_threshold is three maturity-normalized ATM standard deviations") {
    CHECK(tailrisk::tail_threshold(0.20) ==
          doctest::Approx(0.17201465372429878).epsilon(1e-14));
    CHECK(tailrisk::tail_threshold(1.1626916409142416) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK_THROWS_AS((void)tailrisk::tail_threshold(0.0), ValidationError);
    CHECK_THROWS_AS((void)tailrisk::tail_threshold(-0.2), ValidationError);
}

TEST_CASE("left_jump_volatility closed form matches hand anchors") {
    CHECK(tailrisk::left_jump_volatility(params_for(1.0, 1.0, 0.0)) ==
          doctest::Approx(1.4142135623730951).epsilon(1e-14));
    CHECK(tailrisk::left_jump_volatility(params_for(2.0, 1.0, 1.0)) ==
          doctest::Approx(0.41130171899199).epsilon(1e-12));
    // variation is linear in phi, so volatility scales by sqrt(2)
    const double one = tailrisk::left_jump_volatility(params_for(7.0, 0.02, 0.3));
    const double two = tailrisk::left_jump_volatility(params_for(7.0, 0.04, 0.3));
    CHECK(two / one == doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));

    CHECK_THROWS_AS((void)tailrisk::left_jump_volatility(params_for(0.0, 1.0, 0.1)),
                    ValidationError);
    CHECK_THROWS_AS((void)tailrisk::left_jump_volatility(params_for(1.0, 0.0, 0.1)),
                    ValidationError);
    CHECK_THROWS_AS((void)tailrisk::left_jump_volatility(params_for(1.0, 1.0, -0.1)),
                    ValidationError);
}

TEST_CASE("left_jump_volatility agrees with adaptive quadrature over a grid") {
    for (int ia = 0; ia < 5; ++ia) {
        const double alpha = 1.0 + ia * (39.0 / 4.0);
        for (int ip = 0; ip < 5; ++ip) {
            const double phi = 1e-4 * std::pow(1e4, ip / 4.0);
            for (int ik = 0; ik < 5; ++ik) {
                const double K = 0.05 + ik * (0.95 / 4.0);
                const double tr = tailrisk::left_jump_volatility(params_for(alpha, phi, K));
                const double oracle = std::sqrt(synthlab::numeric_tail_integral(alpha, phi, K));
                CHECK(std::abs(tr / oracle - 1.0) < 1e-8);
            }
        }
    }
}

TEST_CASE("left_jump_volatility monotonicity on grids") {
    const auto tr = [](double a, double p, double k) {
        return tailrisk::left_jump_volatility(params_for(a, p, k));
    };
    for (double a : {1.0, 4.0, 12.0, 30.0}) {
        for (double p : {1e-3, 0.1}) {
            double prev = tr(a, p, 0.05);
            for (double k : {0.15, 0.40, 0.80, 1.0}) { // decreasing in K
                const double cur = tr(a, p, k);
                CHECK(cur < prev);
                prev = cur;
            }
        }
    }
    for (double k : {0.05, 0.3, 1.0}) {
        double prev = tr(1.0, 0.01, k);
        for (double a : {2.0, 8.0, 20.0, 40.0}) { // decreasing in alpha
            const double cur = tr(a, 0.01, k);
            CHECK(cur < prev);
            prev = cur;
        }
        prev = tr(5.0, 1e-4, k);
        for (double p : {1e-3, 1e-2, 1e-1, 1.0}) { // increasing in phi
            const double cur = tr(5.0, p, k);
            CHECK(cur > prev);
            prev = cur;
        }
    }
}

TEST_CASE("estimate_daily_params shares alpha within the ISO week and skips bad days") {
    // Week 1 (Mon 2001-01-01 .. Tue): decay slope 0.5 -> degenerate alpha.
    // Week 2 (Mon 2001-01-08 .. Tue): clean alpha = 15.
    std::vector<ingest::FilteredChain> chains;
    std::vector<double> flat_k{-0.1, -0.2, -0.3};
    for (int d = 0; d < 2; ++d) {
        std::vector<std::pair<double, double>> puts;
        for (double k : flat_k) puts.emplace_back(k, std::exp(0.5 * k));
        chains.push_back(make_chain(std::move(puts), 100.0, 0.02, 30, Date{2001, 1, 1 + d}));
    }
    const std::vector<double> ks{-0.20, -0.25, -0.30};
    chains.push_back(btx_chain(15.0, 0.004, ks, 100.0, 0.02, 30, Date{2001, 1, 8}));
    chains.push_back(btx_chain(15.0, 0.004, ks, 100.0, 0.02, 12, Date{2001, 1, 8}));
    chains.push_back(btx_chain(15.0, 0.004, ks, 100.0, 0.02, 30, Date{2001, 1, 9}));
    chains.push_back(btx_chain(15.0, 0.004, ks, 100.0, 0.02, 30, Date{2001, 1, 10}));

    Series atm;
    for (int day : {1, 2, 8, 9}) atm.push_back(Date{2001, 1, day}, 0.18); // the 10th is missing

    std::vector<std::string> warnings;
    const auto daily = tailrisk::estimate_daily_params(chains, atm, &warnings);

    REQUIRE(daily.size() == 2); // week 1 degenerate, the 10th has no ATM vol
    CHECK(daily[0].as_of == Date{2001, 1, 8});
    CHECK(daily[1].as_of == Date{2001, 1, 9});
    for (const auto& p : daily) {
        CHECK(p.alpha == doctest::Approx(15.0).epsilon(1e-12));
        CHECK(std::abs(p.phi / 0.004 - 1.0) < 1e-12);
        CHECK(p.k_threshold == doctest::Approx(tailrisk::tail_threshold(0.18)).epsilon(1e-14));
        // All four week-2 chains pool into alpha (two pairs each), including
        // the one on the 10th whose day is later skipped for missing ATM vol.
        CHECK(p.n_options_alpha == 8);
    }
    CHECK(daily[0].n_options_phi == 6); // two chains of three quotes
    CHECK(daily[1].n_options_phi == 3);

    REQUIRE(warnings.size() == 2);
    CHECK(warnings[0].find("degenerate") != std::string::npos);
    CHECK(warnings[1].find("2001-01-10") != std::string::npos);
}

TEST_CASE("build_tail_series: constant daily value passes through both samplings") {
    std::vector<TailParams> daily;
    for (int m = 1; m <= 3; ++m)
        for (int d = 1; d <= 28; ++d) {
            auto p = params_for(18.0, 0.004, 0.16);
            p.as_of = Date{2001, m, d};
            p.n_options_phi = 40;
            daily.push_back(p);
        }
    const double tr0 = tailrisk::left_jump_volatility(daily.front());
    for (auto sampling : {TailSampling::month_end, TailSampling::last5_mean}) {
        const auto series = tailrisk::build_tail_series(daily, sampling);
        REQUIRE(series.observations.size() == 3);
        CHECK(series.sampling == sampling);
        for (const auto& obs : series.observations) {
            CHECK(obs.tr == doctest::Approx(tr0).epsilon(1e-15));
            CHECK(obs.alpha == 18.0);
            CHECK(obs.n_options == 40);
        }
        CHECK(series.observations[0].date == Date{2001, 1, 31});
        CHECK(series.observations[1].date == Date{2001, 2, 28});
        CHECK(series.observations[2].date == Date{2001, 3, 31});
    }
}

TEST_CASE("build_tail_series: last5_mean averages the month's last five days") {
    // phi chosen so daily tr = 0.1, 0.2, 0.3, 0.4, 0.5 (tr^2 linear in phi).
    const double alpha = 1.5, K = 0.3;
    const std::vector<double> phis{0.017060607980755264, 0.06824243192302105,
                                   0.15354547182679734, 0.2729697276920842,
                                   0.4265151995188815};
    std::vector<TailParams> daily;
    for (int i = 0; i < 5; ++i) {
        auto p = params_for(alpha, phis[i], K);
        p.as_of = Date{2001, 1, 22 + i};
        daily.push_back(p);
    }
    REQUIRE(tailrisk::left_jump_volatility(daily[2]) == doctest::Approx(0.3).epsilon(1e-12));

    const auto mean = tailrisk::build_tail_series(daily, TailSampling::last5_mean);
    REQUIRE(mean.observations.size() == 1);
    CHECK(mean.observations[0].tr == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(mean.observations[0].date == Date{2001, 1, 31});

    const auto last = tailrisk::build_tail_series(daily, TailSampling::month_end);
    CHECK(last.observations[0].tr == doctest::Approx(0.5).epsilon(1e-12));

    SUBCASE("an earlier sixth day is ignored by the five-day mean") {
        auto extra = params_for(alpha, 4.0, K);
        extra.as_of = Date{2001, 1, 5};
        std::vector<TailParams> six{extra};
        six.insert(six.end(), daily.begin(), daily.end());
        const auto series = tailrisk::build_tail_series(six, TailSampling::last5_mean);
        CHECK(series.observations[0].tr == doctest::Approx(0.3).epsilon(1e-12));
    }
    SUBCASE("fewer than five days averages what exists and warns") {
        std::vector<TailParams> three(daily.begin(), daily.begin() + 3);
        std::vector<std::string> warnings;
        const auto series =
            tailrisk::build_tail_series(three, TailSampling::last5_mean, &warnings);
        CHECK(series.observations[0].tr == doctest::Approx(0.2).epsilon(1e-12));
        REQUIRE(warnings.size() == 1);
        CHECK(warnings[0].find("2001-01") != std::string::npos);
        CHECK(warnings[0].find("3") != std::string::npos);
    }
}

TEST_CASE("build_tail_series: interior empty month is omitted with a warning") {
    std::vector<TailParams> daily;
    for (int d : {10, 11}) {
        auto p = params_for(18.0, 0.004, 0.16);
        p.as_of = Date{2001, 1, d};
        daily.push_back(p);
    }
    auto p = params_for(18.0, 0.004, 0.16);
    p.as_of = Date{2001, 3, 14};
    daily.push_back(p);
    std::vector<std::string> warnings;
    const auto series = tailrisk::build_tail_series(daily, TailSampling::month_end, &warnings);
    REQUIRE(series.observations.size() == 2);
    CHECK(series.observations[0].date == Date{2001, 1, 31});
    CHECK(series.observations[1].date == Date{2001, 3, 31});
    REQUIRE_FALSE(warnings.empty());
    CHECK(warnings[0].find("2001-02") != std::string::npos);

    SUBCASE("empty input gives an empty series") {
        const auto none = tailrisk::build_tail_series({}, TailSampling::month_end);
        CHECK(none.observations.empty());
    }
}

TEST_CASE("pipeline recovers the generating tail volatility over 24 months") {
    synthlab::TailGeneratorSpec spec;
    spec.alpha = 18.0;
    spec.phi = 0.004;
    spec.strikes_per_tenor = 10;
    spec.tenor_days = {10, 17, 31, 44};
    spec.noise_sd = 0.01;
    spec.start = Date{2001, 1, 1};
    spec.n_days = 521; // weekdays spanning 2001-01 .. 2002-12
    spec.seed = 42;
    const auto ds = synthlab::gen_tail_options(spec);
    REQUIRE(ds.options.back().date.month_key() == Date{2002, 12, 1}.month_key());

    const auto chains = ingest::prepare_chains(to_chain_map(ds), ds.rates, ds.atm_iv30);
    std::vector<std::string> warnings;
    const auto daily = tailrisk::estimate_daily_params(chains, ds.atm_iv30, &warnings);
    CHECK(warnings.empty());

    TailParams truth;
    truth.alpha = spec.alpha;
    truth.phi = spec.phi;
    truth.k_threshold = tailrisk::tail_threshold(spec.atm_iv30);
    const double tr_true = tailrisk::left_jump_volatility(truth);

    for (auto sampling : {TailSampling::month_end, TailSampling::last5_mean}) {
        const auto series = tailrisk::build_tail_series(daily, sampling);
        REQUIRE(series.observations.size() == 24);
        double worst = 0.0, sum = 0.0;
        for (const auto& obs : series.observations) {
            const double rel = std::abs(obs.tr / tr_true - 1.0);
            worst = std::max(worst, rel);
            sum += obs.tr;
        }
        CHECK(worst < 0.10);
        CHECK(std::abs(sum / 24.0 / tr_true - 1.0) < 0.03);
    }
}

TEST_CASE("write_series emits stable bytes and round-trips through Series") {
    tailrisk::TailSeries series;
    series.sampling = TailSampling::month_end;
    tailrisk::TailObservation a;
    a.date = Date{2001, 1, 31};
    a.tr = 0.125;
    a.alpha = 18.0;
    a.phi = 0.004;
    a.k_threshold = 0.16;
    a.n_options = 40;
    tailrisk::TailObservation b = a;
    b.date = Date{2001, 2, 28};
    b.tr = 0.0625;
    series.observations = {a, b};

    const auto dir = std::filesystem::temp_directory_path() / "trb_tailrisk_test";
    std::filesystem::create_directories(dir);
    const auto path = dir / "tail_series.csv";
    tailrisk::write_series(series, path);

    std::ifstream in(path, std::ios::binary);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    CHECK(text ==
          "date,tr,alpha,phi,k_threshold,n_options\n"
          "2001-01-31,0.125,18,0.004,0.16,40\n"
          "2001-02-28,0.0625,18,0.004,0.16,40\n");

    const auto tr = Series::from_csv(path, "tr");
    REQUIRE(tr.size() == 2);
    CHECK(tr.at(Date{2001, 1, 31}) == 0.125);
    CHECK(tr.at(Date{2001, 2, 28}) == 0.0625);

    const auto mem = tailrisk::tr_series(series);
    REQUIRE(mem.size() == 2);
    CHECK(mem.at(Date{2001, 2, 28}) == 0.0625);
}
