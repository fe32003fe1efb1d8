#include "trb/ingest.hpp"

#include "trb/core/csv.hpp"
#include "trb/core/errors.hpp"
#include "trb/core/stats.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace trb::ingest {

ChainMap load_option_chain(const std::filesystem::path& path, LoadReport* report) {
    const auto t = csv::read_file(path);
    const std::size_t c_date = t.col("date");
    const std::size_t c_expiry = t.col("expiry");
    const std::size_t c_strike = t.col("strike");
    const std::size_t c_kind = t.col("kind");
    const std::size_t c_bid = t.col("bid");
    const std::size_t c_ask = t.col("ask");

    ChainMap chains;
    // per-group index of (strike, kind) for duplicate handling
    std::map<ChainKey, std::map<std::pair<double, char>, std::size_t>> seen;
    LoadReport local;

    for (const auto& row : t.rows) {
        ++local.rows;
        const auto where = [&] { return t.path + ":" + std::to_string(row.line); };

        OptionQuote q;
        q.date = Date::parse(row.fields[c_date]);
        q.expiry = Date::parse(row.fields[c_expiry]);
        q.strike = csv::to_double(t, row, c_strike);
        const std::string& kind = row.fields[c_kind];
        if (kind != "C" && kind != "P")
            throw ValidationError(where() + ": kind must be 'C' or 'P', got '" + kind + "'");
        q.kind = kind[0];
        q.bid = csv::to_double(t, row, c_bid);
        q.ask = csv::to_double(t, row, c_ask);

        if (q.expiry < q.date)
            throw ValidationError(where() + ": expiry precedes quote date");
        if (q.strike <= 0.0) throw ValidationError(where() + ": strike must be positive");
        if (q.bid < 0.0) throw ValidationError(where() + ": negative bid");
        if (q.ask < q.bid)
            throw ValidationError(where() + ": ask " + csv::format_double(q.ask) +
                                  " below bid " + csv::format_double(q.bid));

        const ChainKey key{q.date, q.expiry};
        auto& index = seen[key];
        auto& group = chains[key];
        const auto [it, inserted] = index.try_emplace({q.strike, q.kind}, group.size());
        if (inserted) {
            group.push_back(q);
        } else {
            group[it->second] = q; // vendor correction: keep the last row
            ++local.duplicates_dropped;
            local.warnings.push_back(where() + ": duplicate (date,expiry,strike,kind), kept last");
        }
    }
    if (report) *report = std::move(local);
    return chains;
}

double implied_forward(const std::vector<ParityPair>& pairs, double rate, double tau_years) {
    if (pairs.size() < 5)
        throw ValidationError("implied_forward: need at least 5 matched pairs, have " +
                              std::to_string(pairs.size()));
    if (!(tau_years > 0.0)) throw ValidationError("implied_forward: tau must be > 0");
    const double growth = std::exp(rate * tau_years);
    std::vector<double> implieds;
    implieds.reserve(pairs.size());
    for (const auto& p : pairs)
        implieds.push_back(p.strike + (p.call_mid - p.put_mid) * growth);
    const double f = stats::median(implieds);
    if (!(f > 0.0)) throw NumericError("implied_forward: non-positive forward");
    return f;
}

std::optional<FilteredChain> filter_chain(const std::vector<OptionQuote>& quotes, double forward,
                                          double rate, double atm_iv30) {
    if (!(forward > 0.0)) throw ValidationError("filter_chain: forward must be > 0");
    if (!(atm_iv30 > 0.0)) throw ValidationError("filter_chain: atm_iv30 must be > 0");
    if (quotes.empty()) return std::nullopt;

    const Date date = quotes.front().date;
    const Date expiry = quotes.front().expiry;
    for (const auto& q : quotes) {
        if (q.date != date || q.expiry != expiry)
            throw ValidationError("filter_chain: quotes span multiple (date, expiry) groups");
    }

    const int tenor = quotes.front().tenor_days();
    if (tenor < 8 || tenor > 45) return std::nullopt;

    FilteredChain chain;
    chain.date = date;
    chain.tenor_days = tenor;
    chain.forward = forward;
    chain.rate = rate;

    const double unit = atm_iv30 * std::sqrt(tenor / 365.0);
    std::vector<std::pair<double, double>> puts; // (k, mid)
    for (const auto& q : quotes) {
        if (q.kind != 'P') continue;
        if (!(q.strike < forward)) continue;          // out of the money only
        if (!(q.bid > 0.0) || !(q.ask > q.bid)) continue;
        const double k = std::log(q.strike / forward);
        if (k / unit > -2.5) continue;                // not deep enough
        puts.emplace_back(k, q.mid());
    }

    // least OTM first: k descending (all k < 0)
    std::sort(puts.begin(), puts.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });

    // one left-to-right scan dropping quotes that break strict price decay
    for (const auto& p : puts) {
        if (!chain.puts.empty() && !(p.second < chain.puts.back().second)) continue;
        chain.puts.push_back(p);
    }
    return chain;
}

std::vector<FilteredChain> prepare_chains(const ChainMap& chains, const Series& rates,
                                          const Series& atm_iv,
                                          std::vector<std::string>* warnings) {
    std::vector<FilteredChain> out;
    const auto warn = [&](const std::string& msg) {
        if (warnings) warnings->push_back(msg);
    };

    for (const auto& [key, quotes] : chains) {
        const int tenor = static_cast<int>(days_between(key.date, key.expiry));
        if (tenor < 8 || tenor > 45) continue; // documented tenor window

        const auto rate = rates.asof(key.date);
        if (!rate) {
            warn(key.date.str() + ": no risk-free rate on or before this date; chain dropped");
            continue;
        }
        const auto iv = atm_iv.at(key.date);
        if (!iv) {
            warn(key.date.str() + ": no same-day ATM vol observation; chain dropped");
            continue;
        }

        // screen, then strike-match surviving calls and puts
        std::map<double, ParityPair> by_strike;
        std::map<double, std::pair<bool, bool>> have; // (call, put)
        for (const auto& q : quotes) {
            if (!(q.bid > 0.0) || !(q.ask > q.bid)) continue;
            auto& pair = by_strike[q.strike];
            pair.strike = q.strike;
            if (q.kind == 'C') {
                pair.call_mid = q.mid();
                have[q.strike].first = true;
            } else {
                pair.put_mid = q.mid();
                have[q.strike].second = true;
            }
        }
        std::vector<ParityPair> pairs;
        for (const auto& [strike, flags] : have)
            if (flags.first && flags.second) pairs.push_back(by_strike[strike]);

        const double tau = tenor / 365.0;
        double forward = 0.0;
        try {
            forward = implied_forward(pairs, *rate, tau);
        } catch (const ValidationError&) {
            warn(key.date.str() + " tenor " + std::to_string(tenor) + "d: fewer than 5 matched " +
                 "call/put pairs (" + std::to_string(pairs.size()) + "); chain dropped");
            continue;
        }

        auto chain = filter_chain(quotes, forward, *rate, *iv);
        if (chain) out.push_back(std::move(*chain));
    }
    return out;
}

} // namespace trb::ingest
