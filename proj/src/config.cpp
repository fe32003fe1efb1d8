#include "trb/core/config.hpp"

#include "trb/core/errors.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

namespace trb {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

double parse_num(const std::string& v, const std::string& key, const std::string& where) {
    double out = 0.0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size())
        throw ValidationError(where + ": key '" + key + "': '" + v + "' is not a number");
    return out;
}

std::vector<int> parse_int_list(const std::string& v, const std::string& key,
                                const std::string& where) {
    std::vector<int> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        out.push_back(static_cast<int>(parse_num(item, key, where)));
    }
    if (out.empty()) throw ValidationError(where + ": key '" + key + "': empty list");
    if (!std::is_sorted(out.begin(), out.end()))
        throw ValidationError(where + ": key '" + key + "': maturities must be ascending");
    return out;
}

RunConfig parse_lines(std::istream& in, const std::string& where) {
    RunConfig cfg;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ValidationError(where + ":" + std::to_string(lineno) +
                                  ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        const std::string here = where + ":" + std::to_string(lineno);

        if (key == "sample_start") cfg.sample_start = Date::parse(val);
        else if (key == "sample_end") cfg.sample_end = Date::parse(val);
        else if (key == "maturities_months") cfg.maturities_months = parse_int_list(val, key, here);
        else if (key == "nw_lags") cfg.nw_lags = static_cast<int>(parse_num(val, key, here));
        else if (key == "gamma") cfg.gamma = parse_num(val, key, here);
        else if (key == "weight_low") cfg.weight_low = parse_num(val, key, here);
        else if (key == "weight_high") cfg.weight_high = parse_num(val, key, here);
        else if (key == "bootstrap_reps") cfg.bootstrap_reps = static_cast<int>(parse_num(val, key, here));
        else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(parse_num(val, key, here));
        else if (key == "oos_split") cfg.oos_split = Date::parse(val);
        else if (key == "window") {
            if (val == "expanding") cfg.window = WindowPolicy::expanding;
            else if (val == "rolling") cfg.window = WindowPolicy::rolling;
            else throw ValidationError(here + ": window must be 'expanding' or 'rolling'");
        } else if (key == "tail_sampling") {
            if (val == "month_end") cfg.tail_sampling = TailSampling::month_end;
            else if (val == "last5_mean") cfg.tail_sampling = TailSampling::last5_mean;
            else throw ValidationError(here + ": tail_sampling must be 'month_end' or 'last5_mean'");
        } else {
            throw ValidationError(here + ": unknown key '" + key + "'");
        }
    }

    if (!(cfg.sample_start < cfg.sample_end))
        throw ValidationError(where + ": sample_start must precede sample_end");
    if (cfg.nw_lags < 0) throw ValidationError(where + ": nw_lags must be >= 0");
    if (cfg.gamma <= 0.0) throw ValidationError(where + ": gamma must be > 0");
    if (!(cfg.weight_low < cfg.weight_high))
        throw ValidationError(where + ": weight bounds must satisfy low < high");
    if (cfg.bootstrap_reps < 1) throw ValidationError(where + ": bootstrap_reps must be >= 1");
    return cfg;
}

} // namespace

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config '" + path.string() + "'");
    return parse_lines(in, path.string());
}

RunConfig RunConfig::from_string(const std::string& text, const std::string& label) {
    std::istringstream in(text);
    return parse_lines(in, label);
}

std::string to_string(WindowPolicy w) {
    return w == WindowPolicy::expanding ? "expanding" : "rolling";
}

std::string to_string(TailSampling t) {
    return t == TailSampling::month_end ? "month_end" : "last5_mean";
}

} // namespace trb
