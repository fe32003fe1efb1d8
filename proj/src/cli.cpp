#include "trb/cli.hpp"

#include "trb/atsm.hpp"
#include "trb/core/config.hpp"
#include "trb/core/csv.hpp"
#include "trb/core/date.hpp"
#include "trb/core/errors.hpp"
#include "trb/core/series.hpp"
#include "trb/curve.hpp"
#include "trb/ingest.hpp"
#include "trb/portfolio.hpp"
#include "trb/predict.hpp"
#include "trb/synthlab.hpp"
#include "trb/tailrisk.hpp"
#include "trb/threepass.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace trb::cli {
namespace {

namespace fs = std::filesystem;

constexpr const char* kUsage = R"(usage: trb <command> [flags]

commands
  synth          write a synthetic option chain and bond yield panel
  tail-estimate  estimate the monthly tail-risk series from an option chain
  returns        build excess bond returns, yield PCs and the CP factor
  predict-is     in-sample predictive regressions (table2.csv)
  predict-oos    out-of-sample forecast evaluation (table3.csv)
  portfolio      mean-variance backtest economic value (table_econ.csv)
  atsm           affine term-structure estimation (params, panels, tables 5-7)
  three-pass     latent-factor risk premium of the tail series (table8.csv)
  report         render SVG figures from previously written artifacts

common flags
  --config PATH    run configuration file (flat key = value lines)
  --out-dir PATH   artifact directory (default: out)
  --seed N         override the configured RNG seed
  --threads N      worker threads for bootstrap loops (default: 1)

input flags
  tail-estimate    --options PATH --rates PATH --atm-iv PATH [--truth PATH]
  returns          --yields PATH | --nss PATH
  predict-is/oos,  --yields PATH | --nss PATH, plus --tail PATH
  portfolio, atsm,
  three-pass

environment
  TRB_CONFIG, TRB_OUT_DIR, TRB_SEED and TRB_THREADS supply defaults for the
  matching flags; an explicit flag always wins.

Every run writes manifest.json (config hash, seed, input digests) next to its
artifacts.  Exit status: 0 success, 2 validation error, 3 numerical failure.
)";

// ---------------------------------------------------------------------------
// Argument parsing
// ---------------------------------------------------------------------------

struct CommandSpec {
    const char* name;
    bool needs_curve;                    ///< exactly one of --yields/--nss
    bool needs_tail;                     ///< --tail required
    std::vector<std::string> required;   ///< other required input flags
    std::vector<std::string> optional;   ///< other accepted input flags
};

const std::vector<CommandSpec>& command_specs() {
    static const std::vector<CommandSpec> specs = {
        {"synth", false, false, {}, {}},
        {"tail-estimate", false, false, {"options", "rates", "atm-iv"}, {"truth"}},
        {"returns", true, false, {}, {}},
        {"predict-is", true, true, {}, {}},
        {"predict-oos", true, true, {}, {}},
        {"portfolio", true, true, {}, {}},
        {"atsm", true, true, {}, {}},
        {"three-pass", true, true, {}, {}},
        {"report", false, false, {}, {}},
    };
    return specs;
}

struct CliArgs {
    std::string command;
    std::string config_path; ///< empty = built-in defaults
    fs::path out_dir = "out";
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::map<std::string, fs::path> inputs;
    bool help = false;
};

std::uint64_t parse_uint(const std::string& text, const std::string& what) {
    try {
        std::size_t pos = 0;
        const unsigned long long v = std::stoull(text, &pos);
        if (pos != text.size()) throw std::invalid_argument(text);
        return static_cast<std::uint64_t>(v);
    } catch (const std::exception&) {
        throw ValidationError(what + " must be a non-negative integer, got '" + text + "'");
    }
}

CliArgs parse_args(int argc, char** argv) {
    CliArgs args;
    if (argc < 2) throw ValidationError("missing command; run 'trb --help' for usage");
    args.command = argv[1];
    if (args.command == "--help" || args.command == "-h" || args.command == "help") {
        args.help = true;
        return args;
    }
    const CommandSpec* spec = nullptr;
    for (const auto& s : command_specs())
        if (args.command == s.name) spec = &s;
    if (spec == nullptr) throw ValidationError("unknown command '" + args.command + "'");

    std::set<std::string> accepted(spec->required.begin(), spec->required.end());
    accepted.insert(spec->optional.begin(), spec->optional.end());
    if (spec->needs_curve) {
        accepted.insert("yields");
        accepted.insert("nss");
    }
    if (spec->needs_tail) accepted.insert("tail");

    bool out_dir_set = false;
    for (int i = 2; i < argc; ++i) {
        const std::string flag = argv[i];
        if (flag == "--help" || flag == "-h") {
            args.help = true;
            return args;
        }
        if (flag.rfind("--", 0) != 0)
            throw ValidationError("unexpected argument '" + flag + "'");
        const std::string name = flag.substr(2);
        if (++i >= argc) throw ValidationError("flag --" + name + " needs a value");
        const std::string value = argv[i];
        if (name == "config") {
            args.config_path = value;
        } else if (name == "out-dir") {
            args.out_dir = value;
            out_dir_set = true;
        } else if (name == "seed") {
            args.seed = parse_uint(value, "--seed");
        } else if (name == "threads") {
            const auto t = parse_uint(value, "--threads");
            if (t < 1) throw ValidationError("--threads must be >= 1");
            args.threads = static_cast<int>(t);
        } else if (accepted.count(name) != 0) {
            args.inputs[name] = value;
        } else {
            throw ValidationError("unknown flag '--" + name + "' for command '" + args.command +
                                  "'");
        }
    }

    // Environment defaults, overridden by explicit flags.
    if (const char* e = std::getenv("TRB_CONFIG"); e != nullptr && args.config_path.empty())
        args.config_path = e;
    if (const char* e = std::getenv("TRB_OUT_DIR"); e != nullptr && !out_dir_set)
        args.out_dir = e;
    if (const char* e = std::getenv("TRB_SEED"); e != nullptr && !args.seed)
        args.seed = parse_uint(e, "TRB_SEED");
    if (const char* e = std::getenv("TRB_THREADS"); e != nullptr && !args.threads) {
        const auto t = parse_uint(e, "TRB_THREADS");
        if (t < 1) throw ValidationError("TRB_THREADS must be >= 1");
        args.threads = static_cast<int>(t);
    }

    for (const auto& need : spec->required)
        if (args.inputs.count(need) == 0)
            throw ValidationError("command '" + args.command + "' requires --" + need);
    if (spec->needs_curve) {
        const bool has_y = args.inputs.count("yields") != 0;
        const bool has_n = args.inputs.count("nss") != 0;
        if (has_y == has_n)
            throw ValidationError("command '" + args.command +
                                  "' requires exactly one of --yields or --nss");
    }
    if (spec->needs_tail && args.inputs.count("tail") == 0)
        throw ValidationError("command '" + args.command + "' requires --tail");
    for (const auto& [name, path] : args.inputs)
        if (!fs::exists(path))
            throw ValidationError("input --" + name + " does not exist: " + path.string());
    return args;
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

std::string fnv1a_hex(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot read file for digest: " + path.string());
    std::uint64_t h = 1469598103934665603ULL;
    char buf[65536];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        const std::streamsize got = in.gcount();
        for (std::streamsize i = 0; i < got; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ULL;
        }
    }
    char out[17];
    std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(h));
    return out;
}

std::string json_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (const char c : s) {
        if (c == '"' || c == '\\') {
            out.push_back('\\');
            out.push_back(c);
        } else if (static_cast<unsigned char>(c) < 0x20) {
            char buf[8];
            std::snprintf(buf, sizeof buf, "\\u%04x", c);
            out += buf;
        } else {
            out.push_back(c);
        }
    }
    return out;
}

struct Ctx {
    CliArgs args;
    RunConfig cfg;
    int threads = 1;
    fs::path out;
    std::vector<std::string> outputs;
    std::vector<std::string> warnings;

    [[nodiscard]] fs::path input(const std::string& flag) const { return args.inputs.at(flag); }
    [[nodiscard]] bool has_input(const std::string& flag) const {
        return args.inputs.count(flag) != 0;
    }
    /// Register an artifact name and return its full path.
    fs::path artifact(const std::string& name) {
        outputs.push_back(name);
        return out / name;
    }
};

void write_manifest(const Ctx& ctx) {
    std::ofstream out(ctx.out / "manifest.json", std::ios::binary);
    if (!out) throw ValidationError("cannot write manifest in " + ctx.out.string());
    out << "{\n";
    out << "  \"command\": \"" << json_escape(ctx.args.command) << "\",\n";
    out << "  \"config\": {\"path\": \"" << json_escape(ctx.args.config_path)
        << "\", \"hash\": \""
        << (ctx.args.config_path.empty() ? std::string("defaults")
                                         : fnv1a_hex(ctx.args.config_path))
        << "\"},\n";
    out << "  \"seed\": " << ctx.cfg.seed << ",\n";
    out << "  \"threads\": " << ctx.threads << ",\n";
    out << "  \"inputs\": [";
    bool first = true;
    for (const auto& [flag, path] : ctx.args.inputs) {
        out << (first ? "\n" : ",\n");
        first = false;
        out << "    {\"flag\": \"" << json_escape(flag) << "\", \"path\": \""
            << json_escape(path.string()) << "\", \"digest\": \"" << fnv1a_hex(path) << "\"}";
    }
    out << (first ? "]" : "\n  ]") << ",\n";
    out << "  \"outputs\": [";
    first = true;
    for (const auto& name : ctx.outputs) {
        out << (first ? "" : ", ") << "\"" << json_escape(name) << "\"";
        first = false;
    }
    out << "]\n}\n";
}

// ---------------------------------------------------------------------------
// Input loading
// ---------------------------------------------------------------------------

std::vector<int> all_months_to(int n_max) {
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(n_max));
    for (int n = 1; n <= n_max; ++n) out.push_back(n);
    return out;
}

/// Keep the last row of each calendar month inside [first, last]; analysis
/// commands run on month-end panels even when the file carries daily rows.
curve::YieldPanel window_panel(const curve::YieldPanel& panel, const Date& first,
                               const Date& last) {
    std::vector<Eigen::Index> keep;
    for (std::size_t i = 0; i < panel.dates.size(); ++i) {
        const Date& d = panel.dates[i];
        if (d < first || last < d) continue;
        const bool last_of_month = i + 1 == panel.dates.size() ||
                                   panel.dates[i + 1].month_key() != d.month_key() ||
                                   last < panel.dates[i + 1];
        if (last_of_month) keep.push_back(static_cast<Eigen::Index>(i));
    }
    if (keep.empty())
        throw ValidationError("yield panel has no rows inside the sample window " + first.str() +
                              " .. " + last.str());
    curve::YieldPanel out;
    out.maturities_months = panel.maturities_months;
    out.yields.resize(static_cast<Eigen::Index>(keep.size()), panel.yields.cols());
    out.dates.reserve(keep.size());
    for (std::size_t r = 0; r < keep.size(); ++r) {
        out.dates.push_back(panel.dates[static_cast<std::size_t>(keep[r])]);
        out.yields.row(static_cast<Eigen::Index>(r)) = panel.yields.row(keep[r]);
    }
    return out;
}

curve::YieldPanel load_curve_panel(const Ctx& ctx) {
    curve::YieldPanel panel;
    if (ctx.has_input("nss")) {
        const auto path = curve::load_nss_params(ctx.input("nss"));
        panel = curve::panel_from_nss(path, all_months_to(120));
    } else {
        panel = curve::load_panel(ctx.input("yields"));
    }
    return window_panel(panel, ctx.cfg.sample_start, ctx.cfg.sample_end);
}

Series load_target_series(const Ctx& ctx) {
    const fs::path path = ctx.input("tail");
    const auto table = csv::read_file(path);
    const bool has_tr = table.col_optional("tr") != csv::Table::npos;
    Series s = Series::from_csv(path, has_tr ? "tr" : "");
    s = s.window(ctx.cfg.sample_start, ctx.cfg.sample_end);
    if (s.empty())
        throw ValidationError(path.string() + ": no observations inside the sample window");
    s.set_name("tr");
    return s;
}

Series column_series(const std::vector<Date>& dates, const Eigen::MatrixXd& m, Eigen::Index j,
                     std::string name) {
    std::vector<double> v(static_cast<std::size_t>(m.rows()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) v[static_cast<std::size_t>(i)] = m(i, j);
    return Series(dates, v, std::move(name));
}

/// Tail series aligned month-by-month to the given stamps; months without a
/// value are an error naming the gaps.
Eigen::RowVectorXd align_to_months(const Series& s, const std::vector<Date>& stamps,
                                   const std::string& what) {
    Eigen::RowVectorXd out(static_cast<Eigen::Index>(stamps.size()));
    std::string missing;
    for (std::size_t i = 0; i < stamps.size(); ++i) {
        if (auto v = s.in_month(stamps[i])) {
            out(static_cast<Eigen::Index>(i)) = *v;
        } else {
            if (!missing.empty()) missing += ", ";
            missing += stamps[i].str().substr(0, 7);
        }
    }
    if (!missing.empty())
        throw ValidationError(what + ": tail series has no value in months: " + missing);
    return out;
}

// ---------------------------------------------------------------------------
// SVG rendering
// ---------------------------------------------------------------------------

struct SvgSeries {
    std::string label;
    std::string color;
    std::vector<double> x;
    std::vector<double> y;
};

struct SvgBand {
    double x0 = 0.0;
    double x1 = 0.0;
};

const char* palette(std::size_t i) {
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c",
                                   "#9467bd", "#ff7f0e", "#8c564b"};
    return colors[i % 6];
}

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::string px(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

/// Standalone line/band chart.  The raw data rides along in a leading XML
/// comment so every figure is self-describing.
void write_svg_lines(const fs::path& path, const std::string& title,
                     const std::vector<SvgSeries>& series, const std::vector<SvgBand>& bands,
                     bool x_is_date) {
    double xmin = 0.0, xmax = 1.0, ymin = 0.0, ymax = 1.0;
    bool seen = false;
    for (const auto& s : series) {
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!seen) {
                xmin = xmax = s.x[i];
                ymin = ymax = s.y[i];
                seen = true;
            }
            xmin = std::min(xmin, s.x[i]);
            xmax = std::max(xmax, s.x[i]);
            ymin = std::min(ymin, s.y[i]);
            ymax = std::max(ymax, s.y[i]);
        }
    }
    if (!seen) throw ValidationError("figure '" + title + "' has no data points");
    if (xmax == xmin) xmax = xmin + 1.0;
    if (ymax == ymin) {
        ymax += 0.5;
        ymin -= 0.5;
    }
    const double ypad = 0.05 * (ymax - ymin);
    ymin -= ypad;
    ymax += ypad;

    const double left = 70.0, right = 930.0, top = 50.0, bottom = 430.0;
    const auto sx = [&](double v) { return left + (v - xmin) / (xmax - xmin) * (right - left); };
    const auto sy = [&](double v) { return bottom - (v - ymin) / (ymax - ymin) * (bottom - top); };

    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write figure: " + path.string());
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"960\" height=\"480\" "
           "viewBox=\"0 0 960 480\">\n";
    out << "<!-- data\nseries,x,y\n";
    for (const auto& s : series)
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            const std::string xs = x_is_date
                                       ? Date::from_serial(static_cast<std::int64_t>(s.x[i])).str()
                                       : csv::format_double(s.x[i]);
            out << s.label << "," << xs << "," << csv::format_double(s.y[i]) << "\n";
        }
    out << "-->\n";
    out << "<rect width=\"960\" height=\"480\" fill=\"white\"/>\n";
    for (const auto& b : bands) {
        const double x0 = std::max(xmin, b.x0);
        const double x1 = std::min(xmax, b.x1);
        if (!(x1 > x0)) continue;
        out << "<rect x=\"" << px(sx(x0)) << "\" y=\"" << px(top) << "\" width=\""
            << px(sx(x1) - sx(x0)) << "\" height=\"" << px(bottom - top)
            << "\" fill=\"#c8c8c8\" fill-opacity=\"0.5\"/>\n";
    }
    out << "<text x=\"480\" y=\"28\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"17\">"
        << title << "</text>\n";
    // Axes and ticks.
    out << "<line x1=\"" << px(left) << "\" y1=\"" << px(bottom) << "\" x2=\"" << px(right)
        << "\" y2=\"" << px(bottom) << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << px(left) << "\" y1=\"" << px(top) << "\" x2=\"" << px(left)
        << "\" y2=\"" << px(bottom) << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 5; ++i) {
        const double xv = xmin + (xmax - xmin) * i / 5.0;
        const double yv = ymin + (ymax - ymin) * i / 5.0;
        out << "<line x1=\"" << px(sx(xv)) << "\" y1=\"" << px(bottom) << "\" x2=\"" << px(sx(xv))
            << "\" y2=\"" << px(bottom + 5) << "\" stroke=\"black\"/>\n";
        const std::string xlabel =
            x_is_date ? Date::from_serial(static_cast<std::int64_t>(xv)).str().substr(0, 7)
                      : num(xv);
        out << "<text x=\"" << px(sx(xv)) << "\" y=\"" << px(bottom + 20)
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << xlabel
            << "</text>\n";
        out << "<line x1=\"" << px(left - 5) << "\" y1=\"" << px(sy(yv)) << "\" x2=\"" << px(left)
            << "\" y2=\"" << px(sy(yv)) << "\" stroke=\"black\"/>\n";
        out << "<text x=\"" << px(left - 8) << "\" y=\"" << px(sy(yv) + 4)
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\">" << num(yv)
            << "</text>\n";
    }
    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        if (s.x.empty()) continue;
        out << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (i != 0) out << " ";
            out << px(sx(s.x[i])) << "," << px(sy(s.y[i]));
        }
        out << "\"/>\n";
        out << "<text x=\"" << px(right - 8) << "\" y=\"" << px(top + 16.0 * (double(k) + 1.0))
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"13\" fill=\""
            << s.color << "\">" << s.label << "</text>\n";
    }
    out << "</svg>\n";
}

/// Standalone bar chart over integer categories (bond maturities).
void write_svg_bars(const fs::path& path, const std::string& title,
                    const std::vector<int>& categories, const std::vector<double>& values) {
    if (categories.empty() || categories.size() != values.size())
        throw ValidationError("figure '" + title + "' has no bars");
    double ymin = 0.0, ymax = 0.0;
    for (const double v : values) {
        ymin = std::min(ymin, v);
        ymax = std::max(ymax, v);
    }
    if (ymax == ymin) {
        ymax += 0.5;
        ymin -= 0.5;
    }
    const double pad = 0.08 * (ymax - ymin);
    ymax += pad;
    ymin -= pad;
    const double left = 70.0, right = 930.0, top = 50.0, bottom = 430.0;
    const double slot = (right - left) / static_cast<double>(categories.size());
    const auto sy = [&](double v) { return bottom - (v - ymin) / (ymax - ymin) * (bottom - top); };

    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write figure: " + path.string());
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"960\" height=\"480\" "
           "viewBox=\"0 0 960 480\">\n";
    out << "<!-- data\nmaturity,value\n";
    for (std::size_t i = 0; i < categories.size(); ++i)
        out << categories[i] << "," << csv::format_double(values[i]) << "\n";
    out << "-->\n";
    out << "<rect width=\"960\" height=\"480\" fill=\"white\"/>\n";
    out << "<text x=\"480\" y=\"28\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"17\">"
        << title << "</text>\n";
    out << "<line x1=\"" << px(left) << "\" y1=\"" << px(sy(0.0)) << "\" x2=\"" << px(right)
        << "\" y2=\"" << px(sy(0.0)) << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << px(left) << "\" y1=\"" << px(top) << "\" x2=\"" << px(left)
        << "\" y2=\"" << px(bottom) << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 5; ++i) {
        const double yv = ymin + (ymax - ymin) * i / 5.0;
        out << "<text x=\"" << px(left - 8) << "\" y=\"" << px(sy(yv) + 4)
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\">" << num(yv)
            << "</text>\n";
    }
    for (std::size_t i = 0; i < categories.size(); ++i) {
        const double x0 = left + slot * (static_cast<double>(i) + 0.15);
        const double v = values[i];
        const double y0 = std::min(sy(v), sy(0.0));
        const double h = std::abs(sy(v) - sy(0.0));
        out << "<rect x=\"" << px(x0) << "\" y=\"" << px(y0) << "\" width=\"" << px(slot * 0.7)
            << "\" height=\"" << px(h) << "\" fill=\"#1f77b4\"/>\n";
        out << "<text x=\"" << px(x0 + slot * 0.35) << "\" y=\"" << px(bottom + 20)
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
            << categories[i] << "</text>\n";
    }
    out << "</svg>\n";
}

/// Months in which US output was contracting; used only to shade charts.
const std::vector<std::pair<Date, Date>>& contraction_bands() {
    static const std::vector<std::pair<Date, Date>> bands = {
        {{1990, 7, 1}, {1991, 3, 31}},
        {{2001, 3, 1}, {2001, 11, 30}},
        {{2007, 12, 1}, {2009, 6, 30}},
        {{2020, 2, 1}, {2020, 4, 30}},
    };
    return bands;
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

void cmd_synth(Ctx& ctx) {
    synthlab::TailGeneratorSpec tspec;
    tspec.seed = ctx.cfg.seed;
    const auto tail = synthlab::gen_tail_options(tspec);
    tail.write(ctx.out);
    ctx.outputs.insert(ctx.outputs.end(), {"options.csv", "atm_iv.csv", "rates.csv"});
    {
        csv::Writer w(ctx.artifact("truth.csv"));
        w.write_row({"parameter", "value"});
        w.write_row({"alpha", csv::format_double(tspec.alpha)});
        w.write_row({"phi", csv::format_double(tspec.phi)});
        w.close();
    }

    auto bspec = synthlab::AtsmGeneratorSpec::standard(6, 20, 360, ctx.cfg.seed + 1);
    bspec.yield_maturities = all_months_to(120);
    const auto bond = synthlab::gen_atsm_panel(bspec);
    bond.write(ctx.out);
    ctx.outputs.insert(ctx.outputs.end(), {"yields.csv", "states.csv", "returns.csv"});

    // A companion monthly tail-risk series that is an affine image of the
    // first state factor, so the bond commands have a predictor that the
    // generated curve actually prices.
    std::vector<double> tr(static_cast<std::size_t>(bond.X.rows()));
    for (Eigen::Index i = 0; i < bond.X.rows(); ++i)
        tr[static_cast<std::size_t>(i)] = 0.12 + 0.03 * bond.X(i, 0);
    Series tr_series(bond.dates, tr, "tr");
    tr_series.to_csv(ctx.artifact("tr.csv"));

    std::printf("synth: wrote %zu option rows over %d days and a %d-month x %zu-maturity "
                "yield panel to %s\n",
                tail.options.size(), tspec.n_days, bspec.T, bspec.yield_maturities.size(),
                ctx.out.string().c_str());
}

void cmd_tail_estimate(Ctx& ctx) {
    ingest::LoadReport report;
    const auto chains = ingest::load_option_chain(ctx.input("options"), &report);
    const Series rates = Series::from_csv(ctx.input("rates"));
    const Series atm = Series::from_csv(ctx.input("atm-iv"));
    const auto prepared = ingest::prepare_chains(chains, rates, atm, &ctx.warnings);
    const auto daily = tailrisk::estimate_daily_params(prepared, atm, &ctx.warnings);
    auto series = tailrisk::build_tail_series(daily, ctx.cfg.tail_sampling, &ctx.warnings);
    std::erase_if(series.observations, [&](const tailrisk::TailObservation& o) {
        return o.date < ctx.cfg.sample_start || ctx.cfg.sample_end < o.date;
    });
    if (series.observations.empty())
        throw ValidationError("tail-estimate: no monthly observations inside the sample window");
    tailrisk::write_series(series, ctx.artifact("tail_series.csv"));
    std::printf("tail-estimate: %zu monthly observations, %s .. %s\n",
                series.observations.size(), series.observations.front().date.str().c_str(),
                series.observations.back().date.str().c_str());

    // Recovery report against generator truth, when available.
    fs::path truth_path;
    if (ctx.has_input("truth")) {
        truth_path = ctx.input("truth");
    } else {
        const fs::path side = ctx.input("options").parent_path() / "truth.csv";
        if (fs::exists(side)) truth_path = side;
    }
    if (!truth_path.empty()) {
        const auto table = csv::read_file(truth_path);
        const std::size_t cp = table.col("parameter");
        const std::size_t cv = table.col("value");
        double alpha_true = 0.0, phi_true = 0.0;
        bool have_alpha = false, have_phi = false;
        for (const auto& r : table.rows) {
            if (r.fields[cp] == "alpha") {
                alpha_true = csv::to_double(table, r, cv);
                have_alpha = true;
            } else if (r.fields[cp] == "phi") {
                phi_true = csv::to_double(table, r, cv);
                have_phi = true;
            }
        }
        if (!have_alpha || !have_phi)
            throw ValidationError(truth_path.string() + ": needs 'alpha' and 'phi' rows");
        double alpha_err = 0.0, phi_err = 0.0;
        for (const auto& o : series.observations) {
            alpha_err = std::max(alpha_err, std::abs(o.alpha - alpha_true));
            phi_err = std::max(phi_err, std::abs(o.phi - phi_true));
        }
        const double overall = std::max(alpha_err, phi_err);
        csv::Writer w(ctx.artifact("recovery.csv"));
        w.write_row({"parameter", "true_value", "max_abs_error"});
        w.write_row({"alpha", csv::format_double(alpha_true), csv::format_double(alpha_err)});
        w.write_row({"phi", csv::format_double(phi_true), csv::format_double(phi_err)});
        w.write_row({"all", "", csv::format_double(overall)});
        w.close();
        std::printf("recovery vs %s: max abs alpha error = %s, max abs phi error = %s\n",
                    truth_path.string().c_str(), csv::format_double(alpha_err).c_str(),
                    csv::format_double(phi_err).c_str());
        std::printf("recovery: max abs parameter error = %s\n",
                    csv::format_double(overall).c_str());
    }
}

void cmd_returns(Ctx& ctx) {
    const auto panel = load_curve_panel(ctx);
    const auto rx = curve::excess_returns(panel, ctx.cfg.maturities_months);
    curve::write_returns(rx, ctx.artifact("returns.csv"));

    const auto pcs = curve::pca(panel, 5);
    {
        csv::Writer w(ctx.artifact("pcs.csv"));
        w.write_row({"date", "pc1", "pc2", "pc3", "pc4", "pc5"});
        for (std::size_t i = 0; i < panel.dates.size(); ++i) {
            std::vector<std::string> row{panel.dates[i].str()};
            for (Eigen::Index j = 0; j < 5; ++j)
                row.push_back(csv::format_double(pcs.scores(static_cast<Eigen::Index>(i), j)));
            w.write_row(row);
        }
        w.close();
    }

    auto cp = curve::cp_factor(panel, rx);
    Series factor = cp.factor;
    factor.set_name("");
    factor.to_csv(ctx.artifact("cp_factor.csv"));
    std::printf("returns: %zu months, %zu maturities, cp R^2 = %s\n", rx.dates.size(),
                rx.maturities_months.size(), csv::format_double(cp.r2).c_str());
}

/// Shared header for the maturity-column tables.
std::vector<std::string> maturity_header(const std::vector<std::string>& labels,
                                         const std::vector<int>& maturities) {
    std::vector<std::string> head = labels;
    for (const int m : maturities) head.push_back("m" + std::to_string(m));
    return head;
}

std::vector<std::string> stat_row(const std::vector<std::string>& labels,
                                  const std::vector<double>& values) {
    std::vector<std::string> row = labels;
    for (const double v : values) row.push_back(csv::format_double(v));
    return row;
}

void cmd_predict_is(Ctx& ctx) {
    const auto panel = load_curve_panel(ctx);
    const Series tr = load_target_series(ctx);
    const auto& mats = ctx.cfg.maturities_months;

    auto rx = curve::excess_returns(panel, mats);
    const auto cp = curve::cp_factor(panel, rx);
    rx.returns *= 1200.0; // report slopes against annualized percent returns

    const auto pcs = curve::pca(panel, 5);
    std::vector<Series> pc_series;
    for (Eigen::Index j = 0; j < 5; ++j)
        pc_series.push_back(curve::standardize(
            column_series(panel.dates, pcs.scores, j, "pc" + std::to_string(j + 1))));

    predict::PredictorSet base;
    base.target_name = "tr";
    base.target = curve::standardize(tr);

    struct Panel {
        std::string name;
        std::vector<std::pair<std::string, Series>> controls;
        std::optional<predict::ModelKind> kind; ///< set when a bootstrap p-value applies
    };
    std::vector<Panel> panels;
    panels.push_back({"univ", {}, predict::ModelKind::univ});
    panels.push_back({"pc3",
                      {{"pc1", pc_series[0]}, {"pc2", pc_series[1]}, {"pc3", pc_series[2]}},
                      predict::ModelKind::pc3});
    panels.push_back({"pc5",
                      {{"pc1", pc_series[0]},
                       {"pc2", pc_series[1]},
                       {"pc3", pc_series[2]},
                       {"pc4", pc_series[3]},
                       {"pc5", pc_series[4]}},
                      predict::ModelKind::pc5});
    panels.push_back({"cp", {{"cp", curve::standardize(cp.factor)}}, std::nullopt});

    csv::Writer w(ctx.artifact("table2.csv"));
    w.write_row(maturity_header({"panel", "factor", "statistic"}, mats));
    for (const auto& p : panels) {
        predict::PredictorSet pset = base;
        pset.controls = p.controls;
        const auto regs = predict::predictive_regression(rx, pset, ctx.cfg.nw_lags);

        std::vector<double> beta, p_nw, adj, adj_no, f_p;
        std::vector<std::vector<double>> ctl_beta(p.controls.size()),
            ctl_p(p.controls.size());
        for (const auto& r : regs) {
            beta.push_back(r.full.coefficients(1));
            p_nw.push_back(r.full.p_values(1));
            adj.push_back(100.0 * r.full.adj_r2);
            adj_no.push_back(100.0 * r.restricted.adj_r2);
            f_p.push_back(r.f_p);
            for (std::size_t c = 0; c < p.controls.size(); ++c) {
                ctl_beta[c].push_back(r.full.coefficients(2 + static_cast<Eigen::Index>(c)));
                ctl_p[c].push_back(r.full.p_values(2 + static_cast<Eigen::Index>(c)));
            }
        }
        w.write_row(stat_row({p.name, "tr", "beta"}, beta));
        w.write_row(stat_row({p.name, "tr", "p_nw"}, p_nw));
        if (p.kind) {
            const auto bh = predict::bh_bootstrap(panel, tr, *p.kind, mats,
                                                  predict::BhStat::coef_t, ctx.cfg.window,
                                                  ctx.cfg.oos_split, ctx.cfg.bootstrap_reps,
                                                  ctx.cfg.seed, ctx.cfg.nw_lags, ctx.threads,
                                                  &ctx.warnings);
            w.write_row(stat_row({p.name, "tr", "p_boot"}, bh.p_boot));
        }
        for (std::size_t c = 0; c < p.controls.size(); ++c) {
            w.write_row(stat_row({p.name, p.controls[c].first, "beta"}, ctl_beta[c]));
            w.write_row(stat_row({p.name, p.controls[c].first, "p_nw"}, ctl_p[c]));
        }
        w.write_row(stat_row({p.name, "", "adj_r2_pct"}, adj));
        w.write_row(stat_row({p.name, "", "adj_r2_pct_no_tr"}, adj_no));
        w.write_row(stat_row({p.name, "", "f_p"}, f_p));
    }
    w.close();
    std::printf("predict-is: table2.csv for %zu maturities over %zu months\n", mats.size(),
                panel.dates.size());
}

void cmd_predict_oos(Ctx& ctx) {
    const auto panel = load_curve_panel(ctx);
    const Series tr = load_target_series(ctx);
    const auto& mats = ctx.cfg.maturities_months;

    const std::vector<std::pair<std::string, predict::ModelKind>> kinds = {
        {"eh", predict::ModelKind::univ},
        {"pc3", predict::ModelKind::pc3},
        {"pc5", predict::ModelKind::pc5},
    };
    const std::vector<std::pair<std::string, WindowPolicy>> windows = {
        {"expanding", WindowPolicy::expanding},
        {"rolling", WindowPolicy::rolling},
    };

    csv::Writer w(ctx.artifact("table3.csv"));
    w.write_row(maturity_header({"panel", "window", "statistic"}, mats));
    std::uint64_t seed_step = 0;
    for (const auto& [kname, kind] : kinds) {
        for (const auto& [wname, wpol] : windows) {
            const auto oos =
                predict::oos_forecast_pc(panel, tr, kind, mats, wpol, ctx.cfg.oos_split);
            std::vector<double> r2pct, cwp;
            for (const auto& o : oos) {
                r2pct.push_back(100.0 * predict::r2_os(o.model, o.benchmark, o.realized));
                cwp.push_back(
                    predict::clark_west(o.model, o.benchmark, o.realized, ctx.cfg.nw_lags).p);
            }
            const auto bh_cw = predict::bh_bootstrap(
                panel, tr, kind, mats, predict::BhStat::cw, wpol, ctx.cfg.oos_split,
                ctx.cfg.bootstrap_reps, ctx.cfg.seed + seed_step, ctx.cfg.nw_lags, ctx.threads,
                &ctx.warnings);
            const auto bh_r2 = predict::bh_bootstrap(
                panel, tr, kind, mats, predict::BhStat::r2_os, wpol, ctx.cfg.oos_split,
                ctx.cfg.bootstrap_reps, ctx.cfg.seed + seed_step + 1, ctx.cfg.nw_lags,
                ctx.threads, &ctx.warnings);
            seed_step += 2;
            w.write_row(stat_row({kname, wname, "r2_os_pct"}, r2pct));
            w.write_row(stat_row({kname, wname, "cw_p"}, cwp));
            w.write_row(stat_row({kname, wname, "cw_p_boot"}, bh_cw.p_boot));
            w.write_row(stat_row({kname, wname, "r2os_p_boot"}, bh_r2.p_boot));
        }
    }
    w.close();
    std::printf("predict-oos: table3.csv, split %s, B = %d\n", ctx.cfg.oos_split.str().c_str(),
                ctx.cfg.bootstrap_reps);
}

void cmd_portfolio(Ctx& ctx) {
    const auto panel = load_curve_panel(ctx);
    const Series tr = load_target_series(ctx);
    const auto& mats = ctx.cfg.maturities_months;

    const auto rx = curve::excess_returns(panel, mats);
    const Series y1m = column_series(panel.dates, panel.yields,
                                     static_cast<Eigen::Index>(panel.col_of(1)), "y1m");

    std::vector<double> gammas{3.0, ctx.cfg.gamma};
    std::sort(gammas.begin(), gammas.end());
    gammas.erase(std::unique(gammas.begin(), gammas.end()), gammas.end());

    const std::vector<std::pair<std::string, predict::ModelKind>> kinds = {
        {"eh", predict::ModelKind::univ},
        {"pc3", predict::ModelKind::pc3},
        {"pc5", predict::ModelKind::pc5},
    };

    csv::Writer w(ctx.artifact("table_econ.csv"));
    w.write_row(maturity_header({"panel", "gamma", "statistic"}, mats));
    for (const auto& [kname, kind] : kinds) {
        const auto oos =
            predict::oos_forecast_pc(panel, tr, kind, mats, ctx.cfg.window, ctx.cfg.oos_split);
        for (const double gamma : gammas) {
            std::vector<double> delta, theta;
            for (std::size_t j = 0; j < oos.size(); ++j) {
                const auto& o = oos[j];
                const Series realized = column_series(
                    rx.dates, rx.returns, static_cast<Eigen::Index>(rx.col_of(o.maturity_months)),
                    "rx");
                std::vector<double> mv(o.model.data(), o.model.data() + o.model.size());
                std::vector<double> bv(o.benchmark.data(),
                                       o.benchmark.data() + o.benchmark.size());
                const Series model_f(o.dates, mv, "model");
                const Series bench_f(o.dates, bv, "bench");
                const auto bt_m =
                    portfolio::backtest(model_f, realized, y1m, gamma, ctx.cfg.weight_low,
                                        ctx.cfg.weight_high, 120, &ctx.warnings);
                const auto bt_b =
                    portfolio::backtest(bench_f, realized, y1m, gamma, ctx.cfg.weight_low,
                                        ctx.cfg.weight_high, 120, &ctx.warnings);
                delta.push_back(portfolio::cer_gain(bt_m, bt_b));
                theta.push_back(portfolio::mpp_theta(bt_m.returns, bt_b.returns, y1m, gamma));
            }
            const std::string g = csv::format_double(gamma);
            w.write_row(stat_row({kname, g, "delta_pct"}, delta));
            w.write_row(stat_row({kname, g, "theta_pct"}, theta));
        }
    }
    w.close();
    std::printf("portfolio: table_econ.csv for %zu maturities, %zu risk aversions\n", mats.size(),
                gammas.size());
}

void write_dated_panel(const fs::path& path, const std::vector<Date>& dates,
                       const std::vector<int>& maturities, const Eigen::MatrixXd& values) {
    csv::Writer w(path);
    std::vector<std::string> head{"date"};
    for (const int m : maturities) head.push_back("m" + std::to_string(m));
    w.write_row(head);
    for (std::size_t i = 0; i < dates.size(); ++i) {
        std::vector<std::string> row{dates[i].str()};
        for (Eigen::Index j = 0; j < values.cols(); ++j)
            row.push_back(csv::format_double(values(static_cast<Eigen::Index>(i), j)));
        w.write_row(row);
    }
    w.close();
}

void cmd_atsm(Ctx& ctx) {
    const auto panel = load_curve_panel(ctx);
    const Series tr = load_target_series(ctx);

    atsm::EstimateOptions opts;
    opts.bootstrap_reps = ctx.cfg.bootstrap_reps;
    opts.seed = ctx.cfg.seed;
    opts.threads = ctx.threads;
    const auto res = atsm::estimate(tr, panel, opts, &ctx.warnings);
    atsm::EstimateOptions pc_opts = opts;
    pc_opts.include_tail = false;
    const auto bench = atsm::estimate(tr, panel, pc_opts, &ctx.warnings);

    const auto& model = res.fit.model;
    const auto& names = res.fit.state.names;
    const int K = model.K;

    { // Long-form parameter dump: factor rows, columns named by the header.
        csv::Writer w(ctx.artifact("atsm_params.csv"));
        w.write_row({"parameter", "factor", "col", "value"});
        const auto emit_vector = [&](const std::string& param, const Eigen::VectorXd& v) {
            for (int i = 0; i < K; ++i)
                w.write_row({param, names[static_cast<std::size_t>(i)], "",
                             csv::format_double(v(i))});
        };
        const auto emit_matrix = [&](const std::string& param, const Eigen::MatrixXd& m) {
            for (int i = 0; i < K; ++i)
                for (int j = 0; j < K; ++j)
                    w.write_row({param, names[static_cast<std::size_t>(i)],
                                 names[static_cast<std::size_t>(j)],
                                 csv::format_double(m(i, j))});
        };
        emit_vector("mu", model.mu);
        emit_matrix("phi", model.phi);
        emit_matrix("sigma", model.sigma);
        emit_vector("lambda0", model.lambda0);
        emit_matrix("lambda1", model.lambda1);
        w.write_row({"delta0", "", "", csv::format_double(model.delta0)});
        emit_vector("delta1", model.delta1);
        w.write_row({"sigma2", "", "", csv::format_double(model.sigma2)});
        w.close();
    }

    write_dated_panel(ctx.artifact("fitted_yields.csv"), res.fit.dates, res.fit.maturities,
                      res.fit.fitted_yields);
    write_dated_panel(ctx.artifact("term_premia.csv"), res.fit.dates, res.fit.maturities,
                      res.fit.term_premia);

    { // Yield loadings -12 b_n / n per factor, for the bar figure.
        csv::Writer w(ctx.artifact("loadings.csv"));
        std::vector<std::string> head{"maturity"};
        head.insert(head.end(), names.begin(), names.end());
        w.write_row(head);
        for (const int n : res.fit.maturities) {
            std::vector<std::string> row{std::to_string(n)};
            for (int i = 0; i < K; ++i)
                row.push_back(csv::format_double(-12.0 * model.b(n - 1, i) / n));
            w.write_row(row);
        }
        w.close();
    }

    for (int i = 0; i < K; ++i) {
        const auto contrib = atsm::factor_contribution(res.fit, i);
        write_dated_panel(ctx.artifact("contributions_" + names[static_cast<std::size_t>(i)] +
                                       ".csv"),
                          res.fit.dates, res.fit.maturities, contrib.fitted);
    }

    { // Pricing-error diagnostics for both specifications, in percent.
        const std::vector<int> diag_mats = {12, 24, 36, 60, 84, 120};
        csv::Writer w(ctx.artifact("table5.csv"));
        w.write_row(maturity_header({"panel", "statistic"}, diag_mats));
        const auto emit = [&](const std::string& label, const std::vector<int>& available,
                              const Eigen::MatrixXd& errors_cols) {
            Eigen::MatrixXd sub(errors_cols.rows(),
                                static_cast<Eigen::Index>(diag_mats.size()));
            for (std::size_t j = 0; j < diag_mats.size(); ++j) {
                const auto it = std::find(available.begin(), available.end(), diag_mats[j]);
                if (it == available.end())
                    throw ValidationError("atsm: maturity " + std::to_string(diag_mats[j]) +
                                          " missing from the fitted grid");
                sub.col(static_cast<Eigen::Index>(j)) =
                    errors_cols.col(it - available.begin()) * 100.0;
            }
            const auto stats_rows = atsm::error_summary(diag_mats, sub);
            std::vector<double> mean, sd, skew, kurt, r1, r6;
            for (const auto& s : stats_rows) {
                mean.push_back(s.mean);
                sd.push_back(s.sd);
                skew.push_back(s.skewness);
                kurt.push_back(s.kurtosis);
                r1.push_back(s.rho1);
                r6.push_back(s.rho6);
            }
            w.write_row(stat_row({label, "mean"}, mean));
            w.write_row(stat_row({label, "sd"}, sd));
            w.write_row(stat_row({label, "skewness"}, skew));
            w.write_row(stat_row({label, "kurtosis"}, kurt));
            w.write_row(stat_row({label, "rho1"}, r1));
            w.write_row(stat_row({label, "rho6"}, r6));
        };
        emit("tr_yield", res.fit.maturities, res.fit.yield_errors);
        emit("tr_return", model.return_maturities, res.fit.return_errors.transpose());
        emit("pc_yield", bench.fit.maturities, bench.fit.yield_errors);
        emit("pc_return", bench.fit.model.return_maturities,
             bench.fit.return_errors.transpose());
        w.close();
    }

    { // Spanning Wald tests for both specifications.
        csv::Writer w(ctx.artifact("table6.csv"));
        w.write_row({"factor", "tr_model_w", "tr_model_p", "pc_model_w", "pc_model_p"});
        const auto& bnames = bench.fit.state.names;
        for (int i = 0; i < K; ++i) {
            const std::string& f = names[static_cast<std::size_t>(i)];
            std::vector<std::string> row{f, csv::format_double(res.spanning[static_cast<std::size_t>(i)].stat),
                                         csv::format_double(res.spanning[static_cast<std::size_t>(i)].p)};
            const auto it = std::find(bnames.begin(), bnames.end(), f);
            if (it == bnames.end()) {
                row.push_back("");
                row.push_back("");
            } else {
                const auto b = static_cast<std::size_t>(it - bnames.begin());
                row.push_back(csv::format_double(bench.spanning[b].stat));
                row.push_back(csv::format_double(bench.spanning[b].p));
            }
            w.write_row(row);
        }
        w.close();
    }

    { // Prices of risk with bootstrap t-statistics and the row Wald tests.
        csv::Writer w(ctx.artifact("table7.csv"));
        std::vector<std::string> head{"factor", "statistic", "lambda0"};
        for (int j = 0; j < K; ++j)
            head.push_back("lambda1_" + names[static_cast<std::size_t>(j)]);
        head.push_back("w_joint");
        head.push_back("w_timevar");
        w.write_row(head);
        for (int i = 0; i < K; ++i) {
            const std::string& f = names[static_cast<std::size_t>(i)];
            std::vector<std::string> est{f, "estimate"};
            std::vector<std::string> tp{f, "t_or_p"};
            for (int j = 0; j <= K; ++j) {
                est.push_back(csv::format_double(res.lambda(i, j)));
                tp.push_back(
                    csv::format_double(res.lambda(i, j) / std::sqrt(res.lambda_var(i, j))));
            }
            est.push_back(csv::format_double(res.prices.joint[static_cast<std::size_t>(i)].stat));
            est.push_back(
                csv::format_double(res.prices.time_varying[static_cast<std::size_t>(i)].stat));
            tp.push_back(csv::format_double(res.prices.joint[static_cast<std::size_t>(i)].p));
            tp.push_back(
                csv::format_double(res.prices.time_varying[static_cast<std::size_t>(i)].p));
            w.write_row(est);
            w.write_row(tp);
        }
        w.close();
    }

    std::printf("atsm: %d-factor fit over %zu months, max |yield error| = %s\n", K,
                res.fit.dates.size(),
                csv::format_double(res.fit.yield_errors.cwiseAbs().maxCoeff()).c_str());
}

void cmd_three_pass(Ctx& ctx) {
    const auto panel = load_curve_panel(ctx);
    const Series tr = load_target_series(ctx);

    std::vector<int> mats;
    for (int n = 6; n <= 120; n += 6) mats.push_back(n);
    const auto rx = curve::excess_returns(panel, mats);
    const Eigen::MatrixXd returns = rx.returns.transpose(); // assets x months
    Eigen::MatrixXd g(1, returns.cols());
    g.row(0) = align_to_months(tr, rx.dates, "three-pass");

    threepass::ThreePassOptions opts;
    opts.block_length = 12;
    opts.hac_lags = ctx.cfg.nw_lags;
    opts.bootstrap_reps = ctx.cfg.bootstrap_reps;
    opts.seed = ctx.cfg.seed;
    opts.threads = ctx.threads;

    std::vector<double> gamma_g, se, r2, weak_p;
    for (int p = 1; p <= 8; ++p) {
        opts.p = p;
        const auto res = threepass::estimate(returns, g, opts, &ctx.warnings);
        gamma_g.push_back(res.gamma_g(0));
        se.push_back(res.se_gamma_g(0));
        r2.push_back(res.r2_g(0));
        weak_p.push_back(res.weak_wald[0].p);
    }

    csv::Writer w(ctx.artifact("table8.csv"));
    std::vector<std::string> head{"statistic"};
    for (int p = 1; p <= 8; ++p) head.push_back("p" + std::to_string(p));
    w.write_row(head);
    w.write_row(stat_row({"gamma_g"}, gamma_g));
    w.write_row(stat_row({"se"}, se));
    w.write_row(stat_row({"r2_g"}, r2));
    w.write_row(stat_row({"weak_p"}, weak_p));
    w.close();
    std::printf("three-pass: table8.csv over %zu assets x %lld months\n", mats.size(),
                static_cast<long long>(returns.cols()));
}

void cmd_report(Ctx& ctx) {
    int figures = 0;
    const auto date_x = [](const std::vector<Date>& dates) {
        std::vector<double> x;
        x.reserve(dates.size());
        for (const auto& d : dates) x.push_back(static_cast<double>(d.serial()));
        return x;
    };

    if (fs::exists(ctx.out / "tail_series.csv")) {
        const auto table = csv::read_file(ctx.out / "tail_series.csv");
        const std::size_t cd = table.col("date");
        const std::size_t cv = table.col("tr");
        SvgSeries s{"tr", palette(0), {}, {}};
        for (const auto& r : table.rows) {
            s.x.push_back(static_cast<double>(Date::parse(r.fields[cd]).serial()));
            s.y.push_back(csv::to_double(table, r, cv));
        }
        std::vector<SvgBand> bands;
        for (const auto& [b0, b1] : contraction_bands())
            bands.push_back({static_cast<double>(b0.serial()), static_cast<double>(b1.serial())});
        write_svg_lines(ctx.artifact("fig_tail_risk.svg"),
                        "Left tail volatility, shaded during output contractions", {s}, bands,
                        true);
        ++figures;
    }

    const auto panel_figure = [&](const std::string& csv_name, const std::string& fig_name,
                                  const std::string& title) {
        if (!fs::exists(ctx.out / csv_name)) return;
        const auto p = curve::load_panel(ctx.out / csv_name);
        std::vector<int> wanted = {12, 60, 120};
        std::erase_if(wanted, [&](int m) {
            return std::find(p.maturities_months.begin(), p.maturities_months.end(), m) ==
                   p.maturities_months.end();
        });
        if (wanted.empty()) wanted.push_back(p.maturities_months.front());
        std::vector<SvgSeries> series;
        const auto x = date_x(p.dates);
        for (std::size_t k = 0; k < wanted.size(); ++k) {
            SvgSeries s{"m" + std::to_string(wanted[k]), palette(k), x, {}};
            const auto j = static_cast<Eigen::Index>(p.col_of(wanted[k]));
            for (Eigen::Index i = 0; i < p.yields.rows(); ++i) s.y.push_back(p.yields(i, j));
            series.push_back(std::move(s));
        }
        write_svg_lines(ctx.artifact(fig_name), title, series, {}, true);
        ++figures;
    };
    panel_figure("fitted_yields.csv", "fig_yields.svg", "Model-implied yields");
    panel_figure("term_premia.csv", "fig_term_premia.svg", "Term premia");

    if (fs::exists(ctx.out / "loadings.csv")) {
        const auto table = csv::read_file(ctx.out / "loadings.csv");
        const std::size_t cm = table.col("maturity");
        const std::size_t cv =
            table.col_optional("tr") != csv::Table::npos ? table.col("tr") : 1;
        std::vector<int> mats;
        std::vector<double> vals;
        for (const auto& r : table.rows) {
            mats.push_back(static_cast<int>(csv::to_long(table, r, cm)));
            vals.push_back(csv::to_double(table, r, cv));
        }
        write_svg_bars(ctx.artifact("fig_loadings.svg"),
                       "Yield loadings on the tail-risk factor by maturity", mats, vals);
        ++figures;
    }

    if (fs::exists(ctx.out / "contributions_tr.csv")) {
        const auto p = curve::load_panel(ctx.out / "contributions_tr.csv");
        // Date slices: the strongest and weakest months plus the endpoints.
        std::vector<std::size_t> picks{0, p.dates.size() - 1};
        Eigen::Index lo = 0, hi = 0;
        const Eigen::VectorXd avg = p.yields.rowwise().mean();
        avg.minCoeff(&lo);
        avg.maxCoeff(&hi);
        picks.push_back(static_cast<std::size_t>(lo));
        picks.push_back(static_cast<std::size_t>(hi));
        std::sort(picks.begin(), picks.end());
        picks.erase(std::unique(picks.begin(), picks.end()), picks.end());
        std::vector<double> x;
        for (const int m : p.maturities_months) x.push_back(static_cast<double>(m));
        std::vector<SvgSeries> series;
        for (std::size_t k = 0; k < picks.size(); ++k) {
            SvgSeries s{p.dates[picks[k]].str(), palette(k), x, {}};
            for (Eigen::Index j = 0; j < p.yields.cols(); ++j)
                s.y.push_back(p.yields(static_cast<Eigen::Index>(picks[k]), j));
            series.push_back(std::move(s));
        }
        write_svg_lines(ctx.artifact("fig_impact.svg"),
                        "Tail-risk impact across the curve on selected dates", series, {}, false);
        ++figures;
    }

    if (figures == 0)
        throw ValidationError("report: no artifacts found in " + ctx.out.string() +
                              "; run the pipeline commands first");
    std::printf("report: wrote %d figures to %s\n", figures, ctx.out.string().c_str());
}

int dispatch(int argc, char** argv) {
    const CliArgs args = parse_args(argc, argv);
    if (args.help) {
        std::fputs(kUsage, stdout);
        return 0;
    }

    Ctx ctx;
    ctx.args = args;
    ctx.cfg = args.config_path.empty() ? RunConfig{} : RunConfig::from_file(args.config_path);
    if (args.seed) ctx.cfg.seed = *args.seed;
    ctx.threads = args.threads.value_or(1);
    ctx.out = args.out_dir;
    fs::create_directories(ctx.out);

    if (args.command == "synth") cmd_synth(ctx);
    else if (args.command == "tail-estimate") cmd_tail_estimate(ctx);
    else if (args.command == "returns") cmd_returns(ctx);
    else if (args.command == "predict-is") cmd_predict_is(ctx);
    else if (args.command == "predict-oos") cmd_predict_oos(ctx);
    else if (args.command == "portfolio") cmd_portfolio(ctx);
    else if (args.command == "atsm") cmd_atsm(ctx);
    else if (args.command == "three-pass") cmd_three_pass(ctx);
    else if (args.command == "report") cmd_report(ctx);

    write_manifest(ctx);
    for (const auto& msg : ctx.warnings) std::fprintf(stderr, "warning: %s\n", msg.c_str());
    return 0;
}

} // namespace

int run(int argc, char** argv) {
    try {
        return dispatch(argc, argv);
    } catch (const ValidationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const NumericError& e) {
        std::fprintf(stderr, "numerical error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "unexpected error: %s\n", e.what());
        return 3;
    }
}

} // namespace trb::cli
