#include "trb/core/csv.hpp"

#include "trb/core/errors.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace trb::csv {

namespace {

std::vector<std::string> split_line(const std::string& line, const std::string& where) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (quoted) throw ValidationError(where + ": unterminated quote");
    out.push_back(std::move(cur));
    return out;
}

Table parse_stream(std::istream& in, const std::string& label) {
    Table t;
    t.path = label;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = split_line(line, label + ":" + std::to_string(lineno));
        if (t.header.empty()) {
            t.header = std::move(fields);
            continue;
        }
        if (fields.size() != t.header.size()) {
            throw ValidationError(label + ":" + std::to_string(lineno) + ": expected " +
                                  std::to_string(t.header.size()) + " fields, found " +
                                  std::to_string(fields.size()));
        }
        t.rows.push_back(Row{std::move(fields), lineno});
    }
    if (t.header.empty()) throw ValidationError(label + ": empty file (no header)");
    return t;
}

} // namespace

std::size_t Table::col(const std::string& name) const {
    const std::size_t c = col_optional(name);
    if (c == npos) throw ValidationError(path + ": missing required column '" + name + "'");
    return c;
}

std::size_t Table::col_optional(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return i;
    return npos;
}

Table read_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open '" + path.string() + "'");
    return parse_stream(in, path.string());
}

Table read_string(const std::string& text, const std::string& label) {
    std::istringstream in(text);
    return parse_stream(in, label);
}

double to_double(const Table& t, const Row& r, std::size_t col) {
    const std::string& s = r.fields.at(col);
    double v = 0.0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) {
        throw ValidationError(t.path + ":" + std::to_string(r.line) + ": column '" +
                              t.header.at(col) + "': '" + s + "' is not a number");
    }
    return v;
}

long to_long(const Table& t, const Row& r, std::size_t col) {
    const std::string& s = r.fields.at(col);
    long v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) {
        throw ValidationError(t.path + ":" + std::to_string(r.line) + ": column '" +
                              t.header.at(col) + "': '" + s + "' is not an integer");
    }
    return v;
}

struct Writer::Impl {
    std::ofstream out;
    std::filesystem::path path;
};

Writer::Writer(const std::filesystem::path& path) : impl_(new Impl) {
    impl_->path = path;
    impl_->out.open(path, std::ios::binary); // binary: LF endings on every platform
    if (!impl_->out) {
        delete impl_;
        throw ValidationError("cannot write '" + path.string() + "'");
    }
}

Writer::~Writer() {
    delete impl_;
}

void Writer::write_row(const std::vector<std::string>& fields) {
    auto& out = impl_->out;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out << ',';
        const std::string& f = fields[i];
        if (f.find_first_of(",\"\n") != std::string::npos) {
            out << '"';
            for (char c : f) {
                if (c == '"') out << "\"\"";
                else out << c;
            }
            out << '"';
        } else {
            out << f;
        }
    }
    out << '\n';
}

void Writer::close() {
    impl_->out.close();
    if (impl_->out.fail()) throw ValidationError("write failed for '" + impl_->path.string() + "'");
}

std::string format_double(double x) {
    // Shortest representation that round-trips: try increasing precision.
    char buf[40];
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, x);
        double back = 0.0;
        std::sscanf(buf, "%lf", &back);
        if (back == x) break;
    }
    return buf;
}

} // namespace trb::csv
