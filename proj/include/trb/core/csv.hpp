#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace trb::csv {

/// One parsed CSV record plus its 1-based source line (for error messages).
struct Row {
    std::vector<std::string> fields;
    std::size_t line = 0;
};

/// In-memory CSV table: a header row and data rows.  The reader handles
/// plain comma separation with optional double-quote escaping, skips blank
/// lines, and tolerates a trailing newline and CRLF endings.
struct Table {
    std::vector<std::string> header;
    std::vector<Row> rows;
    std::string path;

    /// Column position of `name`; throws ValidationError naming the file when
    /// the column is missing.
    [[nodiscard]] std::size_t col(const std::string& name) const;

    /// Like col() but returns npos instead of throwing.
    [[nodiscard]] std::size_t col_optional(const std::string& name) const;

    static constexpr std::size_t npos = static_cast<std::size_t>(-1);
};

[[nodiscard]] Table read_file(const std::filesystem::path& path);

[[nodiscard]] Table read_string(const std::string& text, const std::string& label = "<string>");

/// Parse helpers that throw ValidationError mentioning file/line/column names.
[[nodiscard]] double to_double(const Table& t, const Row& r, std::size_t col);
[[nodiscard]] long to_long(const Table& t, const Row& r, std::size_t col);

/// Minimal writer.  Numeric cells should be pre-formatted by format_double so
/// output bytes are reproducible.
class Writer {
public:
    explicit Writer(const std::filesystem::path& path);
    ~Writer();
    Writer(const Writer&) = delete;
    Writer& operator=(const Writer&) = delete;

    void write_row(const std::vector<std::string>& fields);
    void close();

private:
    struct Impl;
    Impl* impl_;
};

/// Shortest round-trip decimal representation of x ("%.17g" trimmed), so a
/// value re-read from CSV compares bit-equal and files are byte-stable.
[[nodiscard]] std::string format_double(double x);

} // namespace trb::csv
