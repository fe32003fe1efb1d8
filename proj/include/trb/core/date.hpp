#pragma once

#include <compare>
#include <cstdint>
#include <string>

namespace trb {

/// Proleptic-Gregorian calendar date with day-serial arithmetic.
///
/// The serial number counts days since 1970-01-01 (negative before).  All
/// conversions use the civil-calendar algorithms of Howard Hinnant's
/// chrono-compatible date math, which are exact over the full int range.
class Date {
public:
    Date() = default;
    Date(int year, int month, int day);

    /// Parse "YYYY-MM-DD".  Throws ValidationError on malformed input or an
    /// impossible calendar date.
    static Date parse(const std::string& text);

    /// Inverse of serial(): build a date from days since 1970-01-01.
    static Date from_serial(std::int64_t serial);

    [[nodiscard]] int year() const { return y_; }
    [[nodiscard]] int month() const { return m_; }
    [[nodiscard]] int day() const { return d_; }

    /// Days since 1970-01-01.
    [[nodiscard]] std::int64_t serial() const;

    /// ISO-8601 weekday: Monday = 1 ... Sunday = 7.
    [[nodiscard]] int iso_weekday() const;

    /// ISO-8601 week key (iso_year * 100 + iso_week), weeks run Mon-Sun.
    /// Example: 2015-12-31 falls in ISO week 53 of 2015 -> 201553.
    [[nodiscard]] int iso_week_key() const;

    /// Months since year 0 (year * 12 + month - 1); monthly-panel join key.
    [[nodiscard]] int month_key() const { return y_ * 12 + m_ - 1; }

    /// Last calendar day of this date's month.
    [[nodiscard]] Date month_end() const;

    /// This date shifted by a number of calendar months, clamped to the
    /// target month's length (2020-01-31 + 1 month = 2020-02-29).
    [[nodiscard]] Date add_months(int months) const;

    [[nodiscard]] Date add_days(std::int64_t days) const;

    /// "YYYY-MM-DD".
    [[nodiscard]] std::string str() const;

    friend auto operator<=>(const Date&, const Date&) = default;

    static bool is_leap(int year);
    static int days_in_month(int year, int month);

private:
    int y_ = 1970;
    int m_ = 1;
    int d_ = 1;
};

/// Calendar days from a to b (b - a).
[[nodiscard]] inline std::int64_t days_between(const Date& a, const Date& b) {
    return b.serial() - a.serial();
}

} // namespace trb
