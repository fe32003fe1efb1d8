#include "trb/core/date.hpp"

#include "trb/core/errors.hpp"

#include <array>
#include <charconv>
#include <cstdio>

namespace trb {

namespace {

// days_from_civil / civil_from_days, Hinnant's algorithms.
std::int64_t days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);              // [0, 399]
    const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;   // [0, 365]
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;             // [0, 146096]
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, int& y, int& m, int& d) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);           // [0, 146096]
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t yr = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);           // [0, 365]
    const unsigned mp = (5 * doy + 2) / 153;                                // [0, 11]
    d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
    m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
    y = static_cast<int>(yr + (m <= 2));
}

} // namespace

bool Date::is_leap(int year) {
    return (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
}

int Date::days_in_month(int year, int month) {
    static constexpr std::array<int, 12> lengths{31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    if (month == 2 && is_leap(year)) return 29;
    return lengths[static_cast<std::size_t>(month - 1)];
}

Date::Date(int year, int month, int day) : y_(year), m_(month), d_(day) {
    if (month < 1 || month > 12 || day < 1 || day > days_in_month(year, month)) {
        throw ValidationError("invalid calendar date: " + std::to_string(year) + "-" +
                              std::to_string(month) + "-" + std::to_string(day));
    }
}

Date Date::parse(const std::string& text) {
    int y = 0, m = 0, d = 0;
    const char* p = text.data();
    const char* end = p + text.size();
    auto take = [&](int& out, std::size_t width) {
        auto [next, ec] = std::from_chars(p, end, out);
        if (ec != std::errc{} || static_cast<std::size_t>(next - p) != width) {
            throw ValidationError("bad date '" + text + "': expected YYYY-MM-DD");
        }
        p = next;
    };
    take(y, 4);
    if (p == end || *p != '-') throw ValidationError("bad date '" + text + "': expected YYYY-MM-DD");
    ++p;
    take(m, 2);
    if (p == end || *p != '-') throw ValidationError("bad date '" + text + "': expected YYYY-MM-DD");
    ++p;
    take(d, 2);
    if (p != end) throw ValidationError("bad date '" + text + "': trailing characters");
    return Date(y, m, d);
}

Date Date::from_serial(std::int64_t serial) {
    int y, m, d;
    civil_from_days(serial, y, m, d);
    Date out;
    out.y_ = y;
    out.m_ = m;
    out.d_ = d;
    return out;
}

std::int64_t Date::serial() const { return days_from_civil(y_, m_, d_); }

int Date::iso_weekday() const {
    // 1970-01-01 was a Thursday (ISO 4).
    const std::int64_t wd = (serial() + 3) % 7; // 0 = Monday
    return static_cast<int>(wd < 0 ? wd + 7 : wd) + 1;
}

int Date::iso_week_key() const {
    // The ISO week of a date is determined by the Thursday of its week.
    const Date thursday = add_days(4 - iso_weekday());
    const int iso_year = thursday.year();
    const std::int64_t jan1 = days_from_civil(iso_year, 1, 1);
    const int week = static_cast<int>((thursday.serial() - jan1) / 7) + 1;
    return iso_year * 100 + week;
}

Date Date::month_end() const { return Date(y_, m_, days_in_month(y_, m_)); }

Date Date::add_months(int months) const {
    const int key = month_key() + months;
    const int y = key / 12;
    const int m = key % 12 + 1;
    const int d = std::min(d_, days_in_month(y, m));
    return Date(y, m, d);
}

Date Date::add_days(std::int64_t days) const { return from_serial(serial() + days); }

std::string Date::str() const {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", y_, m_, d_);
    return buf;
}

} // namespace trb
