#pragma once

#include "trb/core/date.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace trb {

/// A dated scalar series, kept sorted by date with unique dates.
/// Stored values carry whatever unit the producer documents (decimals for
/// yields/rates, model units for risk series).
class Series {
public:
    Series() = default;
    Series(std::vector<Date> dates, std::vector<double> values, std::string name = "");

    [[nodiscard]] const std::vector<Date>& dates() const { return dates_; }
    [[nodiscard]] const std::vector<double>& values() const { return values_; }
    [[nodiscard]] const std::string& name() const { return name_; }
    void set_name(std::string n) { name_ = std::move(n); }

    [[nodiscard]] std::size_t size() const { return dates_.size(); }
    [[nodiscard]] bool empty() const { return dates_.empty(); }

    /// Exact-date lookup.
    [[nodiscard]] std::optional<double> at(const Date& d) const;

    /// Most recent value with date <= d (step/"as-of" lookup).
    [[nodiscard]] std::optional<double> asof(const Date& d) const;

    /// Value in the same calendar month as d, if any (monthly-join lookup).
    [[nodiscard]] std::optional<double> in_month(const Date& d) const;

    void push_back(const Date& d, double v);

    /// Restrict to dates in [first, last] inclusive.
    [[nodiscard]] Series window(const Date& first, const Date& last) const;

    /// `date,value` (or `date,<name>` when named) CSV I/O.
    static Series from_csv(const std::filesystem::path& path, const std::string& value_column = "");
    void to_csv(const std::filesystem::path& path) const;

private:
    std::vector<Date> dates_;
    std::vector<double> values_;
    std::string name_;
};

} // namespace trb
