#include "trb/core/series.hpp"

#include "trb/core/csv.hpp"
#include "trb/core/errors.hpp"

#include <algorithm>

namespace trb {

Series::Series(std::vector<Date> dates, std::vector<double> values, std::string name)
    : dates_(std::move(dates)), values_(std::move(values)), name_(std::move(name)) {
    if (dates_.size() != values_.size())
        throw ValidationError("Series: dates/values length mismatch");
    for (std::size_t i = 1; i < dates_.size(); ++i) {
        if (!(dates_[i - 1] < dates_[i]))
            throw ValidationError("Series '" + name_ + "': dates not strictly increasing at " +
                                  dates_[i].str());
    }
}

std::optional<double> Series::at(const Date& d) const {
    const auto it = std::lower_bound(dates_.begin(), dates_.end(), d);
    if (it == dates_.end() || *it != d) return std::nullopt;
    return values_[static_cast<std::size_t>(it - dates_.begin())];
}

std::optional<double> Series::asof(const Date& d) const {
    const auto it = std::upper_bound(dates_.begin(), dates_.end(), d);
    if (it == dates_.begin()) return std::nullopt;
    return values_[static_cast<std::size_t>(it - dates_.begin()) - 1];
}

std::optional<double> Series::in_month(const Date& d) const {
    // Last observation within d's calendar month, if any.
    const Date eom = d.month_end();
    const auto v = asof(eom);
    if (!v) return std::nullopt;
    const auto it = std::upper_bound(dates_.begin(), dates_.end(), eom);
    const Date& found = dates_[static_cast<std::size_t>(it - dates_.begin()) - 1];
    if (found.month_key() != d.month_key()) return std::nullopt;
    return v;
}

void Series::push_back(const Date& d, double v) {
    if (!dates_.empty() && !(dates_.back() < d))
        throw ValidationError("Series '" + name_ + "': push_back out of order at " + d.str());
    dates_.push_back(d);
    values_.push_back(v);
}

Series Series::window(const Date& first, const Date& last) const {
    Series out;
    out.name_ = name_;
    for (std::size_t i = 0; i < dates_.size(); ++i)
        if (!(dates_[i] < first) && !(last < dates_[i])) out.push_back(dates_[i], values_[i]);
    return out;
}

Series Series::from_csv(const std::filesystem::path& path, const std::string& value_column) {
    const auto t = csv::read_file(path);
    const std::size_t cd = t.col("date");
    std::size_t cv;
    if (!value_column.empty()) {
        cv = t.col(value_column);
    } else if (t.col_optional("value") != csv::Table::npos) {
        cv = t.col("value");
    } else if (t.header.size() == 2) {
        cv = 1 - cd;
    } else {
        throw ValidationError(path.string() + ": cannot determine value column (no 'value' column)");
    }
    Series out;
    out.name_ = t.header[cv];
    for (const auto& r : t.rows) out.push_back(Date::parse(r.fields[cd]), csv::to_double(t, r, cv));
    return out;
}

void Series::to_csv(const std::filesystem::path& path) const {
    csv::Writer w(path);
    w.write_row({"date", name_.empty() ? "value" : name_});
    for (std::size_t i = 0; i < size(); ++i)
        w.write_row({dates_[i].str(), csv::format_double(values_[i])});
    w.close();
}

} // namespace trb
