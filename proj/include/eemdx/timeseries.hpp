#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <compare>
#include <cstdint>
#include <cstdio>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "eemdx/error.hpp"

namespace eemdx {

/// Calendar day stored as an integer offset from 1970-01-01.
class Date {
public:
    constexpr Date() = default;
    constexpr explicit Date(std::int32_t days_since_epoch) : days_(days_since_epoch) {}

    static Date from_ymd(int year, unsigned month, unsigned day) {
        using namespace std::chrono;
        const year_month_day ymd{std::chrono::year{year}, std::chrono::month{month}, std::chrono::day{day}};
        if (!ymd.ok()) {
            throw InvalidArgument("invalid calendar date " + std::to_string(year) + "-" +
                                  std::to_string(month) + "-" + std::to_string(day));
        }
        return Date(static_cast<std::int32_t>(sys_days{ymd}.time_since_epoch().count()));
    }

    /// Parses YYYY-MM-DD.
    static Date parse_iso(const std::string& text);

    constexpr std::int32_t days() const noexcept { return days_; }

    int year() const { return static_cast<int>(ymd().year()); }
    unsigned month() const { return static_cast<unsigned>(ymd().month()); }
    unsigned day() const { return static_cast<unsigned>(ymd().day()); }

    std::string iso() const {
        char buf[16];
        std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", year(), month(), day());
        return buf;
    }

    constexpr Date operator+(std::int32_t n) const noexcept { return Date(days_ + n); }
    constexpr Date operator-(std::int32_t n) const noexcept { return Date(days_ - n); }
    constexpr std::int32_t operator-(Date other) const noexcept { return days_ - other.days_; }
    constexpr auto operator<=>(const Date&) const = default;

private:
    std::chrono::year_month_day ymd() const {
        return std::chrono::year_month_day{std::chrono::sys_days{std::chrono::days{days_}}};
    }

    std::int32_t days_ = 0;
};

inline Date Date::parse_iso(const std::string& text) {
    int y = 0;
    unsigned m = 0, d = 0;
    char tail = 0;
    if (std::sscanf(text.c_str(), "%d-%u-%u%c", &y, &m, &d, &tail) != 3) {
        throw InvalidArgument("not an ISO-8601 date: '" + text + "'");
    }
    return from_ymd(y, m, d);
}

/// Daily, gap-free, finite-valued series. Immutable after construction.
class TimeSeries {
public:
    TimeSeries(Date start, std::vector<double> values, std::string name = {})
        : start_(start), values_(std::move(values)), name_(std::move(name)) {
        if (values_.empty()) {
            throw InvalidArgument("time series '" + name_ + "' is empty");
        }
        for (std::size_t i = 0; i < values_.size(); ++i) {
            if (!std::isfinite(values_[i])) {
                throw InvalidArgument("time series '" + name_ + "' has a non-finite value at index " +
                                      std::to_string(i));
            }
        }
    }

    Date start() const noexcept { return start_; }
    Date end() const noexcept { return start_ + static_cast<std::int32_t>(values_.size()) - 1; }
    std::size_t size() const noexcept { return values_.size(); }
    const std::string& name() const noexcept { return name_; }
    std::span<const double> values() const noexcept { return values_; }
    const std::vector<double>& vector() const noexcept { return values_; }
    double operator[](std::size_t i) const { return values_[i]; }
    Date date_at(std::size_t i) const { return start_ + static_cast<std::int32_t>(i); }

    TimeSeries renamed(std::string name) const { return TimeSeries(start_, values_, std::move(name)); }
    TimeSeries with_values(std::vector<double> values) const {
        return TimeSeries(start_, std::move(values), name_);
    }

    /// Sub-range [first, first+count).
    TimeSeries slice(std::size_t first, std::size_t count) const {
        if (first + count > values_.size() || count == 0) {
            throw RangeError("slice [" + std::to_string(first) + ", " + std::to_string(first + count) +
                             ") outside series '" + name_ + "' of length " + std::to_string(values_.size()));
        }
        return TimeSeries(date_at(first),
                          std::vector<double>(values_.begin() + static_cast<std::ptrdiff_t>(first),
                                              values_.begin() + static_cast<std::ptrdiff_t>(first + count)),
                          name_);
    }

    /// Restricts the series to [from, to] (inclusive); both must lie inside the series.
    TimeSeries between(Date from, Date to) const {
        if (from < start_ || to > end() || to < from) {
            throw RangeError("date window " + from.iso() + ".." + to.iso() + " outside series '" + name_ + "'");
        }
        return slice(static_cast<std::size_t>(from - start_), static_cast<std::size_t>(to - from) + 1);
    }

    bool operator==(const TimeSeries& other) const {
        return start_ == other.start_ && values_ == other.values_ && name_ == other.name_;
    }

private:
    Date start_;
    std::vector<double> values_;
    std::string name_;
};

/// d-th order difference; the first d dates are consumed.
inline TimeSeries difference(const TimeSeries& x, std::size_t d) {
    if (d >= x.size()) {
        throw InvalidArgument("differencing order " + std::to_string(d) + " must be below series length " +
                              std::to_string(x.size()));
    }
    std::vector<double> v = x.vector();
    for (std::size_t k = 0; k < d; ++k) {
        for (std::size_t i = v.size() - 1; i > k; --i) {
            v[i] -= v[i - 1];
        }
    }
    v.erase(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(d));
    return TimeSeries(x.start() + static_cast<std::int32_t>(d), std::move(v), x.name());
}

/// Integration seeds for undoing `difference`: the first d values of the original series.
inline std::vector<double> difference_heads(std::span<const double> x, std::size_t d) {
    if (d > x.size()) {
        throw InvalidArgument("differencing order " + std::to_string(d) + " exceeds series length " +
                              std::to_string(x.size()));
    }
    return std::vector<double>(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(d));
}

/// Raw-buffer form of integrate. `heads` are the first d values of the undifferenced series.
inline std::vector<double> integrate_values(std::span<const double> dx, std::size_t d, std::span<const double> heads) {
    if (heads.size() != d) {
        throw InvalidArgument("integration of order " + std::to_string(d) + " needs " + std::to_string(d) +
                              " seeds, got " + std::to_string(heads.size()));
    }
    // seeds[k] is the first value of the k-th difference, derived from the heads alone.
    std::vector<double> seeds;
    std::vector<double> h(heads.begin(), heads.end());
    for (std::size_t k = 0; k < d; ++k) {
        seeds.push_back(h.front());
        for (std::size_t i = 0; i + 1 < h.size(); ++i) h[i] = h[i + 1] - h[i];
        h.pop_back();
    }
    std::vector<double> v(dx.begin(), dx.end());
    for (std::size_t k = d; k-- > 0;) {
        std::vector<double> up;
        up.reserve(v.size() + 1);
        up.push_back(seeds[k]);
        for (double step : v) up.push_back(up.back() + step);
        v = std::move(up);
    }
    // The cumulative sums reproduce the heads up to rounding; pin them exactly.
    for (std::size_t i = 0; i < d && i < v.size(); ++i) v[i] = heads[i];
    return v;
}

/// Inverse of `difference`: heads are the d seeds returned by difference_heads of the original.
inline TimeSeries integrate(const TimeSeries& dx, std::size_t d, std::span<const double> heads) {
    auto v = integrate_values(dx.values(), d, heads);
    return TimeSeries(dx.start() - static_cast<std::int32_t>(d), std::move(v), dx.name());
}

/// Trims every series to the common overlapping date range.
inline std::vector<TimeSeries> align(const std::vector<TimeSeries>& series) {
    if (series.empty()) {
        return {};
    }
    Date lo = series.front().start();
    Date hi = series.front().end();
    for (const auto& s : series) {
        lo = std::max(lo, s.start());
        hi = std::min(hi, s.end());
    }
    if (hi < lo) {
        throw NoOverlapError("series share no common dates");
    }
    std::vector<TimeSeries> out;
    out.reserve(series.size());
    for (const auto& s : series) {
        out.push_back(s.between(lo, hi));
    }
    return out;
}

inline double mean(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

/// Population standard deviation (divide by N).
inline double population_stddev(std::span<const double> v) {
    if (v.empty()) return 0.0;
    const double m = mean(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size()));
}

/// Sample standard deviation (divide by N-1); a single value has zero spread.
inline double sample_stddev(std::span<const double> v) {
    if (v.size() < 2) return 0.0;
    const double m = mean(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace eemdx
