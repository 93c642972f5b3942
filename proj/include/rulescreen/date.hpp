#pragma once

#include "rulescreen/error.hpp"

#include <chrono>
#include <compare>
#include <cstdio>
#include <string>
#include <string_view>

namespace rulescreen {

/// Calendar date with day arithmetic, stored as days since 1970-01-01.
class Date {
public:
    constexpr Date() = default;
    constexpr explicit Date(std::chrono::sys_days days) : days_(days) {}
    constexpr Date(int y, unsigned m, unsigned d)
        : days_(std::chrono::year_month_day{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}}) {}

    /// Parses `YYYY-MM-DD`.
    static Date parse(std::string_view text) {
        int y = 0;
        unsigned m = 0, d = 0;
        char tail = 0;
        std::string buf(text);
        if (std::sscanf(buf.c_str(), "%d-%u-%u%c", &y, &m, &d, &tail) != 3)
            throw Error(Errc::ParseError, "invalid date '" + buf + "'");
        std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
        if (!ymd.ok())
            throw Error(Errc::ParseError, "invalid date '" + buf + "'");
        return Date(std::chrono::sys_days{ymd});
    }

    std::string iso() const {
        const auto ymd = this->ymd();
        char buf[16];
        std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", int(ymd.year()), unsigned(ymd.month()),
                      unsigned(ymd.day()));
        return buf;
    }

    constexpr std::chrono::year_month_day ymd() const { return std::chrono::year_month_day{days_}; }
    constexpr int year() const { return int(ymd().year()); }
    constexpr unsigned month() const { return unsigned(ymd().month()); }
    constexpr unsigned day() const { return unsigned(ymd().day()); }
    constexpr long serial() const { return days_.time_since_epoch().count(); }

    constexpr bool is_weekday() const {
        const std::chrono::weekday wd{days_};
        return wd != std::chrono::Saturday && wd != std::chrono::Sunday;
    }

    constexpr Date operator+(int days) const { return Date(days_ + std::chrono::days{days}); }
    constexpr Date operator-(int days) const { return Date(days_ - std::chrono::days{days}); }
    constexpr long operator-(Date other) const { return (days_ - other.days_).count(); }

    constexpr auto operator<=>(const Date&) const = default;

private:
    std::chrono::sys_days days_{};
};

/// Moves `n` weekdays forward (n > 0) or backward (n < 0).
constexpr Date add_business_days(Date date, int n) {
    const int step = n >= 0 ? 1 : -1;
    for (int left = n >= 0 ? n : -n; left > 0;) {
        date = date + step;
        if (date.is_weekday())
            --left;
    }
    return date;
}

} // namespace rulescreen
