#pragma once

#include <chrono>
#include <compare>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>

#include "cfcast/errors.hpp"

namespace cfcast {

/// A calendar day without time zone. Thin value wrapper over
/// std::chrono::sys_days with ISO-8601 (YYYY-MM-DD) text I/O and day
/// arithmetic. Leap days are ordinary days.
class Date {
public:
    Date() = default;

    explicit Date(std::chrono::sys_days d) : days_(d) {}

    Date(int year, unsigned month, unsigned day) {
        const std::chrono::year_month_day ymd{std::chrono::year{year},
                                              std::chrono::month{month},
                                              std::chrono::day{day}};
        if (!ymd.ok()) {
            throw DataError("invalid calendar date " + format(year, month, day));
        }
        days_ = std::chrono::sys_days{ymd};
    }

    /// Parses strict "YYYY-MM-DD". Returns nullopt on any malformation or
    /// invalid calendar combination.
    static std::optional<Date> parse(std::string_view text) {
        if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
        int y = 0;
        unsigned m = 0, d = 0;
        for (int i : {0, 1, 2, 3}) {
            if (text[i] < '0' || text[i] > '9') return std::nullopt;
            y = y * 10 + (text[i] - '0');
        }
        for (int i : {5, 6}) {
            if (text[i] < '0' || text[i] > '9') return std::nullopt;
            m = m * 10 + static_cast<unsigned>(text[i] - '0');
        }
        for (int i : {8, 9}) {
            if (text[i] < '0' || text[i] > '9') return std::nullopt;
            d = d * 10 + static_cast<unsigned>(text[i] - '0');
        }
        const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m},
                                              std::chrono::day{d}};
        if (!ymd.ok()) return std::nullopt;
        return Date{std::chrono::sys_days{ymd}};
    }

    int year() const { return static_cast<int>(ymd().year()); }
    unsigned month() const { return static_cast<unsigned>(ymd().month()); }
    unsigned day() const { return static_cast<unsigned>(ymd().day()); }

    /// Day of week, 0 = Sunday .. 6 = Saturday.
    int day_of_week() const { return static_cast<int>(std::chrono::weekday{days_}.c_encoding()); }

    /// Day of year, 1..366.
    int day_of_year() const {
        const Date jan1{year(), 1, 1};
        return *this - jan1 + 1;
    }

    std::string to_string() const { return format(year(), month(), day()); }

    Date& operator+=(int days) {
        days_ += std::chrono::days{days};
        return *this;
    }
    Date& operator-=(int days) { return *this += -days; }
    friend Date operator+(Date d, int days) { return d += days; }
    friend Date operator-(Date d, int days) { return d -= days; }

    /// Difference in whole days.
    friend int operator-(Date a, Date b) {
        return static_cast<int>((a.days_ - b.days_).count());
    }

    auto operator<=>(const Date&) const = default;

    std::chrono::sys_days sys_days() const { return days_; }

private:
    std::chrono::year_month_day ymd() const { return std::chrono::year_month_day{days_}; }

    static std::string format(int y, unsigned m, unsigned d) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", y, m, d);
        return buf;
    }

    std::chrono::sys_days days_{};
};

} // namespace cfcast
