#pragma once

#include <chrono>
#include <compare>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>

#include "litfield/error.hpp"

namespace litfield {

// Calendar date with day precision.
class Date {
public:
    constexpr Date() = default;
    constexpr Date(int y, unsigned m, unsigned d)
        : days_(std::chrono::sys_days{std::chrono::year{y} / std::chrono::month{m} / std::chrono::day{d}}
                    .time_since_epoch()
                    .count()) {}

    static constexpr Date from_days(long days) {
        Date out;
        out.days_ = days;
        return out;
    }

    // Strict `YYYY-MM-DD`.
    static std::optional<Date> try_parse(std::string_view s) {
        if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
        auto digits = [&](std::size_t pos, std::size_t len) -> std::optional<int> {
            int v = 0;
            for (std::size_t i = pos; i < pos + len; ++i) {
                if (s[i] < '0' || s[i] > '9') return std::nullopt;
                v = v * 10 + (s[i] - '0');
            }
            return v;
        };
        auto y = digits(0, 4), m = digits(5, 2), d = digits(8, 2);
        if (!y || !m || !d) return std::nullopt;
        std::chrono::year_month_day ymd{std::chrono::year{*y}, std::chrono::month{static_cast<unsigned>(*m)},
                                        std::chrono::day{static_cast<unsigned>(*d)}};
        if (!ymd.ok()) return std::nullopt;
        return Date(*y, static_cast<unsigned>(*m), static_cast<unsigned>(*d));
    }

    static Date parse(std::string_view s) {
        if (auto d = try_parse(s)) return *d;
        throw InvalidDate("not an ISO-8601 date: '" + std::string(s) + "'");
    }

    // Year-only dates land on July 1.
    static Date mid_year(int y) { return Date(y, 7, 1); }

    std::chrono::year_month_day ymd() const {
        return std::chrono::year_month_day{std::chrono::sys_days{std::chrono::days{days_}}};
    }
    int year() const { return static_cast<int>(ymd().year()); }
    constexpr long days_since_epoch() const { return days_; }

    std::string iso() const {
        auto v = ymd();
        char buf[16];
        std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(v.year()),
                      static_cast<unsigned>(v.month()), static_cast<unsigned>(v.day()));
        return buf;
    }

    friend constexpr long operator-(Date a, Date b) { return a.days_ - b.days_; }
    friend constexpr auto operator<=>(Date, Date) = default;

private:
    long days_ = 0;
};

}  // namespace litfield
