#pragma once

#include <chrono>
#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace burnscan {

/// Calendar date with day resolution.
class Date {
public:
    constexpr Date() = default;
    constexpr explicit Date(std::chrono::sys_days days) : days_(days.time_since_epoch().count()) {}

    static Date from_ymd(int year, unsigned month, unsigned day);
    /// Parses YYYY-MM-DD; throws FormatError.
    static Date parse(std::string_view text);

    std::string to_string() const;
    constexpr std::int32_t serial() const noexcept { return days_; }

    constexpr Date operator+(int days) const noexcept {
        Date d;
        d.days_ = days_ + days;
        return d;
    }
    constexpr Date operator-(int days) const noexcept { return *this + (-days); }
    constexpr int operator-(Date other) const noexcept { return days_ - other.days_; }

    constexpr auto operator<=>(const Date&) const = default;

private:
    std::int32_t days_ = 0;
};

}  // namespace burnscan
