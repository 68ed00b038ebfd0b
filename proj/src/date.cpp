#include "burnscan/date.hpp"

#include <charconv>
#include <cstdio>

#include "burnscan/errors.hpp"

namespace burnscan {

Date Date::from_ymd(int year, unsigned month, unsigned day) {
    const std::chrono::year_month_day ymd{std::chrono::year{year}, std::chrono::month{month},
                                          std::chrono::day{day}};
    if (!ymd.ok()) {
        throw FormatError("invalid calendar date");
    }
    return Date(std::chrono::sys_days{ymd});
}

Date Date::parse(std::string_view text) {
    int parts[3] = {0, 0, 0};
    std::size_t pos = 0;
    for (int i = 0; i < 3; ++i) {
        const std::size_t end = (i < 2) ? text.find('-', pos) : text.size();
        if (end == std::string_view::npos || end == pos) {
            throw FormatError("expected YYYY-MM-DD, got '" + std::string(text) + "'");
        }
        const auto field = text.substr(pos, end - pos);
        auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), parts[i]);
        if (ec != std::errc() || ptr != field.data() + field.size()) {
            throw FormatError("expected YYYY-MM-DD, got '" + std::string(text) + "'");
        }
        pos = end + 1;
    }
    if (parts[1] < 1 || parts[2] < 1) {
        throw FormatError("invalid calendar date '" + std::string(text) + "'");
    }
    return from_ymd(parts[0], static_cast<unsigned>(parts[1]), static_cast<unsigned>(parts[2]));
}

std::string Date::to_string() const {
    const std::chrono::year_month_day ymd{std::chrono::sys_days{std::chrono::days{days_}}};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
}

}  // namespace burnscan
