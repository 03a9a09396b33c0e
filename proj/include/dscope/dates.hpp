#pragma once

#include "dscope/common.hpp"

#include <charconv>
#include <chrono>
#include <cstdio>
#include <string>
#include <string_view>

namespace dscope {

using Date = std::chrono::year_month_day;

namespace detail {

inline bool parse_fixed_int(std::string_view s, std::size_t pos, std::size_t len, int& out) {
    if (pos + len > s.size()) return false;
    for (std::size_t i = pos; i < pos + len; ++i)
        if (s[i] < '0' || s[i] > '9') return false;
    auto [p, ec] = std::from_chars(s.data() + pos, s.data() + pos + len, out);
    return ec == std::errc() && p == s.data() + pos + len;
}

}  // namespace detail

inline constexpr Date kMinDate{std::chrono::year{1900}, std::chrono::January, std::chrono::day{1}};
inline constexpr Date kMaxDate{std::chrono::year{2100}, std::chrono::January, std::chrono::day{1}};

/// Parses "YYYY-MM-DD" or an ISO-8601 timestamp "YYYY-MM-DDTHH:MM[:SS[.fff]][Z|+HH:MM|-HH:MM]".
/// Timestamps are converted to UTC before taking the calendar date.
inline Date parse_date(std::string_view s) {
    const auto fail = [&] { return DataError("invalid ISO-8601 date '" + std::string(s) + "'"); };
    int y = 0, m = 0, d = 0;
    if (!detail::parse_fixed_int(s, 0, 4, y) || s.size() < 10 || s[4] != '-' || s[7] != '-' ||
        !detail::parse_fixed_int(s, 5, 2, m) || !detail::parse_fixed_int(s, 8, 2, d))
        throw fail();
    Date date{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
              std::chrono::day{static_cast<unsigned>(d)}};
    if (!date.ok()) throw fail();
    if (s.size() > 10) {
        if (s[10] != 'T' && s[10] != ' ') throw fail();
        int hh = 0, mm = 0, ss = 0;
        if (!detail::parse_fixed_int(s, 11, 2, hh) || s.size() < 16 || s[13] != ':' ||
            !detail::parse_fixed_int(s, 14, 2, mm))
            throw fail();
        std::size_t pos = 16;
        if (pos < s.size() && s[pos] == ':') {
            if (!detail::parse_fixed_int(s, pos + 1, 2, ss)) throw fail();
            pos += 3;
            if (pos < s.size() && (s[pos] == '.' || s[pos] == ',')) {
                ++pos;
                while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') ++pos;
            }
        }
        int offset_minutes = 0;
        if (pos < s.size()) {
            if (s[pos] == 'Z' && pos + 1 == s.size()) {
                ++pos;
            } else if (s[pos] == '+' || s[pos] == '-') {
                int oh = 0, om = 0;
                if (!detail::parse_fixed_int(s, pos + 1, 2, oh)) throw fail();
                std::size_t next = pos + 3;
                if (next < s.size() && s[next] == ':') ++next;
                if (!detail::parse_fixed_int(s, next, 2, om) || next + 2 != s.size()) throw fail();
                offset_minutes = (s[pos] == '-' ? -1 : 1) * (oh * 60 + om);
                pos = s.size();
            } else {
                throw fail();
            }
        }
        if (pos != s.size() || hh > 23 || mm > 59 || ss > 60) throw fail();
        using namespace std::chrono;
        const auto local = sys_days(date) + hours(hh) + minutes(mm) + seconds(ss);
        const auto utc = local - minutes(offset_minutes);
        date = Date(floor<days>(utc));
    }
    return date;
}

inline std::string format_date(const Date& d) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()), static_cast<unsigned>(d.month()),
                  static_cast<unsigned>(d.day()));
    return buf;
}

inline bool date_in_supported_range(const Date& d) { return d >= kMinDate && d <= kMaxDate; }

inline Date next_day(const Date& d) { return Date(std::chrono::sys_days(d) + std::chrono::days(1)); }

inline long days_between(const Date& a, const Date& b) {
    return (std::chrono::sys_days(b) - std::chrono::sys_days(a)).count();
}

}  // namespace dscope
