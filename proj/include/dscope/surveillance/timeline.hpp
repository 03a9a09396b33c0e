#pragma once

#include "dscope/common.hpp"
#include "dscope/dates.hpp"
#include "dscope/taxonomy.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace dscope {

inline constexpr int kUnclassifiedLabel = category_index(Category::Unclassified);

/// One day of the timeline. `support` counts classified tweets and is the denominator of
/// `proportions`; tweets labeled Unclassified are tallied separately.
struct DailyDistribution {
    Date date;
    std::array<double, kNumCategories> proportions{};
    std::uint64_t support = 0;
    std::uint64_t unclassified = 0;
};

struct TimelineSeries {
    std::vector<DailyDistribution> days;

    /// Throws unless dates increase by exactly one day.
    void check_contiguous() const {
        for (std::size_t i = 1; i < days.size(); ++i) {
            if (days_between(days[i - 1].date, days[i].date) != 1) {
                throw DataError("timeline is not contiguous at " + format_date(days[i].date));
            }
        }
    }
};

/// Streaming per-day counter over an inclusive date range.
class DailyAggregator {
public:
    DailyAggregator(Date first, Date last) : first_(first) {
        if (!first.ok() || !last.ok()) throw UsageError("invalid aggregation date range");
        const long n = days_between(first, last) + 1;
        if (n < 1) throw UsageError("aggregation range ends before it starts: " + format_date(first) + " > " + format_date(last));
        counts_.assign(static_cast<std::size_t>(n), {});
        unclassified_.assign(static_cast<std::size_t>(n), 0);
    }

    /// Adds one tweet. Returns false (and counts it as skipped) when the date is outside the range.
    bool add(const Date& date, int label) {
        const long d = days_between(first_, date);
        if (d < 0 || d >= static_cast<long>(counts_.size())) {
            ++skipped_;
            return false;
        }
        if (label == kUnclassifiedLabel) {
            ++unclassified_[static_cast<std::size_t>(d)];
        } else if (label >= 0 && label < kNumCategories) {
            ++counts_[static_cast<std::size_t>(d)][static_cast<std::size_t>(label)];
        } else {
            throw DataError("label " + std::to_string(label) + " is not a discourse category");
        }
        return true;
    }

    std::uint64_t skipped() const { return skipped_; }

    TimelineSeries finish() const {
        TimelineSeries s;
        Date day = first_;
        for (std::size_t i = 0; i < counts_.size(); ++i, day = next_day(day)) {
            DailyDistribution dd;
            dd.date = day;
            dd.unclassified = unclassified_[i];
            for (auto c : counts_[i]) dd.support += c;
            if (dd.support > 0) {
                for (int k = 0; k < kNumCategories; ++k) {
                    dd.proportions[static_cast<std::size_t>(k)] =
                        static_cast<double>(counts_[i][static_cast<std::size_t>(k)]) / static_cast<double>(dd.support);
                }
            }
            s.days.push_back(dd);
        }
        return s;
    }

private:
    Date first_;
    std::vector<std::array<std::uint64_t, kNumCategories>> counts_;
    std::vector<std::uint64_t> unclassified_;
    std::uint64_t skipped_ = 0;
};

/// Trailing mean; the first window-1 outputs average over the available prefix.
inline std::vector<double> rolling_average(const std::vector<double>& values, int window) {
    if (window < 1) throw UsageError("rolling window must be >= 1");
    std::vector<double> out(values.size());
    const auto w = static_cast<std::size_t>(window);
    for (std::size_t i = 0; i < values.size(); ++i) {
        const std::size_t lo = i + 1 >= w ? i + 1 - w : 0;
        double s = 0.0;
        for (std::size_t j = lo; j <= i; ++j) s += values[j];
        out[i] = s / static_cast<double>(i - lo + 1);
    }
    return out;
}

/// Smooths a timeline: each day's proportions become the trailing mean over the days of
/// its window that have support, so smoothed vectors still sum to 1. Support counts are
/// left unchanged.
inline TimelineSeries rolling_average(const TimelineSeries& series, int window) {
    if (window < 1) throw UsageError("rolling window must be >= 1");
    TimelineSeries out = series;
    const auto w = static_cast<std::size_t>(window);
    for (std::size_t i = 0; i < series.days.size(); ++i) {
        const std::size_t lo = i + 1 >= w ? i + 1 - w : 0;
        std::array<double, kNumCategories> acc{};
        std::size_t n = 0;
        for (std::size_t j = lo; j <= i; ++j) {
            if (series.days[j].support == 0) continue;
            for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += series.days[j].proportions[k];
            ++n;
        }
        for (std::size_t k = 0; k < acc.size(); ++k) out.days[i].proportions[k] = n ? acc[k] / static_cast<double>(n) : 0.0;
    }
    return out;
}

enum class ReportFormat { csv, json };

inline ReportFormat parse_report_format(std::string_view s) {
    if (s == "csv") return ReportFormat::csv;
    if (s == "json") return ReportFormat::json;
    throw UsageError("unknown report format '" + std::string(s) + "' (expected csv or json)");
}

inline std::string format_fixed6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

inline std::string timeline_csv(const TimelineSeries& s) {
    std::string out = "date";
    for (int k = 0; k < kNumCategories; ++k) out += "," + std::string(category_name(category_from_index(k)));
    out += ",support\n";
    for (const auto& d : s.days) {
        out += format_date(d.date);
        for (double p : d.proportions) out += "," + format_fixed6(p);
        out += "," + std::to_string(d.support) + "\n";
    }
    return out;
}

inline std::string timeline_json(const TimelineSeries& s) {
    nlohmann::ordered_json j;
    nlohmann::ordered_json cats = nlohmann::ordered_json::array();
    for (int k = 0; k < kNumCategories; ++k) cats.push_back(category_name(category_from_index(k)));
    j["categories"] = cats;
    nlohmann::ordered_json days = nlohmann::ordered_json::array();
    for (const auto& d : s.days) {
        nlohmann::ordered_json row;
        row["date"] = format_date(d.date);
        nlohmann::ordered_json props;
        for (int k = 0; k < kNumCategories; ++k) {
            // Same rounding as the CSV so both renderings carry identical values.
            props[std::string(category_name(category_from_index(k)))] =
                nlohmann::ordered_json::parse(format_fixed6(d.proportions[static_cast<std::size_t>(k)]));
        }
        row["proportions"] = props;
        row["support"] = d.support;
        row["unclassified"] = d.unclassified;
        days.push_back(row);
    }
    j["days"] = days;
    return j.dump(2) + "\n";
}

inline void emit_report(const TimelineSeries& s, ReportFormat fmt, const std::string& path) {
    s.check_contiguous();
    const std::string body = fmt == ReportFormat::csv ? timeline_csv(s) : timeline_json(s);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open report '" + path + "' for writing");
    out << body;
    if (!out) throw DataError("write failure on report '" + path + "'");
}

inline TimelineSeries parse_timeline_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw DataError("report CSV is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string expected = "date";
    for (int k = 0; k < kNumCategories; ++k) expected += "," + std::string(category_name(category_from_index(k)));
    expected += ",support";
    if (line != expected) throw DataError("report CSV header mismatch: '" + line + "'");
    TimelineSeries s;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != static_cast<std::size_t>(kNumCategories) + 2) {
            throw DataError("report CSV line " + std::to_string(lineno) + ": expected " + std::to_string(kNumCategories + 2) + " cells");
        }
        DailyDistribution d;
        try {
            d.date = parse_date(cells[0]);
            for (int k = 0; k < kNumCategories; ++k) d.proportions[static_cast<std::size_t>(k)] = std::stod(cells[static_cast<std::size_t>(k) + 1]);
            d.support = std::stoull(cells.back());
        } catch (const std::logic_error& e) {
            throw DataError("report CSV line " + std::to_string(lineno) + ": bad value (" + e.what() + ")");
        }
        s.days.push_back(d);
    }
    return s;
}

inline TimelineSeries parse_timeline_json(std::istream& in) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError(std::string("report JSON is malformed: ") + e.what());
    }
    TimelineSeries s;
    for (const auto& row : j.at("days")) {
        DailyDistribution d;
        d.date = parse_date(row.at("date").get<std::string>());
        for (int k = 0; k < kNumCategories; ++k) {
            d.proportions[static_cast<std::size_t>(k)] = row.at("proportions").at(std::string(category_name(category_from_index(k)))).get<double>();
        }
        d.support = row.at("support").get<std::uint64_t>();
        d.unclassified = row.value("unclassified", std::uint64_t{0});
        s.days.push_back(d);
    }
    return s;
}

inline TimelineSeries parse_report(const std::string& path, ReportFormat fmt) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open report '" + path + "'");
    return fmt == ReportFormat::csv ? parse_timeline_csv(in) : parse_timeline_json(in);
}

}  // namespace dscope
