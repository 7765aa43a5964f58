#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "cfcast/errors.hpp"
#include "cfcast/series.hpp"

namespace cfcast {

/// Shortest decimal representation that round-trips the double exactly.
inline std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

/// Writes `content` to `path` atomically: the bytes land in a temporary file
/// in the same directory which is then renamed over the target.
inline void write_text_atomic(const std::filesystem::path& path, std::string_view content) {
    std::error_code ec;
    const auto dir = path.parent_path();
    if (!dir.empty()) {
        std::filesystem::create_directories(dir, ec);
        if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
    }
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open " + tmp + " for writing");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw IoError("write failed for " + tmp);
    }
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot rename " + tmp + " to " + path.string() + ": " + ec.message());
}

namespace csv {

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(std::string_view name) const {
        for (size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name) return static_cast<int>(i);
        }
        return -1;
    }
};

inline std::vector<std::string> split_line(std::string_view line) {
    std::vector<std::string> fields;
    size_t begin = 0;
    while (true) {
        const size_t comma = line.find(',', begin);
        std::string_view f = comma == std::string_view::npos ? line.substr(begin)
                                                             : line.substr(begin, comma - begin);
        // trim surrounding whitespace
        while (!f.empty() && (f.front() == ' ' || f.front() == '\t')) f.remove_prefix(1);
        while (!f.empty() && (f.back() == ' ' || f.back() == '\t' || f.back() == '\r')) {
            f.remove_suffix(1);
        }
        fields.emplace_back(f);
        if (comma == std::string_view::npos) break;
        begin = comma + 1;
    }
    return fields;
}

/// Reads a whole comma-separated file. First row is the header. No quoting
/// support; the formats this toolkit reads and writes never need it.
inline Table read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    Table t;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
        auto fields = split_line(line);
        if (first) {
            t.header = std::move(fields);
            first = false;
        } else {
            t.rows.push_back(std::move(fields));
        }
    }
    if (first) throw DataError("empty CSV file " + path.string());
    return t;
}

inline std::string join_row(const std::vector<std::string>& fields) {
    std::string out;
    for (size_t i = 0; i < fields.size(); ++i) {
        if (i) out.push_back(',');
        out += fields[i];
    }
    out.push_back('\n');
    return out;
}

} // namespace csv

namespace detail {

inline std::string normalize_header(std::string_view name) {
    std::string key;
    key.reserve(name.size());
    for (char c : name) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
        if (c == '.') c = '_';
        key.push_back(c);
    }
    return key;
}

} // namespace detail

/// Loads one variable from a daily CSV file. The header must contain a
/// "date" column (ISO-8601 values) and a column for the requested variable;
/// name matching is case-insensitive and treats '.' as '_'. Rows may appear
/// in any order; days absent from the file inside [first, last] become
/// missing entries, as do empty cells. Duplicate dates and negative
/// concentrations are rejected.
inline TimeSeries load_csv(const std::filesystem::path& path, Variable variable) {
    const csv::Table table = csv::read_file(path);

    int date_col = -1;
    int var_col = -1;
    for (size_t i = 0; i < table.header.size(); ++i) {
        const std::string key = detail::normalize_header(table.header[i]);
        if (key == "date") date_col = static_cast<int>(i);
        if (key == variable_name(variable)) var_col = static_cast<int>(i);
    }
    if (date_col < 0) throw DataError(path.string() + ": header has no \"date\" column");
    if (var_col < 0) {
        throw DataError(path.string() + ": header has no \"" +
                        std::string(variable_name(variable)) + "\" column");
    }

    std::map<Date, double> by_date;
    size_t line_no = 1; // header is line 1
    for (const auto& row : table.rows) {
        ++line_no;
        if (static_cast<size_t>(std::max(date_col, var_col)) >= row.size()) {
            throw DataError(path.string() + ":" + std::to_string(line_no) +
                            ": row has too few fields");
        }
        const auto date = Date::parse(row[static_cast<size_t>(date_col)]);
        if (!date) {
            throw DataError(path.string() + ":" + std::to_string(line_no) +
                            ": unparseable date \"" + row[static_cast<size_t>(date_col)] + "\"");
        }
        const std::string& cell = row[static_cast<size_t>(var_col)];
        double value = TimeSeries::kMissing;
        if (!cell.empty()) {
            const char* begin = cell.data();
            const char* end = begin + cell.size();
            const auto res = std::from_chars(begin, end, value);
            if (res.ec != std::errc{} || res.ptr != end) {
                throw DataError(path.string() + ":" + std::to_string(line_no) +
                                ": unparseable value \"" + cell + "\"");
            }
            if (!std::isfinite(value) || value < 0.0) {
                throw DataError(path.string() + ":" + std::to_string(line_no) +
                                ": negative or non-finite concentration " + cell);
            }
        }
        if (by_date.count(*date)) {
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": duplicate date " +
                            date->to_string());
        }
        by_date.emplace(*date, value);
    }
    size_t present = 0;
    for (const auto& [d, v] : by_date) present += std::isnan(v) ? 0 : 1;
    if (present < 2) {
        throw DataError(path.string() + ": column \"" + std::string(variable_name(variable)) +
                        "\" has fewer than 2 observed values");
    }

    const Date first = by_date.begin()->first;
    const Date last = by_date.rbegin()->first;
    std::vector<double> values(static_cast<size_t>(last - first) + 1, TimeSeries::kMissing);
    for (const auto& [d, v] : by_date) values[static_cast<size_t>(d - first)] = v;
    return TimeSeries(variable, first, std::move(values));
}

} // namespace cfcast
