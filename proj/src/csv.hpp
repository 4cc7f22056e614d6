#pragma once

// Minimal CSV helpers shared by the file readers.

#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace mkest::csv {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

inline std::vector<std::string> split(std::string_view line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        fields.emplace_back(trim(line.substr(start, comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return fields;
}

/// A data row with its 1-based line number; comments (#) and blank lines skipped.
struct Row {
    std::size_t line;
    std::vector<std::string> fields;
};

inline std::vector<Row> read_rows(std::istream& in) {
    std::vector<Row> rows;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        const auto t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        rows.push_back({number, split(t)});
    }
    return rows;
}

}  // namespace mkest::csv

#include <charconv>
#include <optional>

namespace mkest::csv {

inline std::optional<double> parse_double(std::string_view s) {
    double value = 0.0;
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, value);
    if (ec != std::errc() || ptr != end) return std::nullopt;
    return value;
}

inline std::optional<long long> parse_int(std::string_view s) {
    long long value = 0;
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, value);
    if (ec != std::errc() || ptr != end) return std::nullopt;
    return value;
}

/// Shortest representation that parses back to the same double.
inline std::string format_double(double x) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, ptr);
}

}  // namespace mkest::csv
