#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "eemdx/error.hpp"

namespace eemdx {

/// Shortest text that parses back to exactly `v`; "NA" for non-finite values.
inline std::string format_number(double v) {
    if (!std::isfinite(v)) return "NA";
    if (v == 0.0) return "0";  // also folds -0
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

/// Splits one CSV line on commas (no quoting; the toolkit's schemas never need it).
inline std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

/// Parses a finite real; throws ParseError mentioning `line`.
inline double parse_number(const std::string& text, std::size_t line, std::string_view what = "number") {
    double v = 0.0;
    const char* first = text.data();
    const char* last = first + text.size();
    if (!text.empty() && *first == '+') ++first;
    const auto r = std::from_chars(first, last, v);
    if (text.empty() || r.ec != std::errc{} || r.ptr != last || !std::isfinite(v)) {
        throw ParseError("invalid " + std::string(what) + " '" + text + "'", line);
    }
    return v;
}

/// A table read from a CSV file: header names plus raw rows with their line numbers.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;

    std::size_t column(std::string_view name) const {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name) return i;
        }
        throw ParseError("missing column '" + std::string(name) + "'", 1);
    }
};

inline CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path + "'");
    CsvTable table;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        auto cells = split_csv_line(line);
        if (table.header.empty()) {
            table.header = std::move(cells);
            continue;
        }
        if (cells.size() != table.header.size()) {
            throw ParseError(path + ": expected " + std::to_string(table.header.size()) + " fields, got " +
                                 std::to_string(cells.size()),
                             lineno);
        }
        table.rows.push_back(std::move(cells));
        table.line_numbers.push_back(lineno);
    }
    if (table.header.empty()) throw ParseError(path + ": empty file", 0);
    return table;
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + path + "'");
    out << content;
    if (!out) throw Error("failed writing '" + path + "'");
}

}  // namespace eemdx
