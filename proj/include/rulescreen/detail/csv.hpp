#pragma once

#include "rulescreen/error.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace rulescreen::detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

/// Splits one CSV line on commas. Quoted fields are not supported; the
/// formats read here never need them.
inline std::vector<std::string_view> split_csv_line(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(trim(line.substr(start)));
            break;
        }
        out.push_back(trim(line.substr(start, pos - start)));
        start = pos + 1;
    }
    return out;
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(std::string_view name, const std::string& source) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name)
                return i;
        throw Error(Errc::ParseError, source + ": missing column '" + std::string(name) + "'");
    }
};

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(Errc::IoError, "cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline CsvTable parse_csv(std::string_view text, const std::string& source) {
    CsvTable table;
    std::size_t pos = 0;
    std::size_t line_no = 0;
    while (pos < text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos)
            end = text.size();
        const auto line = trim(text.substr(pos, end - pos));
        pos = end + 1;
        ++line_no;
        if (line.empty())
            continue;
        auto fields = split_csv_line(line);
        std::vector<std::string> row(fields.begin(), fields.end());
        if (table.header.empty()) {
            table.header = std::move(row);
            continue;
        }
        if (row.size() != table.header.size())
            throw Error(Errc::ParseError, source + ":" + std::to_string(line_no) + ": expected " +
                                              std::to_string(table.header.size()) + " fields, got " +
                                              std::to_string(row.size()));
        table.rows.push_back(std::move(row));
    }
    if (table.header.empty())
        throw Error(Errc::ParseError, source + ": empty file");
    return table;
}

inline CsvTable read_csv(const std::string& path) { return parse_csv(read_file(path), path); }

inline bool parse_double(std::string_view text, double& out) {
    text = trim(text);
    if (text.empty())
        return false;
    if (text.front() == '+')
        text.remove_prefix(1);
    const auto* first = text.data();
    const auto* last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc{} && ptr == last;
}

inline double to_double(std::string_view text, const std::string& context) {
    double v = 0.0;
    if (!parse_double(text, v))
        throw Error(Errc::ParseError, context + ": not a number '" + std::string(text) + "'");
    return v;
}

/// Shortest representation that round-trips.
inline std::string format_double(double v) {
    if (std::isnan(v))
        return "";
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error(Errc::IoError, "cannot write '" + path + "'");
    out << content;
}

} // namespace rulescreen::detail
