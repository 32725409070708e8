#ifndef PPGI_CSV_HPP
#define PPGI_CSV_HPP

#include "core.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace ppgi::csv {

inline std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

inline std::vector<std::string> split(std::string_view line, char sep = ',')
{
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        out.emplace_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
        if (pos == std::string_view::npos)
            break;
        start = pos + 1;
    }
    return out;
}

/// Parses a double; nan/inf are parsed (callers decide whether they are valid).
inline bool parse_double(std::string_view s, double& out)
{
    s = trim(s);
    if (s.empty())
        return false;
    if (s.front() == '+')
        s.remove_prefix(1);
    const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

inline bool parse_long(std::string_view s, long long& out)
{
    s = trim(s);
    const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    return !s.empty() && res.ec == std::errc() && res.ptr == s.data() + s.size();
}

/// Numeric table with a named header. Row numbers in errors are 1-based file
/// lines.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
    std::vector<std::size_t> lines;
};

/// Reads a CSV whose header must equal `expected` (case-insensitive, trimmed).
inline Table read_numeric(const std::string& path, const std::vector<std::string>& expected, bool allow_nonfinite = false)
{
    std::ifstream in(path);
    if (!in)
        throw Error(ErrorCode::Io, "cannot open " + path);
    Table t;
    std::string line;
    std::size_t lineno = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty() || trim(line).front() == '#')
            continue;
        auto cells = split(line);
        if (!have_header) {
            for (auto& c : cells)
                for (auto& ch : c)
                    ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
            if (cells != expected) {
                std::string want;
                for (const auto& e : expected)
                    want += (want.empty() ? "" : ",") + e;
                throw Error(ErrorCode::Format, path + ": expected header '" + want + "'");
            }
            t.header = cells;
            have_header = true;
            continue;
        }
        if (cells.size() != expected.size())
            throw Error(ErrorCode::Format, path + ": line " + std::to_string(lineno) + " has " +
                                               std::to_string(cells.size()) + " fields, expected " +
                                               std::to_string(expected.size()));
        std::vector<double> row(cells.size());
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (!parse_double(cells[i], row[i]))
                throw Error(ErrorCode::Format, path + ": line " + std::to_string(lineno) + ": cannot parse '" +
                                                   cells[i] + "'");
            if (!allow_nonfinite && !std::isfinite(row[i]))
                throw Error(ErrorCode::Format, path + ": line " + std::to_string(lineno) + ": non-finite value in column '" +
                                                   expected[i] + "'");
        }
        t.rows.push_back(std::move(row));
        t.lines.push_back(lineno);
    }
    if (!have_header)
        throw Error(ErrorCode::Format, path + ": empty file");
    return t;
}

/// Shortest round-trip formatting, so exported traces reload bit-exactly.
inline std::string fmt(double v)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline std::ofstream open_out(const std::string& path)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw Error(ErrorCode::Io, "cannot write " + path);
    return out;
}

} // namespace ppgi::csv

#endif // PPGI_CSV_HPP
