#pragma once
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>
#include <gamsel/types.hpp>

namespace gamsel {

/// Numeric table with a header row.
struct CsvTable
{
    std::vector<std::string> header;
    Mat data; // rows x header.size()

    Index column(const std::string& name) const
    {
        for (std::size_t c = 0; c < header.size(); ++c)
            if (header[c] == name) return static_cast<Index>(c);
        return -1;
    }
};

namespace detail {

inline std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

// Comma split with optional double quotes ("" escapes a quote).
inline std::vector<std::string> split_csv_line(const std::string& line, std::size_t line_no)
{
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false, was_quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += ch;
            }
        } else if (ch == '"') {
            quoted = was_quoted = true;
        } else if (ch == ',') {
            out.push_back(was_quoted ? cur : trim(cur));
            cur.clear();
            was_quoted = false;
        } else {
            cur += ch;
        }
    }
    if (quoted) throw FormatError("csv line " + std::to_string(line_no) + ": unterminated quote");
    out.push_back(was_quoted ? cur : trim(cur));
    return out;
}

} // namespace detail

/**
 * Parse a comma-separated table. The first non-empty line is the header;
 * every other cell must parse as a finite number. NA, empty and non-finite
 * cells are rejected with their line and column in the message.
 */
inline CsvTable read_csv(std::istream& in)
{
    CsvTable t;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
        if (!detail::trim(line).empty()) break;
    }
    if (detail::trim(line).empty()) throw FormatError("csv: missing header row");
    t.header = detail::split_csv_line(line, line_no);
    for (std::size_t c = 0; c < t.header.size(); ++c) {
        if (t.header[c].empty()) throw FormatError("csv: empty column name in header (column " + std::to_string(c + 1) + ")");
        for (std::size_t d = 0; d < c; ++d)
            if (t.header[d] == t.header[c]) throw FormatError("csv: duplicate column name '" + t.header[c] + "'");
    }
    const std::size_t ncol = t.header.size();
    std::vector<double> values;
    Index rows = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        const auto cells = detail::split_csv_line(line, line_no);
        if (cells.size() != ncol) {
            throw FormatError("csv line " + std::to_string(line_no) + ": expected " + std::to_string(ncol)
                              + " fields, found " + std::to_string(cells.size()));
        }
        for (std::size_t c = 0; c < ncol; ++c) {
            const std::string& s = cells[c];
            auto where = [&] {
                return "csv line " + std::to_string(line_no) + ", column " + std::to_string(c + 1) + " ('" + t.header[c]
                       + "')";
            };
            double v = 0.0;
            const char* b = s.data();
            const char* e = s.data() + s.size();
            if (!s.empty() && *b == '+') ++b;
            const auto res = std::from_chars(b, e, v);
            if (s.empty() || res.ec != std::errc() || res.ptr != e) {
                throw FormatError(where() + ": cannot parse '" + s + "' as a number");
            }
            if (!std::isfinite(v)) throw FormatError(where() + ": non-finite value '" + s + "'");
            values.push_back(v);
        }
        ++rows;
    }
    t.data.resize(rows, static_cast<Index>(ncol));
    for (Index i = 0; i < rows; ++i)
        for (Index c = 0; c < static_cast<Index>(ncol); ++c) t.data(i, c) = values[i * ncol + c];
    return t;
}

inline CsvTable read_csv_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open '" + path + "'");
    return read_csv(in);
}

/// Shortest text that reads back to the same double.
inline std::string format_double(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string csv_quote(const std::string& s)
{
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    return out + "\"";
}

inline void write_csv(std::ostream& out, const std::vector<std::string>& header, const Mat& data)
{
    if (data.cols() != static_cast<Index>(header.size()) && data.rows() > 0) {
        throw InvalidInput("write_csv: header and data widths differ");
    }
    for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << csv_quote(header[c]);
    out << '\n';
    for (Index i = 0; i < data.rows(); ++i) {
        for (Index c = 0; c < data.cols(); ++c) out << (c ? "," : "") << format_double(data(i, c));
        out << '\n';
    }
}

} // namespace gamsel
