#pragma once

#include <charconv>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

#include "litfield/error.hpp"

namespace litfield {

inline std::string csv_escape(std::string_view s) {
    if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

// RFC 4180 reader. Lines starting with '#' outside quotes are skipped.
inline std::vector<std::vector<std::string>> read_csv(std::istream& in) {
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string cell;
    bool quoted = false, at_line_start = true, any = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (at_line_start && !quoted && c == '#') {
            while (i < text.size() && text[i] != '\n') ++i;
            continue;
        }
        at_line_start = false;
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    cell.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cell.push_back(c);
            }
            continue;
        }
        switch (c) {
            case '"': quoted = true; any = true; break;
            case ',': row.push_back(std::move(cell)); cell.clear(); any = true; break;
            case '\r': break;
            case '\n':
                if (any || !cell.empty()) {
                    row.push_back(std::move(cell));
                    rows.push_back(std::move(row));
                }
                cell.clear();
                row.clear();
                any = false;
                at_line_start = true;
                break;
            default: cell.push_back(c); any = true;
        }
    }
    if (quoted) throw ParseError("unterminated quoted CSV cell", text.size());
    if (any || !cell.empty()) {
        row.push_back(std::move(cell));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline double parse_double(std::string_view s) {
    double v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) throw FormatError("not a number: '" + std::string(s) + "'");
    return v;
}

}  // namespace litfield
