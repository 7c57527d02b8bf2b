#pragma once

#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "raceline/common.hpp"

namespace raceline {

// Comma-separated text with one header row. Leading '#' lines are comments
// (used to embed run metadata); fields must not contain commas or quotes.
struct TextTable {
    std::vector<std::string> comments;
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    size_t col(const std::string& name) const {
        for (size_t i = 0; i < columns.size(); ++i)
            if (columns[i] == name) return i;
        throw std::runtime_error("schema error: missing column '" + name + "'");
    }

    bool has_col(const std::string& name) const {
        for (const auto& c : columns)
            if (c == name) return true;
        return false;
    }
};

namespace detail {
inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    size_t start = 0;
    for (;;) {
        size_t pos = line.find(',', start);
        if (pos == std::string::npos) {
            out.push_back(trim(line.substr(start)));
            return out;
        }
        out.push_back(trim(line.substr(start, pos - start)));
        start = pos + 1;
    }
}
}  // namespace detail

inline TextTable read_table(std::istream& in) {
    TextTable t;
    std::string line;
    bool have_header = false;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string s = trim(line);
        if (s.empty()) continue;
        if (s[0] == '#') {
            t.comments.push_back(trim(s.substr(1)));
            continue;
        }
        auto fields = detail::split_csv(s);
        if (!have_header) {
            t.columns = std::move(fields);
            have_header = true;
            continue;
        }
        if (fields.size() != t.columns.size())
            throw std::runtime_error(strprintf(
                "schema error: line %zu has %zu fields, expected %zu", line_no,
                fields.size(), t.columns.size()));
        t.rows.push_back(std::move(fields));
    }
    if (!have_header) throw std::runtime_error("schema error: empty table");
    return t;
}

inline void write_table(std::ostream& out, const TextTable& t) {
    for (const auto& c : t.comments) out << "# " << c << "\n";
    for (size_t i = 0; i < t.columns.size(); ++i)
        out << t.columns[i] << (i + 1 < t.columns.size() ? "," : "\n");
    for (const auto& row : t.rows)
        for (size_t i = 0; i < row.size(); ++i)
            out << row[i] << (i + 1 < row.size() ? "," : "\n");
}

inline double parse_double(const std::string& s, const char* what, size_t row) {
    try {
        size_t used = 0;
        double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error(
            strprintf("schema error: row %zu: bad %s value '%s'", row, what, s.c_str()));
    }
}

inline long parse_int(const std::string& s, const char* what, size_t row) {
    try {
        size_t used = 0;
        long v = std::stol(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error(
            strprintf("schema error: row %zu: bad %s value '%s'", row, what, s.c_str()));
    }
}

}  // namespace raceline
