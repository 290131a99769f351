#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "xagg/common.hpp"

namespace xagg::csv {

using Record = std::vector<std::string>;

/// Reads one RFC-4180 record. Returns false at end of input.
/// Quoted fields may contain separators, doubled quotes and line breaks.
inline bool read_record(std::istream& in, Record& out, char sep = ',') {
    out.clear();
    if (in.peek() == std::char_traits<char>::eof()) return false;
    std::string field;
    bool quoted = false;
    bool any = false;
    char ch;
    while (in.get(ch)) {
        any = true;
        if (quoted) {
            if (ch == '"') {
                if (in.peek() == '"') {
                    in.get(ch);
                    field.push_back('"');
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(ch);
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == sep) {
            out.push_back(std::move(field));
            field.clear();
        } else if (ch == '\r') {
            if (in.peek() == '\n') in.get(ch);
            break;
        } else if (ch == '\n') {
            break;
        } else {
            field.push_back(ch);
        }
    }
    if (!any) return false;
    out.push_back(std::move(field));
    return true;
}

inline std::vector<Record> read_file(const std::filesystem::path& path, char sep = ',') {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path.string());
    std::vector<Record> rows;
    Record rec;
    while (read_record(in, rec, sep)) {
        if (rec.size() == 1 && rec[0].empty()) continue;  // blank line
        rows.push_back(rec);
    }
    return rows;
}

inline std::string quote(std::string_view field) {
    if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

/// Shortest decimal representation that round-trips to the same double.
inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc{}) return "nan";
    return std::string(buf, end);
}

/// Fixed-point formatting used for human-facing summaries.
inline std::string format_fixed(double v, int decimals) {
    if (std::isnan(v)) return "N/A";
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, decimals);
    if (ec != std::errc{}) return "N/A";
    return std::string(buf, end);
}

inline std::optional<double> parse_double(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    if (s.empty()) return std::nullopt;
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

inline double require_double(std::string_view s, std::string_view what) {
    if (s == "nan") return std::nan("");
    auto v = parse_double(s);
    if (!v) throw InputError("bad number '" + std::string(s) + "' in " + std::string(what));
    return *v;
}

/// Accumulates records and writes them with '\n' line endings.
class Writer {
public:
    void row(const Record& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) buf_ << ',';
            buf_ << quote(fields[i]);
        }
        buf_ << '\n';
    }
    std::string str() const { return buf_.str(); }
    void save(const std::filesystem::path& path) const {
        if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
        std::ofstream out(path, std::ios::binary);
        if (!out) throw RuntimeFailure("cannot write " + path.string());
        out << buf_.str();
    }

private:
    std::ostringstream buf_;
};

/// Header-addressed view over a parsed CSV file.
class Table {
public:
    explicit Table(std::vector<Record> rows) {
        if (rows.empty()) throw InputError("csv: missing header");
        header_ = std::move(rows.front());
        rows.erase(rows.begin());
        rows_ = std::move(rows);
    }
    static Table load(const std::filesystem::path& path) { return Table(read_file(path)); }

    std::size_t column(std::string_view name) const {
        for (std::size_t i = 0; i < header_.size(); ++i)
            if (header_[i] == name) return i;
        throw InputError("csv: missing column '" + std::string(name) + "'");
    }
    const Record& header() const { return header_; }
    const std::vector<Record>& rows() const { return rows_; }

private:
    Record header_;
    std::vector<Record> rows_;
};

}  // namespace xagg::csv
