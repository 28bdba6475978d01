#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "preftrade/common.hpp"

namespace preftrade::csv {

inline std::vector<std::string_view> split(std::string_view line, char sep = ',') {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = line.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

struct Row {
    std::vector<std::string_view> fields;
    int line_no = 0;  // 1-based, header is line 1
};

// Parses CSV text with a mandatory header row. No quoting: none of the data
// formats here embed separators. Blank lines are skipped, a trailing newline
// is optional, and CRLF is tolerated.
class Table {
public:
    Table(std::string text, const std::string& module, const std::string& filename,
          const std::vector<std::string>& expected_header)
        : text_(std::move(text)) {
        std::string_view rest(text_);
        int line_no = 0;
        bool saw_header = false;
        while (!rest.empty()) {
            std::size_t pos = rest.find('\n');
            std::string_view line = pos == std::string_view::npos ? rest : rest.substr(0, pos);
            rest = pos == std::string_view::npos ? std::string_view{} : rest.substr(pos + 1);
            ++line_no;
            if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
            if (line.empty()) continue;
            auto fields = split(line);
            if (!saw_header) {
                saw_header = true;
                if (fields.size() != expected_header.size()) {
                    fail(module, filename + ":1: expected " +
                                     std::to_string(expected_header.size()) + " header fields, got " +
                                     std::to_string(fields.size()));
                }
                for (std::size_t i = 0; i < fields.size(); ++i) {
                    if (fields[i] != expected_header[i]) {
                        fail(module, filename + ":1: expected header field '" + expected_header[i] +
                                         "', got '" + std::string(fields[i]) + "'");
                    }
                }
                continue;
            }
            if (fields.size() != expected_header.size()) {
                fail(module, filename + ":" + std::to_string(line_no) + ": expected " +
                                 std::to_string(expected_header.size()) + " fields, got " +
                                 std::to_string(fields.size()));
            }
            rows_.push_back(Row{std::move(fields), line_no});
        }
        if (!saw_header) fail(module, filename + ": empty file, header row required");
    }

    const std::vector<Row>& rows() const { return rows_; }

private:
    std::string text_;  // rows_ hold views into this buffer
    std::vector<Row> rows_;
};

inline double need_double(const Row& row, std::size_t i, const std::string& module,
                          const std::string& filename) {
    auto v = parse_double(row.fields[i]);
    if (!v) {
        fail(module, filename + ":" + std::to_string(row.line_no) + ": bad number '" +
                         std::string(row.fields[i]) + "'");
    }
    return *v;
}

inline std::int64_t need_int(const Row& row, std::size_t i, const std::string& module,
                             const std::string& filename) {
    auto v = parse_int(row.fields[i]);
    if (!v) {
        fail(module, filename + ":" + std::to_string(row.line_no) + ": bad integer '" +
                         std::string(row.fields[i]) + "'");
    }
    return *v;
}

inline Day need_day(const Row& row, std::size_t i, const std::string& module,
                    const std::string& filename) {
    auto v = parse_day(row.fields[i]);
    if (!v) {
        fail(module, filename + ":" + std::to_string(row.line_no) + ": bad date '" +
                         std::string(row.fields[i]) + "'");
    }
    return *v;
}

inline Asset need_asset(const Row& row, std::size_t i, const std::string& module,
                        const std::string& filename) {
    auto v = parse_asset(row.fields[i]);
    if (!v) {
        fail(module, filename + ":" + std::to_string(row.line_no) + ": unknown asset '" +
                         std::string(row.fields[i]) + "'");
    }
    return *v;
}

}  // namespace preftrade::csv
