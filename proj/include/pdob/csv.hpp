#pragma once

// Minimal CSV reading/writing with byte-stable numeric formatting (shortest
// round-trip decimals, '\n' line endings, mandatory header row).

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pdob/config.hpp"

namespace pdob {

class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, std::initializer_list<std::string> columns)
        : out_(path, std::ios::binary), column_count_(columns.size()) {
        if (!out_) {
            throw std::runtime_error("csv: cannot open '" + path.string() + "' for writing");
        }
        bool first = true;
        for (const auto& c : columns) {
            if (!first) out_ << ',';
            out_ << c;
            first = false;
        }
        out_ << '\n';
    }

    void row(std::span<const double> values) {
        if (values.size() != column_count_) {
            throw std::invalid_argument("csv: row width does not match header");
        }
        bool first = true;
        for (double v : values) {
            if (!first) out_ << ',';
            out_ << format_number(v);
            first = false;
        }
        out_ << '\n';
    }

    void row(std::initializer_list<double> values) {
        row(std::span<const double>(values.begin(), values.size()));
    }

private:
    std::ofstream out_;
    std::size_t column_count_;
};

/// Reads one named column from a CSV file. Throws with the 1-based line
/// number on malformed rows; an empty file (or missing column) is an error.
inline std::vector<double> read_csv_column(const std::filesystem::path& path,
                                           const std::string& column) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("csv: cannot open '" + path.string() + "' for reading");
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw std::runtime_error("csv: '" + path.string() + "' is empty");
    }
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> headers;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        headers.push_back(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    std::size_t col = headers.size();
    for (std::size_t i = 0; i < headers.size(); ++i) {
        if (headers[i] == column) col = i;
    }
    if (col == headers.size()) {
        throw std::runtime_error("csv: '" + path.string() + "' has no column named '" + column + "'");
    }

    std::vector<double> values;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::size_t field_start = 0;
        std::string field;
        for (std::size_t i = 0; i <= col; ++i) {
            const std::size_t comma = line.find(',', field_start);
            if (i == col) {
                field = line.substr(field_start,
                                    comma == std::string::npos ? std::string::npos : comma - field_start);
            } else if (comma == std::string::npos) {
                throw std::runtime_error("csv: '" + path.string() + "' line " +
                                         std::to_string(line_no) + ": too few fields");
            } else {
                field_start = comma + 1;
            }
        }
        try {
            std::size_t consumed = 0;
            const double v = std::stod(field, &consumed);
            if (consumed != field.size()) throw std::invalid_argument(field);
            values.push_back(v);
        } catch (const std::exception&) {
            throw std::runtime_error("csv: '" + path.string() + "' line " + std::to_string(line_no) +
                                     ": malformed value '" + field + "'");
        }
    }
    if (values.empty()) {
        throw std::runtime_error("csv: '" + path.string() + "' has no data rows");
    }
    return values;
}

}  // namespace pdob
