/* Copyright 2026 the dm-testlab authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Strict CSV ingestion: UTF-8, one header row, comma delimiter, '.' decimal
// point, no quoting, no missing values. Every data cell must parse as a
// finite real. Errors carry the offending data-row number (1-based, the
// header is not counted) and the column name, e.g. "row 2, column x1".

#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dml/error.hpp"

namespace dml {

/// A fully parsed numeric CSV file: named columns over a dense value matrix
/// (one row per data row, one column per header entry).
struct CsvTable {
    std::vector<std::string> columns;
    Eigen::MatrixXd values;

    Eigen::Index rows() const { return values.rows(); }

    /// Position of a named column; lists the available names on a miss.
    Eigen::Index column_index(std::string_view name) const {
        for (std::size_t i = 0; i < columns.size(); ++i) {
            if (columns[i] == name) return static_cast<Eigen::Index>(i);
        }
        std::string available;
        for (std::size_t i = 0; i < columns.size(); ++i) {
            if (i > 0) available += ", ";
            available += columns[i];
        }
        throw csv_error("csv: column '" + std::string(name) +
                        "' not found; available columns: " + available);
    }
};

namespace detail::csv {

inline std::string_view trim(std::string_view s) {
    constexpr std::string_view ws = " \t\r";
    const auto begin = s.find_first_not_of(ws);
    if (begin == std::string_view::npos) return {};
    const auto end = s.find_last_not_of(ws);
    return s.substr(begin, end - begin + 1);
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return out;
}

inline std::string cell_coordinates(long row, const std::string& column) {
    return "row " + std::to_string(row) + ", column " + column;
}

inline double parse_cell(std::string_view raw, long row,
                         const std::string& column) {
    const std::string_view cell = trim(raw);
    if (cell.empty()) {
        throw csv_error("csv: missing value at " + cell_coordinates(row, column),
                        row, column);
    }
    double value = 0.0;
    const auto result =
        std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (result.ec != std::errc{} || result.ptr != cell.data() + cell.size()) {
        throw csv_error("csv: cannot parse '" + std::string(cell) +
                            "' as a number at " + cell_coordinates(row, column),
                        row, column);
    }
    if (!std::isfinite(value)) {
        throw csv_error(
            "csv: non-finite value at " + cell_coordinates(row, column), row,
            column);
    }
    return value;
}

}  // namespace detail::csv

/// Reads and parses a CSV file. Trailing blank lines are ignored; interior
/// blank lines, ragged rows, duplicate or empty header names, unparseable or
/// non-finite cells are errors.
inline CsvTable read_csv(const std::string& path) {
    namespace dc = detail::csv;
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw csv_error("csv: cannot open file '" + path + "'");
    }
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    if (!lines.empty() && lines.front().size() >= 3 &&
        lines.front().compare(0, 3, "\xEF\xBB\xBF") == 0) {
        lines.front().erase(0, 3);
    }
    while (!lines.empty() && dc::trim(lines.back()).empty()) {
        lines.pop_back();
    }
    if (lines.empty()) {
        throw csv_error("csv: file '" + path + "' has no header row");
    }

    CsvTable table;
    for (std::string_view field : dc::split_fields(lines.front())) {
        const std::string_view name = dc::trim(field);
        if (name.empty()) {
            throw csv_error("csv: empty column name at header position " +
                            std::to_string(table.columns.size() + 1));
        }
        for (const std::string& seen : table.columns) {
            if (seen == name) {
                throw csv_error("csv: duplicate column '" + std::string(name) +
                                "' in header");
            }
        }
        table.columns.emplace_back(name);
    }

    const auto cols = static_cast<Eigen::Index>(table.columns.size());
    const auto nrows = static_cast<Eigen::Index>(lines.size()) - 1;
    if (nrows < 1) {
        throw csv_error("csv: file '" + path + "' has no data rows");
    }
    table.values.resize(nrows, cols);
    for (Eigen::Index r = 0; r < nrows; ++r) {
        const long row = static_cast<long>(r) + 1;  // data rows count from 1
        const std::string& raw = lines[static_cast<std::size_t>(r) + 1];
        if (dc::trim(raw).empty()) {
            throw csv_error("csv: blank line at row " + std::to_string(row),
                            row, "");
        }
        const std::vector<std::string_view> fields = dc::split_fields(raw);
        if (static_cast<Eigen::Index>(fields.size()) != cols) {
            throw csv_error("csv: row " + std::to_string(row) + " has " +
                                std::to_string(fields.size()) +
                                " fields, expected " + std::to_string(cols),
                            row, "");
        }
        for (Eigen::Index c = 0; c < cols; ++c) {
            table.values(r, c) = dc::parse_cell(
                fields[static_cast<std::size_t>(c)], row,
                table.columns[static_cast<std::size_t>(c)]);
        }
    }
    return table;
}

/// A response vector with its covariate matrix, as ingested from a CSV file.
struct IngestedData {
    Eigen::VectorXd y;
    Eigen::MatrixXd x;  ///< covariate columns in the requested order
};

/// Extracts a response column and an ordered set of covariate columns.
inline IngestedData ingest_csv(const std::string& path,
                               const std::string& response,
                               const std::vector<std::string>& covariates) {
    const CsvTable table = read_csv(path);
    IngestedData out;
    out.y = table.values.col(table.column_index(response));
    out.x.resize(table.rows(), static_cast<Eigen::Index>(covariates.size()));
    for (std::size_t i = 0; i < covariates.size(); ++i) {
        out.x.col(static_cast<Eigen::Index>(i)) =
            table.values.col(table.column_index(covariates[i]));
    }
    return out;
}

}  // namespace dml
