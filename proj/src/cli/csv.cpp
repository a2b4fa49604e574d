#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "spstack/cli.hpp"

namespace spstack::cli {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') cells.push_back("");
    return cells;
}

bool is_missing(const std::string& cell) {
    if (cell.empty()) return true;
    std::string lower = cell;
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return lower == "na" || lower == "nan" || lower == "null";
}

double parse_cell(const std::string& cell, Index row, const std::string& col) {
    if (is_missing(cell))
        throw std::runtime_error("ingest_csv: missing value in column '" + col + "' at data row " +
                                 std::to_string(row));
    double value = 0.0;
    const char* begin = cell.data();
    const char* end = begin + cell.size();
    const auto res = std::from_chars(begin, end, value);
    if (res.ec != std::errc() || res.ptr != end)
        throw std::runtime_error("ingest_csv: non-numeric cell '" + cell + "' in column '" + col +
                                 "' at data row " + std::to_string(row));
    return value;
}

}  // namespace

IngestResult ingest_csv(const ColumnSpec& spec) {
    if (spec.coord_cols.empty() || spec.coord_cols.size() > 2)
        throw std::invalid_argument("ingest_csv: need 1 or 2 coordinate columns");
    std::ifstream in(spec.path);
    if (!in) throw std::runtime_error("ingest_csv: cannot open '" + spec.path + "'");

    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("ingest_csv: empty file " + spec.path);
    const std::vector<std::string> header = split_line(line);

    auto column_of = [&](const std::string& name) -> Index {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end())
            throw std::runtime_error("ingest_csv: column '" + name + "' not found in " +
                                     spec.path);
        return static_cast<Index>(it - header.begin());
    };

    std::vector<Index> coord_idx, cov_idx;
    for (const auto& c : spec.coord_cols) coord_idx.push_back(column_of(c));
    for (const auto& c : spec.covariate_cols) cov_idx.push_back(column_of(c));
    const bool want_outcome = !spec.outcome_col.empty();
    Index outcome_idx = -1;
    bool has_outcome = false;
    if (want_outcome &&
        std::find(header.begin(), header.end(), spec.outcome_col) != header.end()) {
        outcome_idx = column_of(spec.outcome_col);
        has_outcome = true;
    }

    std::vector<std::vector<double>> rows;
    Index row_number = 0;
    while (std::getline(in, line)) {
        ++row_number;
        if (trim(line).empty()) continue;
        const auto cells = split_line(line);
        if (cells.size() != header.size())
            throw std::runtime_error("ingest_csv: row " + std::to_string(row_number) + " has " +
                                     std::to_string(cells.size()) + " cells, expected " +
                                     std::to_string(header.size()));
        std::vector<double> row;
        for (Index c : coord_idx)
            row.push_back(parse_cell(cells[static_cast<size_t>(c)], row_number,
                                     header[static_cast<size_t>(c)]));
        for (Index c : cov_idx)
            row.push_back(parse_cell(cells[static_cast<size_t>(c)], row_number,
                                     header[static_cast<size_t>(c)]));
        if (has_outcome)
            row.push_back(parse_cell(cells[static_cast<size_t>(outcome_idx)], row_number,
                                     header[static_cast<size_t>(outcome_idx)]));
        rows.push_back(std::move(row));
    }
    const Index n = static_cast<Index>(rows.size());
    if (n == 0) throw std::runtime_error("ingest_csv: no data rows in " + spec.path);

    const Index d = static_cast<Index>(coord_idx.size());
    const Index ncov = static_cast<Index>(cov_idx.size());
    const Index p = ncov + (spec.intercept ? 1 : 0);

    IngestResult out;
    out.has_outcome = has_outcome;
    Matrix coords(n, d);
    out.dataset.X.resize(n, p);
    out.dataset.y = Vector::Zero(n);
    for (Index i = 0; i < n; ++i) {
        const auto& row = rows[static_cast<size_t>(i)];
        for (Index j = 0; j < d; ++j) coords(i, j) = row[static_cast<size_t>(j)];
        Index col = 0;
        if (spec.intercept) out.dataset.X(i, col++) = 1.0;
        for (Index j = 0; j < ncov; ++j)
            out.dataset.X(i, col++) = row[static_cast<size_t>(d + j)];
        if (has_outcome) out.dataset.y(i) = row.back();
    }
    out.dataset.chi = LocationSet(std::move(coords), spec.allow_duplicates);

    if (!spec.allow_duplicates) {
        // Sorted sweep finds exact coordinate duplicates without the n^2 scan.
        std::vector<Index> order(static_cast<size_t>(n));
        for (Index i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
        const Matrix& c = out.dataset.chi.coords;
        std::sort(order.begin(), order.end(), [&](Index a, Index b) {
            for (Index j = 0; j < d; ++j) {
                if (c(a, j) < c(b, j)) return true;
                if (c(a, j) > c(b, j)) return false;
            }
            return false;
        });
        for (Index i = 1; i < n; ++i) {
            if (c.row(order[static_cast<size_t>(i)]) == c.row(order[static_cast<size_t>(i - 1)]))
                throw std::runtime_error(
                    "ingest_csv: duplicate coordinates at data rows " +
                    std::to_string(order[static_cast<size_t>(i - 1)] + 1) + " and " +
                    std::to_string(order[static_cast<size_t>(i)] + 1) +
                    "; coincident locations make the correlation matrix singular (set "
                    "allow_duplicates to accept them under the jitter policy)");
        }
    }
    return out;
}

}  // namespace spstack::cli
