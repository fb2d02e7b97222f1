#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "tailboost/types.hpp"

namespace tailboost {

/// A parsed CSV file: a header row plus string cells.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t n_rows() const { return rows.size(); }
    std::size_t n_cols() const { return header.size(); }

    /// Column index by exact header name, or by decimal index string.
    std::size_t column_index(const std::string& name_or_index) const;

    /// Parses one column as doubles; throws InputError naming the first bad cell.
    std::vector<double> numeric_column(std::size_t col) const;
};

CsvTable read_csv(std::istream& in);
CsvTable read_csv(const std::string& path);

/// Shortest-exact decimal encoding capped at 17 significant digits;
/// strtod on the result restores the bits.
std::string format_double(double x);

/// RFC-style field quoting (only when the cell needs it).
std::string csv_escape(const std::string& field);

class CsvWriter {
public:
    explicit CsvWriter(std::ostream& out) : out_(out) {}
    void row(const std::vector<std::string>& cells);

private:
    std::ostream& out_;
};

}  // namespace tailboost
