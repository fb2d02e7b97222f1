#include "tailboost/csv.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace tailboost {

namespace {

// Splits one physical record; handles quoted fields with doubled quotes.
// The reader does not support embedded newlines (the formats here never
// produce them).
std::vector<std::string> split_record(const std::string& line, std::size_t line_no) {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"' && field.empty()) {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else {
            field += c;
        }
    }
    if (quoted) {
        throw InputError("csv: unterminated quote on line " + std::to_string(line_no));
    }
    fields.push_back(std::move(field));
    return fields;
}

}  // namespace

CsvTable read_csv(std::istream& in) {
    CsvTable table;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() && table.header.empty()) continue;
        auto fields = split_record(line, line_no);
        if (table.header.empty()) {
            table.header = std::move(fields);
        } else {
            if (fields.size() != table.header.size()) {
                throw InputError("csv: line " + std::to_string(line_no) + " has " +
                                 std::to_string(fields.size()) + " fields, expected " +
                                 std::to_string(table.header.size()));
            }
            table.rows.push_back(std::move(fields));
        }
    }
    if (table.header.empty()) throw InputError("csv: missing header row");
    return table;
}

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open csv file: " + path);
    return read_csv(in);
}

std::size_t CsvTable::column_index(const std::string& name_or_index) const {
    for (std::size_t j = 0; j < header.size(); ++j) {
        if (header[j] == name_or_index) return j;
    }
    // fall back to a decimal column index
    if (!name_or_index.empty() &&
        std::all_of(name_or_index.begin(), name_or_index.end(),
                    [](unsigned char c) { return std::isdigit(c); })) {
        const std::size_t idx = std::stoul(name_or_index);
        if (idx < header.size()) return idx;
    }
    throw InputError("csv: no column named '" + name_or_index + "'");
}

std::vector<double> CsvTable::numeric_column(std::size_t col) const {
    std::vector<double> out;
    out.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const std::string& cell = rows[i][col];
        char* end = nullptr;
        const double v = std::strtod(cell.c_str(), &end);
        if (end == cell.c_str() || *end != '\0') {
            throw InputError("csv: non-numeric cell '" + cell + "' in column '" + header[col] +
                             "', row " + std::to_string(i + 1));
        }
        out.push_back(v);
    }
    return out;
}

std::string format_double(double x) {
    char buf[40];
    // shortest decimal that still round-trips the bits
    for (int precision = 1; precision <= 17; ++precision) {
        std::snprintf(buf, sizeof(buf), "%.*g", precision, x);
        if (std::strtod(buf, nullptr) == x) return buf;
    }
    return buf;
}

std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += '"';
    return out;
}

void CsvWriter::row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out_ << ',';
        out_ << csv_escape(cells[i]);
    }
    out_ << '\n';
}

}  // namespace tailboost
