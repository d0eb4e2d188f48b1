#include "mvpi/csv.hpp"

#include "mvpi/error.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace mvpi {

namespace {

std::vector<std::string> split(const std::string& line)
{
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

std::string trimmed(std::string s)
{
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

}  // namespace

std::string format_double(double x)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

void write_csv_row(std::ostream& out, const std::vector<double>& row)
{
    for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) out << ',';
        out << format_double(row[i]);
    }
    out << '\n';
}

void write_csv_header(std::ostream& out, const std::vector<std::string>& header)
{
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i) out << ',';
        out << header[i];
    }
    out << '\n';
}

CsvTable read_csv(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::InvalidConfig, "cannot open " + path);
    CsvTable table;
    std::string line;
    if (!std::getline(in, line)) throw Error(ErrorCode::InvalidConfig, path + " is empty");
    for (const std::string& h : split(line)) table.header.push_back(trimmed(h));

    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trimmed(line).empty()) continue;
        const std::vector<std::string> cells = split(line);
        if (cells.size() != table.header.size()) {
            std::ostringstream os;
            os << path << ":" << line_no << " has " << cells.size() << " cells, header has "
               << table.header.size();
            throw Error(ErrorCode::LengthMismatch, os.str());
        }
        std::vector<double> row;
        row.reserve(cells.size());
        for (const std::string& raw : cells) {
            const std::string cell = trimmed(raw);
            char* end = nullptr;
            errno = 0;
            const double v = std::strtod(cell.c_str(), &end);
            if (cell.empty() || *end != '\0' || (errno == ERANGE && std::abs(v) == HUGE_VAL)) {
                std::ostringstream os;
                os << path << ":" << line_no << ": cannot parse \"" << cell << "\"";
                throw Error(ErrorCode::InvalidConfig, os.str());
            }
            row.push_back(v);
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

}  // namespace mvpi
