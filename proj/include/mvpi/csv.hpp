#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace mvpi {

/// 17 significant digits, enough to round-trip any double.
std::string format_double(double x);

void write_csv_row(std::ostream& out, const std::vector<double>& row);
void write_csv_header(std::ostream& out, const std::vector<std::string>& header);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

/// Numeric CSV with one header row. Throws InvalidConfig on malformed cells and
/// LengthMismatch on rows whose width differs from the header.
CsvTable read_csv(const std::string& path);

}  // namespace mvpi
