#pragma once

#include <string>
#include <vector>

namespace nrlearn {

// shortest round-trip decimal representation (std::to_chars)
std::string format_double(double value);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    int column_index(const std::string& name) const; // -1 when absent
    std::vector<double> column(const std::string& name) const;
};

CsvTable read_csv(const std::string& path);
void write_csv(const std::string& path, const CsvTable& table);

} // namespace nrlearn
