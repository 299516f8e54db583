#include "invabc/csv.hpp"

#include "invabc/errors.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace invabc::csv {

std::size_t Table::col(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return i;
    throw IoError("csv: no column named '" + name + "'");
}

void write(const std::string& path, const std::vector<std::string>& header,
           const std::vector<std::vector<double>>& rows) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw IoError("csv: cannot open '" + path + "' for writing");
    for (std::size_t i = 0; i < header.size(); ++i)
        std::fprintf(f, "%s%s", header[i].c_str(), i + 1 < header.size() ? "," : "\n");
    for (const auto& row : rows) {
        if (row.size() != header.size()) {
            std::fclose(f);
            throw IoError("csv: row width mismatch writing '" + path + "'");
        }
        for (std::size_t i = 0; i < row.size(); ++i)
            std::fprintf(f, "%.17g%s", row[i], i + 1 < row.size() ? "," : "\n");
    }
    if (std::fclose(f) != 0) throw IoError("csv: close failed for '" + path + "'");
}

Table read(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("csv: cannot open '" + path + "'");
    Table t;
    std::string line;
    bool have_header = false;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        std::stringstream ss(line);
        std::string cell;
        if (!have_header) {
            while (std::getline(ss, cell, ',')) t.header.push_back(cell);
            have_header = true;
            continue;
        }
        std::vector<double> row;
        row.reserve(t.header.size());
        while (std::getline(ss, cell, ',')) {
            try {
                row.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw IoError("csv: bad number '" + cell + "' at " + path + ":" + std::to_string(lineno));
            }
        }
        if (row.size() != t.header.size())
            throw IoError("csv: row width mismatch at " + path + ":" + std::to_string(lineno));
        t.rows.push_back(std::move(row));
    }
    if (!have_header) throw IoError("csv: '" + path + "' is empty");
    return t;
}

} // namespace invabc::csv
