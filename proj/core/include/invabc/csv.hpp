#pragma once

#include <string>
#include <vector>

namespace invabc::csv {

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    std::size_t col(const std::string& name) const;
};

/// Writes a numeric table. Doubles are printed with %.17g so that a
/// write/read round trip reproduces the exact bit pattern.
void write(const std::string& path, const std::vector<std::string>& header,
           const std::vector<std::vector<double>>& rows);

/// Reads a numeric table written by write(). Lines starting with '#' and
/// blank lines are skipped. The first remaining line is the header.
Table read(const std::string& path);

} // namespace invabc::csv
