#pragma once

#include <string>
#include <vector>

namespace nested_eig {

// Shortest round-trip representation with '.' as decimal separator,
// independent of the global locale. "nan"/"inf"/"-inf" for non-finite values.
std::string format_number(double x);

std::string csv_line(const std::vector<std::string>& fields);

// Writes header and rows to `path`, or to stdout when the path is empty.
// With `append` set, an existing non-empty file keeps its content and only
// rows are added.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows, bool append = false);

}  // namespace nested_eig
