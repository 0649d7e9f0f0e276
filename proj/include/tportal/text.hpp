#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace tportal {

bool is_valid_utf8(std::string_view s);

/// Splits one CSV record; supports RFC 4180 double-quoted cells.
std::vector<std::string> split_csv_line(std::string_view line);
std::string join_csv_line(const std::vector<std::string>& cells);

bool parse_double(std::string_view s, double& out);
bool parse_integer(std::string_view s, long long& out);

/// Shortest representation that round-trips through parse_double.
std::string format_double(double v);

}  // namespace tportal
