#pragma once

#include <string>
#include <vector>

namespace ktnas {

// Shortest round-trip decimal form (std::to_chars); "nan" for NaN. This is
// the only float formatter used for emitted files, so identical values give
// identical bytes.
std::string format_double(double value);

// Strict double parse of a whole field; DataError otherwise.
double parse_double(const std::string& field, const std::string& context);

long parse_long(const std::string& field, const std::string& context);

// Simple comma split; fields in this project never contain commas or quotes.
std::vector<std::string> split_csv_line(const std::string& line);

std::string join_csv(const std::vector<std::string>& fields);

// Refuses to clobber an existing file unless force is set (DataError).
void ensure_writable(const std::string& path, bool force);

}  // namespace ktnas
