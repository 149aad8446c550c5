#include "ktnas/csv.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <system_error>

#include "ktnas/errors.hpp"

namespace ktnas {

std::string format_double(double value) {
    if (std::isnan(value)) return "nan";
    char buffer[64];
    auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof buffer, value);
    if (ec != std::errc()) throw ContractError("double formatting failed");
    return std::string(buffer, ptr);
}

double parse_double(const std::string& field, const std::string& context) {
    if (field == "nan") return std::nan("");
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc() || ptr != field.data() + field.size())
        throw DataError(context + ": '" + field + "' is not a number");
    return value;
}

long parse_long(const std::string& field, const std::string& context) {
    long value = 0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc() || ptr != field.data() + field.size())
        throw DataError(context + ": '" + field + "' is not an integer");
    return value;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t pos = 0;
    while (pos <= line.size()) {
        std::size_t next = line.find(',', pos);
        if (next == std::string::npos) next = line.size();
        fields.push_back(line.substr(pos, next - pos));
        if (next == line.size()) break;
        pos = next + 1;
    }
    return fields;
}

std::string join_csv(const std::vector<std::string>& fields) {
    std::string line;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i > 0) line.push_back(',');
        line += fields[i];
    }
    return line;
}

void ensure_writable(const std::string& path, bool force) {
    std::error_code ec;
    if (!force && std::filesystem::exists(path, ec))
        throw DataError("'" + path + "' exists; pass force to overwrite");
}

}  // namespace ktnas
