#pragma once

#include <stdexcept>
#include <string>

namespace ktnas {

// Caller broke a documented precondition (bad gene index, unevaluated
// individual in a tournament pool, mismatched vector lengths, ...).
struct ContractError : std::logic_error {
    explicit ContractError(const std::string& what) : std::logic_error(what) {}
};

// Problem with external data: malformed CSV, unknown architecture key,
// unreachable landscape target, unreadable file.
struct DataError : std::runtime_error {
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace ktnas
