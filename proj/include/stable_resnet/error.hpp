#pragma once

#include <stdexcept>
#include <string>

namespace sresnet {

struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

// Caller broke a documented precondition.
struct ContractError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct IndexError : std::out_of_range {
    using std::out_of_range::out_of_range;
};

struct KernelOverflow : std::overflow_error {
    using std::overflow_error::overflow_error;
};

struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ParseError : std::runtime_error {
    ParseError(const std::string& what, std::size_t offset)
        : std::runtime_error(what + " (byte offset " + std::to_string(offset) + ")"), offset(offset) {}
    std::size_t offset;
};

} // namespace sresnet
