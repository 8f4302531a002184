#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gridrelax {

enum class ErrorCode {
    kMissingField,
    kMalformedRow,
    kUnsupportedCost,
    kNoReference,
    kDuplicateId,
    kDegenerateBranch,
    kInvalidNetwork,
    kModelUnsound,
    kNonconvexCost,
    kOracleNoFeasible,
    kOracleTooLarge,
    kIo,
};

std::string_view to_string(ErrorCode code);

/// Exception carrying one of the error classes above. Every throwing entry
/// point in the library uses this type so callers can dispatch on code().
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace gridrelax
