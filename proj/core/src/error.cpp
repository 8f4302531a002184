#include "gridrelax/error.hpp"

namespace gridrelax {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::kMissingField: return "MISSING_FIELD";
        case ErrorCode::kMalformedRow: return "MALFORMED_ROW";
        case ErrorCode::kUnsupportedCost: return "UNSUPPORTED_COST";
        case ErrorCode::kNoReference: return "NO_REFERENCE";
        case ErrorCode::kDuplicateId: return "DUPLICATE_ID";
        case ErrorCode::kDegenerateBranch: return "DEGENERATE_BRANCH";
        case ErrorCode::kInvalidNetwork: return "INVALID_NETWORK";
        case ErrorCode::kModelUnsound: return "MODEL_UNSOUND";
        case ErrorCode::kNonconvexCost: return "NONCONVEX_COST";
        case ErrorCode::kOracleNoFeasible: return "ORACLE_NO_FEASIBLE";
        case ErrorCode::kOracleTooLarge: return "ORACLE_TOO_LARGE";
        case ErrorCode::kIo: return "IO_ERROR";
    }
    return "UNKNOWN";
}

}  // namespace gridrelax
