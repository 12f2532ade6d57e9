#include "psyphy/error.hpp"

namespace psyphy {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::invalid_parameter: return "invalid-parameter";
        case ErrorCode::invalid_input: return "invalid-input";
        case ErrorCode::invalid_dataset: return "invalid-dataset";
        case ErrorCode::invalid_label: return "invalid-label";
        case ErrorCode::invalid_measurement: return "invalid-measurement";
        case ErrorCode::degenerate_distribution: return "degenerate-distribution";
        case ErrorCode::insufficient_data: return "insufficient-data";
        case ErrorCode::stratification_failure: return "stratification-failure";
        case ErrorCode::capacity_exhausted: return "capacity-exhausted";
        case ErrorCode::sequence_violation: return "sequence-violation";
        case ErrorCode::session_closed: return "session-closed";
        case ErrorCode::not_found: return "not-found";
        case ErrorCode::divergence: return "divergence";
        case ErrorCode::io_error: return "io-error";
        case ErrorCode::transport_failure: return "transport-failure";
    }
    return "unknown";
}

}  // namespace psyphy
