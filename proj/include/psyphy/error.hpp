#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace psyphy {

enum class ErrorCode {
    invalid_parameter,
    invalid_input,
    invalid_dataset,
    invalid_label,
    invalid_measurement,
    degenerate_distribution,
    insufficient_data,
    stratification_failure,
    capacity_exhausted,
    sequence_violation,
    session_closed,
    not_found,
    divergence,
    io_error,
    transport_failure,
};

std::string_view to_string(ErrorCode code);

// Every library failure carries a machine-readable code; the CLI and the
// HTTP layer map it to exit status / status code.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

}  // namespace psyphy
