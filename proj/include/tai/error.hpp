#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tai {

enum class ErrorCode {
    invalid_dimension,
    invalid_config,
    io_failure,
    bad_magic,
    bad_version,
    vocab_mismatch,
    truncated_payload,
    corrupt_payload,
    dimension_mismatch,
    length_mismatch,
    id_mismatch,
    orphan_response,
    empty_input,
    mode_mismatch,
    step_out_of_range,
    parse_error,
};

std::string_view error_code_name(ErrorCode code);

// Every failure surfaced by the library carries a stable code so the CLI can
// report it as a single machine-parseable line.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace tai
