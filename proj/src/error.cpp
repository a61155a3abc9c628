#include "tai/error.hpp"

namespace tai {

std::string_view error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::invalid_dimension: return "invalid-dimension";
        case ErrorCode::invalid_config: return "invalid-config";
        case ErrorCode::io_failure: return "io-failure";
        case ErrorCode::bad_magic: return "bad-magic";
        case ErrorCode::bad_version: return "bad-version";
        case ErrorCode::vocab_mismatch: return "vocab-mismatch";
        case ErrorCode::truncated_payload: return "truncated-payload";
        case ErrorCode::corrupt_payload: return "corrupt-payload";
        case ErrorCode::dimension_mismatch: return "dimension-mismatch";
        case ErrorCode::length_mismatch: return "length-mismatch";
        case ErrorCode::id_mismatch: return "id-mismatch";
        case ErrorCode::orphan_response: return "orphan-response";
        case ErrorCode::empty_input: return "empty-input";
        case ErrorCode::mode_mismatch: return "mode-mismatch";
        case ErrorCode::step_out_of_range: return "step-out-of-range";
        case ErrorCode::parse_error: return "parse-error";
    }
    return "unknown";
}

}  // namespace tai
