#pragma once

#include <stdexcept>
#include <string>

namespace octofunc {

enum class Errc {
    malformed_declaration,
    unsupported_param_kind,
    duplicate_name,
    registry_frozen,
    registry_not_frozen,
    unknown_function,
    already_extended,
    invalid_token_id,
    shape_mismatch,
    all_masked,
    not_scalar_loss,
    context_overflow,
    empty_corpus,
    batch_too_small,
    missing_prerequisite_stage,
    vocabulary_not_extended,
    no_handler,
    malformed_recorded_file,
    io_failure,
    unknown_version,
    invalid_config,
    parse_failure,
    validation_failure,
};

const char* errc_name(Errc c);

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& msg)
        : std::runtime_error(std::string(errc_name(code)) + ": " + msg), code_(code) {}

    Errc code() const { return code_; }

private:
    Errc code_;
};

}  // namespace octofunc
