#pragma once

#include <stdexcept>
#include <string>

namespace sar {

enum class ErrorCode {
    parse,
    validation,
    inference,
    not_found,
    conflict,
    invalid_transition,
    version,
    integrity,
    io,
};

const char* to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace sar
