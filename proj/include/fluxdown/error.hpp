/// @file error.hpp
/// @brief Error categories shared by every fluxdown module.
#pragma once

#include <stdexcept>
#include <string>

namespace fluxdown {

enum class ErrorKind {
    dimension_mismatch,
    too_small,
    degenerate,
    format,
    parse,
    io,
    stability,
    stall,
    invalid_argument,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

inline const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::dimension_mismatch: return "dimension mismatch";
        case ErrorKind::too_small: return "grid too small";
        case ErrorKind::degenerate: return "degenerate";
        case ErrorKind::format: return "format error";
        case ErrorKind::parse: return "parse error";
        case ErrorKind::io: return "I/O error";
        case ErrorKind::stability: return "stability error";
        case ErrorKind::stall: return "convergence stall";
        case ErrorKind::invalid_argument: return "invalid argument";
    }
    return "error";
}

}  // namespace fluxdown
