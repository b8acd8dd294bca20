#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace kronprec {

enum class ErrorKind {
    NotPositiveDefinite,
    NoConvergence,
    ShapeMismatch,
    DimensionCap,
    InvalidArgument,
    InfeasibleDesign,
    DegenerateData,
    IllPosed,
    DomainError,
    InsufficientData,
    ConfigError,
    ParseError,
    IoError,
};

constexpr std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::NotPositiveDefinite: return "NotPositiveDefinite";
        case ErrorKind::NoConvergence: return "NoConvergence";
        case ErrorKind::ShapeMismatch: return "ShapeMismatch";
        case ErrorKind::DimensionCap: return "DimensionCap";
        case ErrorKind::InvalidArgument: return "InvalidArgument";
        case ErrorKind::InfeasibleDesign: return "InfeasibleDesign";
        case ErrorKind::DegenerateData: return "DegenerateData";
        case ErrorKind::IllPosed: return "IllPosed";
        case ErrorKind::DomainError: return "DomainError";
        case ErrorKind::InsufficientData: return "InsufficientData";
        case ErrorKind::ConfigError: return "ConfigError";
        case ErrorKind::ParseError: return "ParseError";
        case ErrorKind::IoError: return "IoError";
    }
    return "Unknown";
}

/// Single exception type for the library; `kind()` carries the failure class.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

    /// Numerical failures map to exit code 1, everything else (config, IO,
    /// parse) to exit code 2.
    bool is_numerical() const noexcept {
        switch (kind_) {
            case ErrorKind::NotPositiveDefinite:
            case ErrorKind::NoConvergence:
            case ErrorKind::IllPosed:
            case ErrorKind::DegenerateData:
            case ErrorKind::InsufficientData:
                return true;
            default:
                return false;
        }
    }

private:
    ErrorKind kind_;
};

}  // namespace kronprec
