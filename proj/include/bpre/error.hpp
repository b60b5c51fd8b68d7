#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bpre {

enum class ErrorKind {
    NegativeWeight,
    AllZero,
    SupportTooLarge,
    ZeroMean,
    OutOfDomain,
    NotCritical,
    DegenerateAtOne,
    BadEpsilon,
    PopulationCapExceeded,
    NodeCapExceeded,
    RetryBudgetExceeded,
    BadParameters,
    EmptySample,
    EnumerationTooLarge,
    ConfigError,
};

inline std::string_view to_string(ErrorKind k) {
    switch (k) {
    case ErrorKind::NegativeWeight: return "NegativeWeight";
    case ErrorKind::AllZero: return "AllZero";
    case ErrorKind::SupportTooLarge: return "SupportTooLarge";
    case ErrorKind::ZeroMean: return "ZeroMean";
    case ErrorKind::OutOfDomain: return "OutOfDomain";
    case ErrorKind::NotCritical: return "NotCritical";
    case ErrorKind::DegenerateAtOne: return "DegenerateAtOne";
    case ErrorKind::BadEpsilon: return "BadEpsilon";
    case ErrorKind::PopulationCapExceeded: return "PopulationCapExceeded";
    case ErrorKind::NodeCapExceeded: return "NodeCapExceeded";
    case ErrorKind::RetryBudgetExceeded: return "RetryBudgetExceeded";
    case ErrorKind::BadParameters: return "BadParameters";
    case ErrorKind::EmptySample: return "EmptySample";
    case ErrorKind::EnumerationTooLarge: return "EnumerationTooLarge";
    case ErrorKind::ConfigError: return "ConfigError";
    }
    return "Unknown";
}

/// All library failures are reported through this exception; `kind()`
/// identifies the failure class.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
    throw Error(kind, what);
}

}  // namespace bpre
