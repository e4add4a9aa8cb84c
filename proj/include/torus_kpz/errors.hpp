#pragma once

#include <stdexcept>
#include <string>

namespace torus_kpz {

// Error taxonomy. Config/usage errors and numerical failures are kept apart
// so the CLI can map them to distinct exit codes.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

struct SizeMismatch : ConfigError {
    explicit SizeMismatch(const std::string& msg) : ConfigError(msg) {}
};

struct NonpositiveMass : NumericError {
    explicit NonpositiveMass(const std::string& msg) : NumericError(msg) {}
};

struct NegativeValue : NumericError {
    explicit NegativeValue(const std::string& msg) : NumericError(msg) {}
};

struct NonpositiveTime : ConfigError {
    explicit NonpositiveTime(const std::string& msg) : ConfigError(msg) {}
};

struct NegativeTime : ConfigError {
    explicit NegativeTime(const std::string& msg) : ConfigError(msg) {}
};

struct BlowUp : NumericError {
    explicit BlowUp(const std::string& msg) : NumericError(msg) {}
};

struct Unsupported : ConfigError {
    explicit Unsupported(const std::string& msg) : ConfigError(msg) {}
};

struct FrequencyOutOfBand : ConfigError {
    explicit FrequencyOutOfBand(const std::string& msg) : ConfigError(msg) {}
};

struct InsufficientSamples : ConfigError {
    explicit InsufficientSamples(const std::string& msg) : ConfigError(msg) {}
};

struct TooFewSamples : ConfigError {
    explicit TooFewSamples(const std::string& msg) : ConfigError(msg) {}
};

struct EmptyEnsemble : ConfigError {
    explicit EmptyEnsemble(const std::string& msg) : ConfigError(msg) {}
};

struct WrongNoiseKind : ConfigError {
    explicit WrongNoiseKind(const std::string& msg) : ConfigError(msg) {}
};

struct AllZeroDistances : NumericError {
    explicit AllZeroDistances(const std::string& msg) : NumericError(msg) {}
};

struct CostGuard : ConfigError {
    explicit CostGuard(const std::string& msg) : ConfigError(msg) {}
};

struct PositivityBreach : NumericError {
    explicit PositivityBreach(const std::string& msg) : NumericError(msg) {}
};

}  // namespace torus_kpz
