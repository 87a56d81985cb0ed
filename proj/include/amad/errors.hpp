#pragma once

#include <stdexcept>
#include <string>

namespace amad {

/// Bad or inconsistent run configuration (unknown key, invalid value, ...).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Unreadable or malformed data file, out-of-vocabulary id, ...
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Evaluation impossible (e.g. single-class score file).
struct EvalError : std::runtime_error {
    explicit EvalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace amad
