#pragma once

#include <stdexcept>
#include <string>

namespace ropaws {

// Bad input data or dimensions (CLI exit code 2).
struct ValidationError : std::runtime_error {
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad hyperparameter or config value (CLI exit code 2).
struct ParameterError : std::runtime_error {
    explicit ParameterError(const std::string& msg) : std::runtime_error(msg) {}
};

// Solver or floating-point failure (CLI exit code 3).
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace ropaws
