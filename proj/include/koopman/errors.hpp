#pragma once

#include <stdexcept>
#include <string>

namespace koopman {

/// Bad arguments, shapes or configuration. The CLI maps this to exit code 2.
class ParameterError : public std::invalid_argument {
public:
    explicit ParameterError(const std::string& what) : std::invalid_argument(what) {}
};

/// Shape mismatch between operands.
class DimensionError : public ParameterError {
public:
    explicit DimensionError(const std::string& what) : ParameterError(what) {}
};

/// The input is well formed but the computation cannot proceed
/// (rank zero, singular projection, divergence). The CLI maps this to exit code 3.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace koopman
