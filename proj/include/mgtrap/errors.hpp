#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace mgtrap {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Position outside the validity region of the truncated field expansion.
struct DomainError : Error {
    using Error::Error;
};

/// Inputs that violate a model invariant (bad multipole terms, chi >= 0, ...).
struct ModelError : Error {
    using Error::Error;
};

struct CalibrationError : Error {
    CalibrationError(const std::string& what, std::vector<double> residuals_ = {})
        : Error(what), residuals(std::move(residuals_)) {}
    std::vector<double> residuals;
};

/// No potential minimum, or a Hessian that is not positive definite.
struct UnstableTrapError : CalibrationError {
    using CalibrationError::CalibrationError;
};

/// Gas damping requested outside the free-molecular regime.
struct RegimeError : Error {
    using Error::Error;
};

struct IntegrationError : Error {
    using Error::Error;
};

struct FitError : Error {
    FitError(const std::string& what, std::vector<double> trace = {})
        : Error(what), residual_trace(std::move(trace)) {}
    std::vector<double> residual_trace;
};

/// File could not be read or written.
struct IoError : Error {
    using Error::Error;
};

struct ConfigError : Error {
    ConfigError(const std::string& what, std::vector<std::string> diags = {})
        : Error(what), diagnostics(std::move(diags)) {}
    std::vector<std::string> diagnostics;
};

}  // namespace mgtrap
