#pragma once

#include <stdexcept>
#include <string>

namespace regrasp {

// Error taxonomy shared by the C++ core and the C API status codes.
// Parameter errors: caller passed a value outside the documented domain.
// Contract violations: caller broke a precondition (programming error).
// Scene errors: generation could not satisfy placement constraints (reseed).

class ParameterError : public std::invalid_argument {
public:
    explicit ParameterError(const std::string& what) : std::invalid_argument(what) {}
};

class ContractViolation : public std::logic_error {
public:
    explicit ContractViolation(const std::string& what) : std::logic_error(what) {}
};

class SceneGenError : public std::runtime_error {
public:
    explicit SceneGenError(const std::string& what) : std::runtime_error(what) {}
};

class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

class FitError : public std::runtime_error {
public:
    explicit FitError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace regrasp
