#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace subabsorb {

// Base for every error raised by the library. The CLI maps subclasses to
// exit codes (FitError -> 2, ConfigError -> 3).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

// Time step outside (0, tau_a/10].
class StepSizeError : public Error {
public:
    using Error::Error;
};

// Spatial grid too coarse for the requested optical depth.
class ResolutionError : public Error {
public:
    using Error::Error;
};

class DensityTooHighError : public Error {
public:
    using Error::Error;
};

// Single-excitation amplitudes left the perturbative regime.
class PerturbativeBoundError : public Error {
public:
    using Error::Error;
};

class DegenerateTraceError : public Error {
public:
    using Error::Error;
};

class FitError : public Error {
public:
    FitError(const std::string& what, std::vector<double> last_residuals = {})
        : Error(what), residuals_(std::move(last_residuals)) {}

    const std::vector<double>& residuals() const noexcept { return residuals_; }

private:
    std::vector<double> residuals_;
};

class UncertaintyUnreliableError : public Error {
public:
    using Error::Error;
};

}  // namespace subabsorb
