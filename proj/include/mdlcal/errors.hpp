#pragma once

#include <stdexcept>
#include <string>

namespace mdlcal {

// Base of every mdlcal failure. Catching this is enough at the CLI boundary.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InvalidDistribution : Error {
    using Error::Error;
};

struct InvalidForecast : Error {
    using Error::Error;
};

// Operands live on different feature/label spaces.
struct SpaceMismatch : Error {
    using Error::Error;
};

// A feature point carries no probability mass; conditionals are undefined there.
struct ZeroMassFeature : Error {
    using Error::Error;
};

struct WeightNotSimplex : Error {
    using Error::Error;
};

// Root finder exhausted its iteration budget; residual carries the last gap.
struct BisectionFailure : Error {
    double residual;
    BisectionFailure(const std::string& what, double residual_)
        : Error(what), residual(residual_) {}
};

struct TooManyRules : Error {
    using Error::Error;
};

struct NotCalibrated : Error {
    using Error::Error;
};

struct ProbeOutsideEnvelope : Error {
    using Error::Error;
};

struct DegenerateCosts : Error {
    using Error::Error;
};

struct SizeLimit : Error {
    using Error::Error;
};

struct ConfigError : Error {
    using Error::Error;
};

}  // namespace mdlcal
