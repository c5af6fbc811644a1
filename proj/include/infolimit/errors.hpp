#pragma once

#include <complex>
#include <stdexcept>
#include <string>

namespace infolimit {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

/// Plant and controller both have direct feedthrough (algebraic loop).
class WellPosednessError : public Error {
public:
    using Error::Error;
};

/// A system that must be Schur stable is not. Carries the eigenvalue of
/// largest modulus.
class StabilityError : public Error {
public:
    StabilityError(const std::string& what, std::complex<double> eigenvalue)
        : Error(what), eigenvalue_(eigenvalue) {}

    std::complex<double> eigenvalue() const noexcept { return eigenvalue_; }
    double radius() const noexcept { return std::abs(eigenvalue_); }

private:
    std::complex<double> eigenvalue_;
};

class NotSchurError : public Error {
public:
    using Error::Error;
};

/// e^{jw}I - A is singular at a grid frequency.
class SingularityError : public Error {
public:
    using Error::Error;
};

class DegenerateSpectrumError : public Error {
public:
    using Error::Error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

/// Covariance is not positive definite where it has to be.
class SingularCovarianceError : public Error {
public:
    using Error::Error;
};

class CapacityError : public Error {
public:
    using Error::Error;
};

class InsufficientDataError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration. `field()` is the dotted path of the offending entry.
class ConfigError : public Error {
public:
    ConfigError(const std::string& field, const std::string& what)
        : Error(field.empty() ? what : field + ": " + what), field_(field) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

}  // namespace infolimit
