// errors.hpp — exception types raised by the simulator

#pragma once

#include <stdexcept>
#include <string>

namespace lmgsq {

/// Base class for every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Spin number (or any matrix dimension) is not usable.
class InvalidDimension : public Error {
public:
    using Error::Error;
};

/// A physical parameter lies outside its admissible range.
class InvalidParameter : public Error {
public:
    using Error::Error;
};

/// Covariance matrix could not be factorized even after the jitter schedule.
class KernelNotPositive : public Error {
public:
    KernelNotPositive(const std::string& what, double min_pivot)
        : Error(what), min_pivot_(min_pivot) {}
    double min_pivot() const noexcept { return min_pivot_; }

private:
    double min_pivot_;
};

/// A non-finite value appeared while integrating.
class Divergence : public Error {
public:
    Divergence(const std::string& what, double time)
        : Error(what + " (t = " + std::to_string(time) + ")"), time_(time) {}
    double time() const noexcept { return time_; }

private:
    double time_;
};

/// Bad user configuration; `field` names the offending key.
class ConfigError : public Error {
public:
    ConfigError(std::string field, const std::string& what)
        : Error(field + ": " + what), field_(std::move(field)) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

} // namespace lmgsq
