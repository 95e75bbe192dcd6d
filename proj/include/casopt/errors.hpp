// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace casopt {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A probability vector could not be formed (all-zero, negative or non-finite mass).
class DegeneratePmf : public Error {
public:
    using Error::Error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

/// A discretization grid does not cover enough of a distribution's support.
class TruncationError : public Error {
public:
    TruncationError(const std::string& what, double mass_lost)
        : Error(what + " (mass lost " + std::to_string(mass_lost) + ")"), mass_lost_(mass_lost) {}

    double mass_lost() const noexcept { return mass_lost_; }

private:
    double mass_lost_;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Raised by the convex solvers when no strictly feasible start exists.
class InfeasibleStart : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace casopt
