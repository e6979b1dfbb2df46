#pragma once

#include <stdexcept>
#include <string>

namespace kloostlab {

// Base class for every error this library throws.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Argument outside the documented domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

// Inversion requested for a residue that is 0 mod p (the excluded case of psi).
class ZeroInverseError : public DomainError {
public:
    using DomainError::DomainError;
};

// Certified floor could not separate the value from an integer at the
// maximum working precision.
class PrecisionExhaustedError : public Error {
public:
    using Error::Error;
};

// Adaptive quadrature failed to reach the requested tolerance.
class QuadratureError : public Error {
public:
    using Error::Error;
};

// Segment decomposition with R < 1.
class DegenerateDecompositionError : public Error {
public:
    using Error::Error;
};

// Corollary-style precondition on set sizes violated.
class RangeError : public Error {
public:
    using Error::Error;
};

// Bad experiment configuration (unknown key, missing field, unparsable value).
class ConfigError : public Error {
public:
    using Error::Error;
};

// A module error propagated out of a single experiment row.
class ComputeError : public Error {
public:
    using Error::Error;
};

// plotdata referenced a field that no row carries.
class FieldError : public Error {
public:
    using Error::Error;
};

// Output file could not be written (or emit called with no rows).
class IoError : public Error {
public:
    using Error::Error;
};

} // namespace kloostlab
